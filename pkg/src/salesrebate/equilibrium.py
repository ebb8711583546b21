"""Threshold equilibria of the consumers' subgame and the firm's profit.

A cutoff c is an equilibrium when the marginal consumer is indifferent,
g(c) = c + E_{v|c}[r̂(v)] - p = 0.  Profit is computed two ways: by
integrating over realized quality (what the firm actually collects) and
by integrating over consumer valuations (the change of measure that
exposes the cutoff-price baseline and the discrimination surplus).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    BracketError,
    ConvergenceError,
    MultipleEquilibriaError,
    NoEquilibriumError,
)
from .gaussian import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    RootBracket,
    find_root,
    gauss_expect,
    norm_cdf,
    scan_roots,
)
from .market import MarketParams, no_reward_profit, posterior_mean
from .schedules import RewardSchedule, check_rate_condition, check_spread_condition

# Offsets (in σ_ε) at which the sales-volume sigmoid is split for quadrature.
_SIGMOID_SPLITS = (-8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True)
class Equilibrium:
    cutoff: float
    indifference_residual: float
    expected_profit: float
    reward_at_cutoff: float
    unique: bool


@dataclass(frozen=True)
class ProfitDecomposition:
    """Valuation-route profit split into the cutoff-price baseline and the
    surplus from charging higher expected net prices above the cutoff.

    The baseline is (p - r_c)Φ((θ - c)/σ), which equals cΦ((θ - c)/σ) at
    an equilibrium cutoff.
    """

    baseline_at_cutoff: float
    discrimination_surplus: float
    total: float
    reward_at_cutoff: float


def reward_at(params: MarketParams, schedule: RewardSchedule, v_i,
              spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """E_{v|v_i}[r̂(v)], vectorized in ``v_i``; the result has the shape of ``v_i``."""
    return _expect(schedule, posterior_mean(params, np.asarray(v_i, dtype=float)), params.sigma_v, spec)


def _expect(schedule: RewardSchedule, mu, s: float, spec: QuadratureSpec):
    # Some schedules return 1-D output for scalar input; keep the input shape.
    mu = np.asarray(mu, dtype=float)
    out = np.asarray(schedule.expected(mu, s, spec), dtype=float)
    return out.reshape(mu.shape) if out.size == mu.size else np.broadcast_to(out, mu.shape)


def indifference(params: MarketParams, p: float, schedule: RewardSchedule, c,
                 spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """g(c) = c + E_{v|c}[r̂(v)] - p; also the expected payoff of valuation c."""
    c = np.asarray(c, dtype=float)
    return c + reward_at(params, schedule, c, spec) - p


def uniqueness_guaranteed(params: MarketParams, schedule: RewardSchedule) -> bool:
    """True when g is monotone because a single-crossing certificate holds.

    A nonincreasing schedule alone is not enough while it stays fixed in
    quality: a tall early step can bend g back and create three cutoffs.
    The nonincreasing guarantee belongs to the sales-volume announcement,
    see :func:`indifference_volume_domain`.
    """
    return check_spread_condition(schedule, params).holds or check_rate_condition(schedule, params).holds


def indifference_volume_domain(params: MarketParams, p: float, schedule: RewardSchedule,
                               announced_cutoff: float, c,
                               spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Indifference when the contract is announced in sales volume.

    The contract pays r(ā) = r̂(c₀ + σ_ε Φ⁻¹(ā)) with c₀ = ``announced_cutoff``.
    If consumers coordinate on cutoff c instead, volume at quality v is
    Φ((v - c)/σ_ε), so they face r̂(v + c₀ - c).  For a nonincreasing r̂
    the second term rises with c and g has exactly one root.
    """
    c = np.asarray(c, dtype=float)
    shifted = posterior_mean(params, c) + announced_cutoff - c
    return c + _expect(schedule, shifted, params.sigma_v, spec) - p


def solve_cutoffs_volume_domain(params: MarketParams, p: float, schedule: RewardSchedule,
                                announced_cutoff: float, n_scan: int = 2000,
                                spec: QuadratureSpec = DEFAULT_QUADRATURE) -> list[float]:
    """Every root of :func:`indifference_volume_domain` on [p - r_max, p - r_min]."""
    lo, hi = _cutoff_bracket(p, schedule)
    return scan_roots(lambda c: indifference_volume_domain(params, p, schedule, announced_cutoff, c, spec),
                      lo, hi, n_scan, tol_abs=1e-14 * max(1.0, abs(p)))


def _cutoff_bracket(p: float, schedule: RewardSchedule) -> tuple[float, float]:
    r_min, r_max = schedule.reward_range()
    pad = 1e-9 * max(1.0, abs(p))
    return p - r_max - pad, p - r_min + pad


def solve_cutoffs(params: MarketParams, p: float, schedule: RewardSchedule,
                  n_scan: int = 2000, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> list[float]:
    """Every equilibrium cutoff found by a sign-change scan with refinement.

    Since 0 <= r_min <= r_c <= r_max, all roots lie in [p - r_max, p - r_min].
    """
    lo, hi = _cutoff_bracket(p, schedule)

    def g(c):
        return indifference(params, p, schedule, c, spec)

    if uniqueness_guaranteed(params, schedule):
        try:
            return [find_root(lambda c: float(g(c)), RootBracket(lo, hi, 1e-14 * max(1.0, abs(p))))]
        except (BracketError, ConvergenceError) as exc:
            raise NoEquilibriumError(f"indifference has no root on [{lo}, {hi}]: {exc}") from exc
    return scan_roots(g, lo, hi, n_scan, tol_abs=1e-14 * max(1.0, abs(p)))


def solve_cutoff(params: MarketParams, p: float, schedule: RewardSchedule,
                 n_scan: int = 2000, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> Equilibrium:
    """The equilibrium cutoff for ``schedule`` at price ``p``.

    Raises :class:`MultipleEquilibriaError` (carrying all cutoffs) rather
    than choosing among several equilibria.
    """
    if not p > 0:
        raise NoEquilibriumError("price must be positive")
    roots = solve_cutoffs(params, p, schedule, n_scan, spec)
    if not roots:
        raise NoEquilibriumError("indifference equation has no root")
    if len(roots) > 1:
        raise MultipleEquilibriaError(f"{len(roots)} equilibrium cutoffs", roots)
    return equilibrium_at(params, p, schedule, roots[0], spec)


def equilibrium_at(params: MarketParams, p: float, schedule: RewardSchedule, cutoff: float,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE) -> Equilibrium:
    r_c = float(reward_at(params, schedule, cutoff, spec))
    return Equilibrium(
        cutoff=float(cutoff),
        indifference_residual=float(cutoff + r_c - p),
        expected_profit=expected_profit_quality(params, p, schedule, cutoff, spec),
        reward_at_cutoff=r_c,
        unique=uniqueness_guaranteed(params, schedule),
    )


def _sales_volume(params: MarketParams, cutoff: float):
    if params.sigma_eps == 0:
        return lambda v: (np.asarray(v) > cutoff).astype(float)
    return lambda v: special.ndtr((np.asarray(v) - cutoff) / params.sigma_eps)


def quality_breakpoints(params: MarketParams, schedule: RewardSchedule, cutoff: float) -> list[float]:
    pts = list(schedule.breakpoints())
    pts += [cutoff + k * params.sigma_eps for k in _SIGMOID_SPLITS]
    return pts


def expected_profit_quality(params: MarketParams, p: float, schedule: RewardSchedule,
                            cutoff: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """E_v[(p - r̂(v)) Φ((v - c)/σ_ε)] over v ~ N(θ, σ_θ²)."""
    volume = _sales_volume(params, cutoff)

    def integrand(v):
        return (p - schedule.evaluate(v)) * volume(v)

    return gauss_expect(integrand, params.theta, params.sigma_theta, spec,
                        quality_breakpoints(params, schedule, cutoff))


def valuation_breakpoints(params: MarketParams, schedule: RewardSchedule) -> list[float]:
    """Valuations whose posterior mean sits on a schedule kink, padded by
    multiples of the posterior width."""
    tau, s = params.tau, params.sigma_v
    if tau == 0:
        return []
    pts = []
    for b in schedule.breakpoints():
        centre = (b - (1.0 - tau) * params.theta) / tau
        pts += [centre + k * s / tau for k in _SIGMOID_SPLITS]
    return pts


def expected_profit_valuation(params: MarketParams, p: float, schedule: RewardSchedule,
                              cutoff: float, spec: QuadratureSpec = DEFAULT_QUADRATURE
                              ) -> ProfitDecomposition:
    """∫_c^∞ (p - E_{v|v_i}[r̂(v)]) ψ(v_i) dv_i with ψ the N(θ, σ²) density."""
    r_c = float(reward_at(params, schedule, cutoff, spec))
    buyers = norm_cdf(params.theta - cutoff, 0.0, params.sigma)
    paid = gauss_expect(lambda x: reward_at(params, schedule, x, spec), params.theta,
                        params.sigma, spec, valuation_breakpoints(params, schedule),
                        lower=cutoff)
    total = p * buyers - paid
    baseline = (p - r_c) * buyers
    return ProfitDecomposition(baseline, r_c * buyers - paid, total, r_c)


@dataclass(frozen=True)
class CutoffRewardCheck:
    holds: bool
    reward_at_cutoff: float
    mean_reward_per_purchase: float


def cutoff_reward_condition(params: MarketParams, p: float, schedule: RewardSchedule, cutoff: float,
                     spec: QuadratureSpec = DEFAULT_QUADRATURE, rtol: float = 1e-12) -> CutoffRewardCheck:
    """Is the reward expected at the cutoff larger than the average reward
    per purchase?  Equivalent to beating price c without rewards."""
    r_c = float(reward_at(params, schedule, cutoff, spec))
    buyers = norm_cdf(params.theta - cutoff, 0.0, params.sigma)
    paid = gauss_expect(lambda x: reward_at(params, schedule, x, spec), params.theta,
                        params.sigma, spec, valuation_breakpoints(params, schedule),
                        lower=cutoff)
    mean = paid / buyers if buyers > 0 else math.nan
    holds = r_c - mean > rtol * max(1.0, abs(r_c))
    return CutoffRewardCheck(bool(holds), r_c, mean)


def profitability_gap(params: MarketParams, p: float, schedule: RewardSchedule,
                      spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Equilibrium profit of ``schedule`` minus the no-reward profit at ``p``."""
    eq = solve_cutoff(params, p, schedule, spec=spec)
    return eq.expected_profit - no_reward_profit(params, p)
