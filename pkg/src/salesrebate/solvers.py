"""
Closed-structure reward programs and profit bounds.

* spread-constrained optimum: a step r_M·1{v <= v_c}, r_M = min(p, √(2π)σ_εσ/σ_θ);
* rate-constrained optimum: a ramp from p to 0 of width τp;
* relaxed bound: the full-price step that is optimal when only the
  indifference equation is kept;
* the valuation-cap bound Π₁ᴴ in closed form.

Each two- or three-unknown first-order system is solved by damped Newton.
Because the indifference equation makes one unknown explicit along the
solution manifold, the system also reduces to a scalar equation; a
sign-change scan of that scalar equation enumerates every stationary point
so the profit-maximizing one is returned rather than whichever root Newton
happened to reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .equilibrium import expected_profit_quality
from .errors import ConvergenceError, DomainError
from .gaussian import (
    DEFAULT_QUADRATURE,
    SQRT_2PI,
    QuadratureSpec,
    integrate,
    lower_partial_expectation,
    norm_cdf,
    scan_roots,
    solve_system,
)
from .market import MarketParams, no_reward_profit
from .schedules import RewardSchedule, SaturatedLinear, Step, spread_bound

CONVERGED_TOL = 1e-9
_SIGMOID_SPLITS = (-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0)


@dataclass
class SolverReport:
    """Solution of one of the program systems plus the program it defines."""

    name: str
    solution: dict[str, float]
    residual_inf_norm: float
    iterations: int
    converged: bool
    schedule: RewardSchedule | None
    cutoff: float
    expected_profit: float
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "solution": dict(self.solution),
            "residual_inf_norm": self.residual_inf_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "schedule": None if self.schedule is None else self.schedule.to_dict(),
            "cutoff": self.cutoff,
            "expected_profit": self.expected_profit,
            **({"extra": self.extra} if self.extra else {}),
        }


@dataclass(frozen=True)
class ProfitBounds:
    pi1: float
    pi2: float
    pi_h: float

    def to_dict(self) -> dict[str, float]:
        return {"pi1": self.pi1, "pi2": self.pi2, "pi_h": self.pi_h}


def _require_uncertainty(params: MarketParams) -> None:
    if params.sigma_eps <= 0:
        raise DomainError("solver divides by sigma_eps; it must be positive")
    if params.sigma_theta <= 0:
        raise DomainError("with sigma_theta = 0 there is no quality uncertainty to exploit")


def _phi(z):
    return np.exp(-0.5 * z * z) / SQRT_2PI


def _log_mills(z):
    return special.log_ndtr(z) + 0.5 * z * z + 0.5 * math.log(2 * math.pi)


def quality_mass_of_buyers(params: MarketParams, cutoff: float, a: float, b: float,
                           spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """∫_a^b Φ((w - c)/σ_ε) φ_{σ_θ}(θ - w) dw, clipped to θ ± R σ_θ."""
    r = spec.truncation_radius * params.sigma_theta
    lo, hi = max(a, params.theta - r), min(b, params.theta + r)
    if hi <= lo:
        return 0.0
    se, st, th = params.sigma_eps, params.sigma_theta, params.theta

    def f(w):
        return special.ndtr((w - cutoff) / se) * _phi((w - th) / st) / st

    return integrate(f, lo, hi, [cutoff + k * se for k in _SIGMOID_SPLITS], spec)


# ---------------------------------------------------------------------------
# Step programs (spread-constrained optimum and relaxed bound)
# ---------------------------------------------------------------------------


def _step_residual(params: MarketParams, p: float, level: float, c: float, v_c: float,
                   scaled: bool) -> np.ndarray:
    """Indifference and first-order condition for the step level·1{v <= v_c}.

    ``scaled`` returns the second equation as D - c/(σ_ε Φ(z)/φ(z)), with D
    the denominator 1 - τ·level·φ_{σ_v}(v_c - μ_c); it is continuous where D
    changes sign and shares its roots with the ratio form.
    """
    tau, sv, se = params.tau, params.sigma_v, params.sigma_eps
    mu_c = tau * c + (1 - tau) * params.theta
    y = (v_c - mu_c) / sv
    z = (v_c - c) / se
    denom = 1.0 - tau * level * _phi(y) / sv
    f1 = c + level * special.ndtr(y) - p
    if scaled:
        f2 = denom - c * np.exp(-_log_mills(z) - math.log(se))
    else:
        with np.errstate(divide="ignore", over="ignore"):
            f2 = se * np.exp(_log_mills(z)) - c / denom
    return np.array([f1, f2], dtype=float)


def _step_manifold(params: MarketParams, p: float, level: float, y):
    """(c, v_c) on the indifference manifold indexed by y = (v_c - μ_c)/σ_v."""
    c = p - level * special.ndtr(y)
    v_c = params.tau * c + (1 - params.tau) * params.theta + params.sigma_v * y
    return c, v_c


def _solve_step_program(params: MarketParams, p: float, level: float, name: str,
                        spec: QuadratureSpec, n_scan: int) -> SolverReport:
    tau, sv = params.tau, params.sigma_v

    def reduced(y):
        y = np.asarray(y, dtype=float)
        c, v_c = _step_manifold(params, p, level, y)
        denom = 1.0 - tau * level * _phi(y) / sv
        z = (v_c - c) / params.sigma_eps
        return denom - c * np.exp(-_log_mills(z) - math.log(params.sigma_eps))

    candidates = [_step_manifold(params, p, level, y)
                  for y in scan_roots(reduced, -12.0, 12.0, n_scan, tol_abs=1e-15)]

    c0 = p - level / 2
    x0 = (c0, tau * c0 + (1 - tau) * params.theta)
    F = lambda x: _step_residual(params, p, level, x[0], x[1], scaled=True)
    try:
        first = solve_system(F, x0, tol=1e-13)
        if first.converged:
            candidates.append(tuple(first.solution))
    except (ConvergenceError, DomainError):
        pass  # the reduced scan covers a failed start

    best = None
    for c, v_c in candidates:
        try:
            polished = solve_system(F, (c, v_c), tol=1e-13, max_iter=20)
        except (ConvergenceError, DomainError):
            polished = None
        x = polished.solution if polished is not None and polished.converged else np.array([c, v_c])
        its = polished.iterations if polished is not None else 0
        res = _step_residual(params, p, level, x[0], x[1], scaled=True)
        norm = float(np.max(np.abs(res)))
        if not np.isfinite(norm):
            continue
        sched = Step(level, float(x[1]), price_cap=p)
        profit = expected_profit_quality(params, p, sched, float(x[0]), spec)
        key = (norm <= CONVERGED_TOL, profit)
        if best is None or key > best[0]:
            best = (key, x, norm, its, sched, profit)
    if best is None:
        return SolverReport(name, {"c": math.nan, "v_c": math.nan}, math.inf, 0, False, None,
                            math.nan, math.nan, {"r_M": level})
    _, x, norm, its, sched, profit = best
    return SolverReport(name, {"c": float(x[0]), "v_c": float(x[1])}, norm, its,
                        norm <= CONVERGED_TOL, sched, float(x[0]), profit,
                        {"r_M": level, "stationary_points": len(candidates)})


def solve_spread_constrained(params: MarketParams, p: float,
                             spec: QuadratureSpec = DEFAULT_QUADRATURE,
                             n_scan: int = 2000) -> SolverReport:
    """Best program whose reward spread respects √(2π)σ_εσ/σ_θ."""
    _require_uncertainty(params)
    r_m = min(p, spread_bound(params))
    return _solve_step_program(params, p, r_m, "spread_constrained", spec, n_scan)


def solve_relaxed_bound(params: MarketParams, p: float, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                        n_scan: int = 2000) -> tuple[SolverReport, float]:
    """Full-price step optimal under the indifference constraint alone;
    its profit Π₂ᴴ bounds every feasible program."""
    _require_uncertainty(params)
    report = _solve_step_program(params, p, p, "relaxed_bound", spec, n_scan)
    if not report.converged:
        return report, math.nan
    c, v_c = report.solution["c"], report.solution["v_c"]
    pi2 = p * quality_mass_of_buyers(params, c, v_c, math.inf, spec)
    report.extra["pi2"] = pi2
    return report, pi2


# ---------------------------------------------------------------------------
# Ramp program (rate-constrained optimum)
# ---------------------------------------------------------------------------


def ramp_expected_reward(params: MarketParams, p: float, v_lo: float, v_hi: float, mu):
    """Closed-form E[r̂(V)] for the ramp, V ~ N(mu, σ_v²)."""
    slope = p / (v_hi - v_lo)
    sv = params.sigma_v
    return slope * (lower_partial_expectation(v_hi, mu, sv) - lower_partial_expectation(v_lo, mu, sv))


def _ramp_residual(params: MarketParams, p: float, c: float, v_lo: float, v_hi: float,
                   spec: QuadratureSpec, scaled: bool) -> np.ndarray:
    """Residuals of the ramp system; ``scaled`` clears the denominators of
    the first-order condition."""
    tau, sv, sigma = params.tau, params.sigma_v, params.sigma
    mu_c = tau * c + (1 - tau) * params.theta
    zl, zh = (v_lo - mu_c) / sv, (v_hi - mu_c) / sv
    mass = special.ndtr(zh) - special.ndtr(zl)
    outside = special.ndtr(zl) + special.ndtr(-zh)
    psi_c = _phi((params.theta - c) / sigma) / sigma
    f3 = c + (sv / tau) * (zh * special.ndtr(zh) - zl * special.ndtr(zl) + _phi(zh) - _phi(zl)) - p
    f2 = v_hi - v_lo - tau * p
    num = quality_mass_of_buyers(params, c, v_lo, v_hi, spec) if v_hi > v_lo else 0.0
    if scaled:
        f1 = num * outside - c * psi_c * mass
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            f1 = num / mass - c * psi_c / outside
    return np.array([f1, f2, f3])


def _ramp_manifold(params: MarketParams, p: float, d):
    """(c, v_L) on the indifference manifold indexed by d = v_L - μ_c."""
    tau, sv = params.tau, params.sigma_v
    width = tau * p
    d = np.asarray(d, dtype=float)
    reward = (p / width) * (lower_partial_expectation(d + width, 0.0, sv)
                            - lower_partial_expectation(d, 0.0, sv))
    c = p - reward
    v_lo = tau * c + (1 - tau) * params.theta + d
    return c, v_lo


def solve_rate_constrained(params: MarketParams, p: float,
                           spec: QuadratureSpec = DEFAULT_QUADRATURE,
                           n_scan: int = 2000) -> SolverReport:
    """Best program with |dr̂/dv| <= 1/τ: a ramp of width τp."""
    _require_uncertainty(params)
    tau, sv = params.tau, params.sigma_v
    width = tau * p

    def reduced(d):
        out = []
        for c, v_lo in zip(*_ramp_manifold(params, p, np.atleast_1d(d))):
            out.append(_ramp_residual(params, p, c, v_lo, v_lo + width, spec, scaled=True)[0])
        return np.array(out)

    lo, hi = -width - 12.0 * sv, 12.0 * sv
    candidates = []
    for d in scan_roots(reduced, lo, hi, n_scan, tol_abs=1e-15):
        c, v_lo = _ramp_manifold(params, p, d)
        candidates.append((float(c), float(v_lo), float(v_lo) + width))

    F = lambda x: _ramp_residual(params, p, x[0], x[1], x[2], spec, scaled=True)
    x0 = (p / 2, params.theta - width / 2, params.theta + width / 2)
    try:
        first = solve_system(F, x0, tol=1e-13)
        if first.converged:
            candidates.append(tuple(first.solution))
    except (ConvergenceError, DomainError):
        pass  # the reduced scan covers a failed start

    best = None
    for cand in candidates:
        try:
            polished = solve_system(F, cand, tol=1e-13, max_iter=20)
        except (ConvergenceError, DomainError):
            polished = None
        x = polished.solution if polished is not None and polished.converged else np.array(cand)
        its = polished.iterations if polished is not None else 0
        # The width constraint is imposed exactly.
        x = np.array([x[0], x[1], x[1] + width])
        res = _ramp_residual(params, p, x[0], x[1], x[2], spec, scaled=True)
        norm = float(np.max(np.abs(res)))
        if not np.isfinite(norm):
            continue
        sched = SaturatedLinear(p, float(x[1]), float(x[2]))
        profit = expected_profit_quality(params, p, sched, float(x[0]), spec)
        key = (norm <= CONVERGED_TOL, profit)
        if best is None or key > best[0]:
            best = (key, x, norm, its, sched, profit)
    if best is None:
        return SolverReport("rate_constrained", {"c": math.nan, "v_L": math.nan, "v_H": math.nan},
                            math.inf, 0, False, None, math.nan, math.nan)
    _, x, norm, its, sched, profit = best
    return SolverReport("rate_constrained", {"c": float(x[0]), "v_L": float(x[1]), "v_H": float(x[2])},
                        norm, its, norm <= CONVERGED_TOL, sched, float(x[0]), profit,
                        {"stationary_points": len(candidates)})


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


def bound_pi1(params: MarketParams, p: float) -> float:
    """Profit cap when each buyer pays at most min(p, v_i)."""
    if p < 0:
        raise DomainError("price must be nonnegative")
    th, s = params.theta, params.sigma
    return (p * norm_cdf(th - p, 0.0, s)
            + th * (norm_cdf(th / s) - norm_cdf((th - p) / s))
            + s * (float(_phi(th / s)) - float(_phi((th - p) / s))))


def profit_bounds(params: MarketParams, p: float, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                  relaxed: tuple[SolverReport, float] | None = None) -> ProfitBounds:
    pi1 = bound_pi1(params, p)
    report, pi2 = relaxed if relaxed is not None else solve_relaxed_bound(params, p, spec)
    if not report.converged:
        raise ConvergenceError("relaxed-bound system did not converge", report.solution)
    return ProfitBounds(pi1, pi2, min(pi1, pi2))


def no_reward_reference(params: MarketParams, p: float) -> float:
    return no_reward_profit(params, p)
