"""
Finite-dimensional search over "full-refund or nothing" programs.

The program refunds the whole price when realized quality falls in one of
``l`` closed intervals.  A candidate is feasible when the consumer payoff
g(v_i) = v_i + E_{v|v_i}[r̂(v)] - p is <= 0 below the cutoff and >= 0
above it, checked on a valuation grid.  The best feasible candidate found
is a lower bound on the value of the variational problem, not a
certificate of optimality.

Constraints can only bind for valuations in [0, p] (g < 0 below 0 and
g > 0 above p because 0 <= r̂ <= p), so the grid is dense there: its
spacing is a fraction of the posterior width σ_v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InfeasibleError
from .gaussian import DEFAULT_QUADRATURE, QuadratureSpec, RootBracket, find_root
from .market import MarketParams, no_reward_profit, posterior_mean
from .schedules import IntervalRefund
from .solvers import (
    SolverReport,
    quality_mass_of_buyers,
    solve_relaxed_bound,
    solve_spread_constrained,
)


@dataclass(frozen=True)
class IntervalSearchConfig:
    """Resolution of the interval search.

    Seeds come from a scan over interval centres (spacing
    ``centre_spacing`` σ_v, at most ``max_centres``) and ``width_count``
    geometric widths from σ_v/4 to 4σ, plus ``coarse_points`` right
    endpoints for an interval open to the left.  Coordinate cycling then
    runs at ``levels`` step sizes, each a tenth of the last, starting from
    min(``initial_step`` σ, σ_v).
    """

    grid_points: int = 400
    grid_radius: float = 8.0
    points_per_sigma_v: float = 8.0
    max_dense_points: int = 20000
    constraint_tol: float = 1e-7
    coarse_points: int = 25
    coarse_radius: float = 4.0
    centre_spacing: float = 0.5
    max_centres: int = 300
    width_count: int = 12
    initial_step: float = 0.125
    levels: int = 3
    beam: int = 3
    max_moves: int = 400

    def __post_init__(self):
        if self.grid_points < 400:
            raise DomainError("the constraint grid needs at least 400 points")
        if self.levels < 1 or self.coarse_points < 3:
            raise DomainError("need at least one refinement level and three coarse points")


@dataclass
class _Candidate:
    x: tuple[float, ...]
    open_left: bool
    feasible: bool
    profit: float
    cutoff: float
    violation: float
    residual: float

    def key(self):
        # Higher profit wins; ties break lexicographically on the endpoint vector.
        return (self.feasible, self.profit, tuple(-v for v in self.x))


class _Problem:
    def __init__(self, params: MarketParams, p: float, l: int, cfg: IntervalSearchConfig,
                 spec: QuadratureSpec):
        self.params, self.p, self.l, self.cfg, self.spec = params, p, l, cfg, spec
        sigma, theta = params.sigma, params.theta
        wide = np.linspace(theta - cfg.grid_radius * sigma, theta + cfg.grid_radius * sigma,
                           cfg.grid_points)
        n_dense = int(min(cfg.max_dense_points,
                          max(cfg.grid_points, cfg.points_per_sigma_v * p / params.sigma_v)))
        dense = np.linspace(0.0, p, n_dense)
        self.grid = np.unique(np.concatenate([wide, dense]))
        self.mu_grid = posterior_mean(params, self.grid)
        self.evaluations = 0
        self.cache: dict[tuple, _Candidate] = {}

    def intervals(self, x, open_left):
        pairs = []
        for j in range(self.l):
            a, b = x[2 * j], x[2 * j + 1]
            if j == 0 and open_left:
                a = -math.inf
            if b > a:
                pairs.append([a, b])
        pairs.sort()
        merged: list[list[float]] = []
        for a, b in pairs:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return tuple((a, b) for a, b in merged)

    def expected(self, ivs, mu):
        s = self.params.sigma_v
        total = np.zeros_like(mu)
        for a, b in ivs:
            total += special.ndtr((b - mu) / s) - special.ndtr((a - mu) / s)
        return self.p * total

    def evaluate(self, x, open_left) -> _Candidate:
        x = tuple(float(v) for v in x)
        key = (x, open_left)
        if key in self.cache:
            return self.cache[key]
        self.evaluations += 1
        p, params, tol = self.p, self.params, self.cfg.constraint_tol
        ivs = self.intervals(x, open_left)
        g = self.grid + self.expected(ivs, self.mu_grid) - p
        left_max = np.maximum.accumulate(g)
        right_min = np.minimum.accumulate(g[::-1])[::-1]
        # Split k puts the cutoff in [grid[k], grid[k+1]].
        left_viol = np.maximum(left_max[:-1] - tol, 0.0)
        right_viol = np.maximum(-right_min[1:] - tol, 0.0)
        viol = np.maximum(left_viol, right_viol)
        ok = np.flatnonzero((viol == 0) & (g[:-1] <= 0) & (g[1:] >= 0))
        if ok.size == 0:
            cand = _Candidate(x, open_left, False, -math.inf, math.nan, float(viol.min()), math.nan)
            self.cache[key] = cand
            return cand
        k = int(ok[0])
        lo, hi = self.grid[k], self.grid[k + 1]

        def gc(c):
            mu = posterior_mean(params, np.array([c]))
            return float(c + self.expected(ivs, mu)[0] - p)

        c = lo if gc(lo) == 0 else find_root(gc, RootBracket(lo, hi, 1e-14 * max(1.0, p)))
        paid_mass = sum(quality_mass_of_buyers(params, c, a, b, self.spec) for a, b in ivs)
        profit = p * (special.ndtr((params.theta - c) / params.sigma) - paid_mass)
        cand = _Candidate(x, open_left, True, float(profit), float(c), 0.0, gc(c))
        self.cache[key] = cand
        return cand

    def refine(self, cand: _Candidate, step: float) -> _Candidate:
        """Coordinate cycling: move one endpoint at a time while profit rises."""
        best = cand
        moves = 0
        n = len(best.x)
        improved = True
        while improved and moves < self.cfg.max_moves:
            improved = False
            for i in range(n):
                if best.open_left and i == 0:
                    continue
                for direction in (1.0, -1.0):
                    while moves < self.cfg.max_moves:
                        x = list(best.x)
                        x[i] += direction * step
                        trial = self.evaluate(x, best.open_left)
                        moves += 1
                        # Strict gains only: flat directions must not drift.
                        if trial.feasible and trial.profit > best.profit + 1e-15 * abs(best.profit):
                            best = trial
                            improved = True
                        else:
                            break
        return best

    def polish(self, cand: _Candidate) -> _Candidate:
        step = min(self.cfg.initial_step * self.params.sigma, self.params.sigma_v)
        for _ in range(self.cfg.levels):
            cand = self.refine(cand, step)
            step /= 10.0
        return cand


def _empty(params: MarketParams, l: int) -> tuple[float, ...]:
    return tuple(params.theta for _ in range(2 * l))


def optimize_interval_refund(params: MarketParams, p: float, l: int,
                             config: IntervalSearchConfig | None = None,
                             spec: QuadratureSpec = DEFAULT_QUADRATURE) -> SolverReport:
    """Best feasible refund program with at most ``l`` refund intervals.

    The empty program (no reward, cutoff p) is always feasible, so the
    result never falls below the no-reward profit.  The full-price steps
    of the spread-constrained and relaxed systems seed the search, so the
    result also dominates each of them whenever it is feasible.
    """
    if not 1 <= l <= 8:
        raise DomainError("l must be between 1 and 8")
    if params.sigma_eps <= 0 or params.sigma_theta <= 0:
        raise DomainError("interval search needs sigma_eps > 0 and sigma_theta > 0")
    cfg = config or IntervalSearchConfig()
    prob = _Problem(params, p, l, cfg, spec)
    theta, sigma, s_v = params.theta, params.sigma, params.sigma_v
    lo, hi = theta - cfg.coarse_radius * sigma, theta + cfg.coarse_radius * sigma
    n_centres = int(min(cfg.max_centres, max(cfg.coarse_points,
                                              (hi - lo) / (cfg.centre_spacing * s_v))))
    centres = np.linspace(lo, hi, n_centres)
    widths = np.geomspace(s_v / 4.0, 4.0 * sigma, cfg.width_count)
    right_ends = np.linspace(lo, hi, max(cfg.coarse_points, n_centres))
    base = _empty(params, l)

    seeds = [prob.evaluate(base, False)]
    # Full-price steps from the closed-form systems are open-left intervals.
    sc = solve_spread_constrained(params, p, spec)
    relaxed, _ = solve_relaxed_bound(params, p, spec)
    for step in (sc, relaxed):
        if step.converged and step.extra["r_M"] >= p:
            x = list(base)
            x[1] = step.solution["v_c"]
            seeds.append(prob.evaluate(x, True))

    def scan(template, j, open_left):
        out = []
        for m in centres:
            for w in widths:
                x = list(template)
                x[2 * j], x[2 * j + 1] = m - w / 2, m + w / 2
                out.append(prob.evaluate(x, open_left))
        return out

    first = scan(base, 0, False)
    for b in right_ends:
        x = list(base)
        x[1] = b
        first.append(prob.evaluate(x, True))
    beam = sorted(seeds + first, key=_Candidate.key, reverse=True)[: cfg.beam]
    beam = [prob.polish(c) for c in beam]

    # Remaining intervals, added greedily around the refined beam.
    for j in range(1, l):
        grown = list(beam)
        for cand in beam:
            grown += scan(cand.x, j, cand.open_left)
        beam = sorted(grown, key=_Candidate.key, reverse=True)[: cfg.beam]
        beam = [prob.polish(c) for c in beam]

    best = max(beam + seeds, key=_Candidate.key)
    if not best.feasible:
        raise InfeasibleError("no feasible refund program at this resolution", best.violation)
    ivs = prob.intervals(best.x, best.open_left)
    sched = IntervalRefund(p, ivs)
    solution = {"c": best.cutoff}
    for j, (a, b) in enumerate(ivs, start=1):
        solution[f"w_L{j}"] = a
        solution[f"w_H{j}"] = b
    return SolverReport(
        "interval_refund", solution, abs(best.residual), prob.evaluations, True, sched,
        best.cutoff, best.profit,
        {"l": l, "intervals_used": len(ivs), "lower_bound_approximation": True,
         "no_reward_profit": no_reward_profit(params, p)},
    )
