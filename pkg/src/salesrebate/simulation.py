"""
Finite-population Monte Carlo check of the continuum formulas.

Each quality draw gets its own counter-based stream: a Philox generator
keyed by ``SeedSequence(seed, spawn_key=(draw_index,))``.  Results are
therefore the same whether draws run in order, in chunks or in parallel,
and two schedules simulated with the same seed see the same qualities
(common random numbers).

Buyers are agents with v + ε_i > c.  Given v, their count is exactly
Binomial(n_agents, Φ((v - c)/σ_ε)), which is what the default
``"binomial"`` mode samples.  ``"per_agent"`` draws every ε_i explicitly
instead; it is slower and gives the same distribution.

The rebate is paid from the realized sales volume ā through the announced
volume-domain contract, so the quality → volume → reward chain is
exercised rather than reading r̂(v) directly.  When a schedule keeps
changing more than about 5σ_ε away from the cutoff, ā rounds to 0 or 1
for those qualities and the volume contract cannot tell them apart; the
``payout_domain="quality"`` option pays r̂(v) at the drawn quality
instead and isolates the continuum formulas from that limitation.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DomainError
from .market import MarketParams, posterior_mean
from .schedules import RewardSchedule

CLAMP_WIDTHS = 8.0


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 100_000
    n_quality_draws: int = 10_000
    seed: int = 20240611
    antithetic: bool = False
    mode: str = "binomial"
    keep_records: bool = False
    payout_domain: str = "volume"

    def __post_init__(self):
        if self.n_agents < 1 or self.n_quality_draws < 1:
            raise DomainError("n_agents and n_quality_draws must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.mode not in ("binomial", "per_agent"):
            raise DomainError(f"unknown simulation mode {self.mode!r}")
        if self.payout_domain not in ("volume", "quality"):
            raise DomainError(f"unknown payout domain {self.payout_domain!r}")
        if self.antithetic and self.n_quality_draws % 2:
            raise DomainError("antithetic sampling needs an even number of draws")


@dataclass(frozen=True)
class DrawRecord:
    draw_index: int
    v: float
    a_bar: float
    payout: float
    profit: float
    clamped: bool


@dataclass(frozen=True)
class SimResult:
    mean_profit: float
    profit_std_error: float
    mean_sales_volume: float
    n_clamped: int
    per_draw_records: list[DrawRecord] | None = field(default=None, compare=True)


def draw_generator(seed: int, draw_index: int) -> np.random.Generator:
    """Independent stream for one quality draw."""
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(draw_index,))))


def _draw_qualities(params: MarketParams, config: SimConfig) -> tuple[np.ndarray, list]:
    n = config.n_quality_draws
    gens = []
    z = np.empty(n)
    for j in range(n):
        if config.antithetic and j % 2:
            gens.append(draw_generator(config.seed, j))
            z[j] = -z[j - 1]
            continue
        g = draw_generator(config.seed, j)
        z[j] = g.standard_normal()
        gens.append(g)
    return params.theta + params.sigma_theta * z, gens


def _count_buyers(params: MarketParams, cutoff: float, v: float, g: np.random.Generator,
                  config: SimConfig) -> int:
    if config.mode == "binomial":
        q = float(special.ndtr((v - cutoff) / params.sigma_eps))
        return int(g.binomial(config.n_agents, q))
    eps = g.normal(0.0, params.sigma_eps, config.n_agents)
    return int(np.count_nonzero(v + eps > cutoff))


def volume_payout(schedule: RewardSchedule, params: MarketParams, cutoff: float,
                  a_bar) -> tuple[np.ndarray, np.ndarray]:
    """Announced reward at realized volumes ``a_bar`` (vectorized).

    Volumes of exactly 0 or 1 have no finite preimage; they are paid at
    quality c ∓ 8σ_ε and flagged.
    """
    a_bar = np.asarray(a_bar, dtype=float)
    clamped = (a_bar <= 0.0) | (a_bar >= 1.0)
    with np.errstate(divide="ignore"):
        z = special.ndtri(a_bar)
    z = np.clip(z, -CLAMP_WIDTHS, CLAMP_WIDTHS)
    return np.asarray(schedule.evaluate(cutoff + params.sigma_eps * z), dtype=float), clamped


def simulate(params: MarketParams, p: float, schedule: RewardSchedule, cutoff: float,
             config: SimConfig = SimConfig()) -> SimResult:
    """Mean firm profit (p - r(ā))ā over quality draws, with its standard error."""
    if params.sigma_eps <= 0:
        raise DomainError("simulation pays through sales volume and needs sigma_eps > 0")
    v, gens = _draw_qualities(params, config)
    counts = np.array([_count_buyers(params, cutoff, v[j], gens[j], config)
                       for j in range(config.n_quality_draws)])
    a_bar = counts / config.n_agents
    if config.payout_domain == "volume":
        payout, clamped = volume_payout(schedule, params, cutoff, a_bar)
    else:
        payout = np.asarray(schedule.evaluate(v), dtype=float)
        clamped = np.zeros(v.size, dtype=bool)
    profit = (p - payout) * a_bar
    if config.antithetic:
        units = profit.reshape(-1, 2).mean(axis=1)
    else:
        units = profit
    se = float(units.std(ddof=1) / math.sqrt(units.size)) if units.size > 1 else math.nan
    records = None
    if config.keep_records:
        records = [DrawRecord(j, float(v[j]), float(a_bar[j]), float(payout[j]),
                              float(profit[j]), bool(clamped[j])) for j in range(v.size)]
    return SimResult(float(profit.mean()), se, float(a_bar.mean()), int(clamped.sum()), records)


def write_records_csv(records: Iterable[DrawRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw_index", "v", "a_bar", "payout", "profit"])
        for r in records:
            w.writerow([r.draw_index, f"{r.v:.12g}", f"{r.a_bar:.12g}", f"{r.payout:.12g}",
                        f"{r.profit:.12g}"])


@dataclass(frozen=True)
class BestResponseCheck:
    """Largest sign error of the estimated adoption payoff relative to the
    threshold rule.  ``max_violation`` is 0 when every grid point agrees."""

    max_violation: float
    violating_valuation: float | None
    max_std_error: float
    valuations: np.ndarray = field(repr=False, compare=False)
    payoffs: np.ndarray = field(repr=False, compare=False)
    std_errors: np.ndarray = field(repr=False, compare=False)


def empirical_best_response_check(params: MarketParams, p: float, schedule: RewardSchedule,
                                  cutoff: float, config: SimConfig = SimConfig(),
                                  grid: np.ndarray | None = None) -> BestResponseCheck:
    """Estimate E[v_i + r̂(v) - p | v_i] by sampling the posterior on a
    valuation grid and compare its sign with the threshold rule."""
    if grid is None:
        grid = cutoff + params.sigma * np.linspace(-4.0, 4.0, 81)
        grid = grid[grid != cutoff]
    grid = np.asarray(grid, dtype=float)
    g = draw_generator(config.seed, 2**32)
    z = g.standard_normal(config.n_quality_draws)
    means = np.empty(grid.size)
    ses = np.empty(grid.size)
    for k, v_i in enumerate(grid):
        v = posterior_mean(params, v_i) + params.sigma_v * z
        u = v_i + np.asarray(schedule.evaluate(v), dtype=float) - p
        means[k] = u.mean()
        ses[k] = u.std(ddof=1) / math.sqrt(u.size)
    wrong = np.where(grid < cutoff, np.maximum(means, 0.0), np.maximum(-means, 0.0))
    k = int(np.argmax(wrong))
    worst = float(wrong[k])
    return BestResponseCheck(worst, float(grid[k]) if worst > 0 else None, float(ses.max()),
                             grid, means, ses)
