"""Profit of each program across allocations of a fixed total uncertainty.

The total spread σ is held fixed and σ_ε moves along a grid, with
σ_θ = sqrt(σ² - σ_ε²).  The price depends only on (θ, σ), so it is solved
once and shared by every row.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import DomainError, RebateError
from .intervals import IntervalSearchConfig, optimize_interval_refund
from .market import MarketParams, no_reward_profit, optimal_price
from .solvers import (
    profit_bounds,
    solve_rate_constrained,
    solve_relaxed_bound,
    solve_spread_constrained,
)

BASE_COLUMNS = ("sigma_eps", "sigma_theta", "p", "profit_no_reward", "profit_sc", "profit_rc",
                "pi1", "pi2", "pi_h")
JSON_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SweepRow:
    sigma_eps: float
    sigma_theta: float
    p: float
    profit_no_reward: float
    profit_sc: float
    profit_rc: float
    pi1: float
    pi2: float
    pi_h: float
    profit_interval: dict[int, float] = field(default_factory=dict)
    status: str = "ok"

    def columns(self) -> list[str]:
        return list(BASE_COLUMNS) + [f"profit_interval_{l}" for l in sorted(self.profit_interval)] + ["status"]

    def values(self) -> list:
        out = [getattr(self, name) for name in BASE_COLUMNS]
        out += [self.profit_interval[l] for l in sorted(self.profit_interval)]
        return out + [self.status]


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            if n == 1:
                return [float(start)]
            a, b = float(start), float(stop)
            return [round(a + (b - a) * k / (n - 1), 12) for k in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"bad grid {text!r}; use start:stop:count or a comma list") from exc


def sweep_row(theta: float, sigma_total: float, sigma_eps: float, p: float,
              intervals: Sequence[int] = (),
              interval_config: IntervalSearchConfig | None = None) -> SweepRow:
    params = MarketParams.from_total(theta, sigma_total, sigma_eps)
    base = no_reward_profit(params, p)
    nan = math.nan
    status = []
    try:
        sc = solve_spread_constrained(params, p)
        rc = solve_rate_constrained(params, p)
        relaxed = solve_relaxed_bound(params, p)
        bounds = profit_bounds(params, p, relaxed=relaxed)
    except RebateError as exc:
        return SweepRow(sigma_eps, params.sigma_theta, p, base, nan, nan, nan, nan, nan,
                        {l: nan for l in intervals}, f"error: {exc}")
    if not sc.converged:
        status.append("sc_not_converged")
    if not rc.converged:
        status.append("rc_not_converged")
    found = {}
    for l in intervals:
        try:
            found[l] = optimize_interval_refund(params, p, l, interval_config).expected_profit
        except RebateError:
            found[l] = nan
            status.append(f"interval_{l}_infeasible")
    return SweepRow(sigma_eps, params.sigma_theta, p, base, sc.expected_profit, rc.expected_profit,
                    bounds.pi1, bounds.pi2, bounds.pi_h, found, ";".join(status) or "ok")


def run_sweep(theta: float, sigma_total: float, grid: Sequence[float],
              intervals: Sequence[int] = (), workers: int = 1,
              interval_config: IntervalSearchConfig | None = None) -> list[SweepRow]:
    """One row per grid value, returned in grid order."""
    for s in grid:
        if not 0 < s < sigma_total:
            raise DomainError(f"sigma_eps={s} must lie strictly between 0 and sigma_total")
    p = optimal_price(MarketParams.from_total(theta, sigma_total, 0.0))
    args = [(theta, sigma_total, s, p, tuple(intervals), interval_config) for s in grid]
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(sweep_row, *zip(*args)))
    return [sweep_row(*a) for a in args]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        w.writerow(rows[0].columns())
    for r in rows:
        w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def _json_number(text: str):
    value = float(text)
    return value if math.isfinite(value) else None


def rows_to_json(rows: Sequence[SweepRow]) -> str:
    """Same 12-significant-digit values as the CSV; NaN becomes null."""
    out = []
    for r in rows:
        rec = {}
        for name, value in zip(r.columns(), r.values()):
            rec[name] = value if isinstance(value, str) else _json_number(_fmt(value))
        out.append(rec)
    return json.dumps({"schema": JSON_SCHEMA_VERSION, "rows": out}, indent=2) + "\n"
