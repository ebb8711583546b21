"""Command-line front end.

Exit status: 0 on success, 2 for bad input, 3 when a solver fails to
converge or no equilibrium exists.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .equilibrium import solve_cutoff
from .errors import (
    ConvergenceError,
    DomainError,
    InfeasibleError,
    MultipleEquilibriaError,
    NoEquilibriumError,
)
from .intervals import optimize_interval_refund
from .market import MarketParams, no_reward_profit, optimal_price
from .schedules import schedule_from_json
from .simulation import SimConfig, simulate, write_records_csv
from .solvers import (
    CONVERGED_TOL,
    profit_bounds,
    solve_rate_constrained,
    solve_relaxed_bound,
    solve_spread_constrained,
)
from .sweep import parse_grid, rows_to_csv, rows_to_json, run_sweep

EXIT_OK, EXIT_INPUT, EXIT_NO_CONVERGENCE = 0, 2, 3


class NotConverged(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theta", type=float, default=5.0, help="prior mean quality")
    common.add_argument("--sigma-eps", type=float, default=0.6, help="taste dispersion")
    common.add_argument("--sigma-theta", type=float, default=0.8, help="quality dispersion")
    common.add_argument("--price", type=float, default=None,
                        help="posted price (default: the no-reward optimum)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    common.add_argument("--seed", type=int, default=SimConfig.seed)
    common.add_argument("--tol", type=float, default=CONVERGED_TOL,
                        help="largest residual accepted as converged")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="salesrebate",
                                     description="Sales-volume rebate programs under Gaussian uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("price", parents=[common], help="optimal price without rewards")

    cut = sub.add_parser("cutoff", parents=[common], help="equilibrium cutoff for a schedule file")
    cut.add_argument("--schedule", type=Path, required=True)

    solve = sub.add_parser("solve", parents=[common], help="solve a reward program")
    solve.add_argument("program", choices=("sc", "rc", "relaxed", "intervals"))
    solve.add_argument("--l", type=int, default=1, help="number of refund intervals")

    sub.add_parser("bounds", parents=[common], help="upper bounds on achievable profit")

    sim = sub.add_parser("simulate", parents=[common], help="finite-population Monte Carlo")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--schedule", type=Path)
    src.add_argument("--program", choices=("sc", "rc"))
    sim.add_argument("--n-agents", type=int, default=SimConfig.n_agents)
    sim.add_argument("--draws", type=int, default=SimConfig.n_quality_draws)
    sim.add_argument("--antithetic", action="store_true")
    sim.add_argument("--payout-domain", choices=("volume", "quality"), default="volume")
    sim.add_argument("--records", type=Path, default=None, help="per-draw CSV dump")

    sw = sub.add_parser("sweep", parents=[common], help="profits across allocations of total uncertainty")
    sw.add_argument("--sigma-total", type=float, default=1.0)
    sw.add_argument("--grid", default="0.05:0.95:19", help="start:stop:count or a comma list")
    sw.add_argument("--intervals", default="", help="comma list of interval counts l to optimize")
    sw.add_argument("--workers", type=int, default=1)
    return parser


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render(record: dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable({"schema": 1, **record}), indent=2) + "\n"
    flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(flat.keys())
    w.writerow([_fmt(v) for v in flat.values()])
    return buf.getvalue()


def _params(args) -> MarketParams:
    return MarketParams(args.theta, args.sigma_eps, args.sigma_theta)


def _price(args, params: MarketParams) -> float:
    if args.price is None:
        return optimal_price(params)
    if not args.price > 0:
        raise DomainError("--price must be positive")
    return args.price


def _load_schedule(path: Path):
    try:
        return schedule_from_json(path.read_text())
    except OSError as exc:
        raise DomainError(f"cannot read schedule file: {exc}") from exc
    except (AttributeError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DomainError(f"malformed schedule file {path}: {exc}") from exc


def _report_record(report, tol: float) -> dict[str, Any]:
    if not report.residual_inf_norm <= tol:
        raise NotConverged(f"{report.name}: residual {report.residual_inf_norm:.3g} exceeds {tol:g}")
    record = {"program": report.name, "converged": True, "residual_inf_norm": report.residual_inf_norm,
              "iterations": report.iterations, "cutoff": report.cutoff,
              "expected_profit": report.expected_profit}
    record.update({k: v for k, v in report.solution.items() if k != "c"})
    record["schedule"] = report.schedule.to_dict() if report.schedule is not None else None
    for key, value in report.extra.items():
        if isinstance(value, (int, float, bool, str)):
            record[key] = value
    return record


def _solve(program: str, params: MarketParams, p: float, args):
    if program == "sc":
        return solve_spread_constrained(params, p)
    if program == "rc":
        return solve_rate_constrained(params, p)
    if program == "relaxed":
        return solve_relaxed_bound(params, p)[0]
    return optimize_interval_refund(params, p, args.l)


def run(args) -> str:
    if args.command == "sweep":
        grid = parse_grid(args.grid)
        try:
            ls = [int(x) for x in args.intervals.split(",") if x.strip()]
        except ValueError as exc:
            raise DomainError(f"bad --intervals {args.intervals!r}") from exc
        rows = run_sweep(args.theta, args.sigma_total, grid, ls, args.workers)
        return rows_to_json(rows) if args.format == "json" else rows_to_csv(rows)

    params = _params(args)
    p = _price(args, params)
    if args.command == "price":
        return render({"p": p}, args.format)
    if args.command == "cutoff":
        eq = solve_cutoff(params, p, _load_schedule(args.schedule))
        return render({"p": p, "cutoff": eq.cutoff, "indifference_residual": eq.indifference_residual,
                       "expected_profit": eq.expected_profit, "reward_at_cutoff": eq.reward_at_cutoff,
                       "unique": eq.unique}, args.format)
    if args.command == "solve":
        record = {"p": p, **_report_record(_solve(args.program, params, p, args), args.tol)}
        return render(record, args.format)
    if args.command == "bounds":
        b = profit_bounds(params, p)
        return render({"p": p, "profit_no_reward": no_reward_profit(params, p), **b.to_dict()},
                      args.format)
    if args.command == "simulate":
        if args.schedule is not None:
            schedule = _load_schedule(args.schedule)
            eq = solve_cutoff(params, p, schedule)
            cutoff, expected = eq.cutoff, eq.expected_profit
        else:
            report = _solve(args.program, params, p, args)
            _report_record(report, args.tol)
            schedule, cutoff, expected = report.schedule, report.cutoff, report.expected_profit
        cfg = SimConfig(args.n_agents, args.draws, args.seed, args.antithetic,
                        keep_records=args.records is not None, payout_domain=args.payout_domain)
        res = simulate(params, p, schedule, cutoff, cfg)
        if args.records is not None:
            write_records_csv(res.per_draw_records, args.records)
        return render({"p": p, "cutoff": cutoff, "expected_profit": expected,
                       "mean_profit": res.mean_profit, "profit_std_error": res.profit_std_error,
                       "mean_sales_volume": res.mean_sales_volume, "n_clamped": res.n_clamped},
                      args.format)
    raise DomainError(f"unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = run(args)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NotConverged, ConvergenceError, NoEquilibriumError, MultipleEquilibriaError,
            InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
