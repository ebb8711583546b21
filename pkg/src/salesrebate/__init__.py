"""Rebates paid as a function of sales volume, for a monopolist selling to
consumers who are uncertain about quality and differ in taste.

The package solves the threshold equilibrium among consumers for any
rebate schedule, computes the firm's expected profit, solves the
spread-constrained and rate-constrained programs and the profit upper
bounds, searches over "full refund or nothing" programs, and checks the
continuum formulas against a finite-population simulation.
"""

from .equilibrium import (
                          Equilibrium,
                          ProfitDecomposition,
                          cutoff_reward_condition,
                          expected_profit_quality,
                          expected_profit_valuation,
                          indifference,
                          indifference_volume_domain,
                          profitability_gap,
                          solve_cutoff,
                          solve_cutoffs,
                          solve_cutoffs_volume_domain,
)
from .errors import (
                          BracketError,
                          ConvergenceError,
                          DomainError,
                          InfeasibleError,
                          MultipleEquilibriaError,
                          NoEquilibriumError,
                          NumericError,
                          RebateError,
)
from .gaussian import QuadratureSpec, RootBracket, find_root, gauss_expect, solve_system
from .intervals import IntervalSearchConfig, optimize_interval_refund
from .market import (
                          MarketParams,
                          Posterior,
                          expected_sales_volume,
                          no_reward_profit,
                          optimal_price,
                          posterior,
                          posterior_mean,
)
from .schedules import (
                          Constant,
                          IntervalRefund,
                          RewardSchedule,
                          SaturatedLinear,
                          Step,
                          Tabulated,
                          check_rate_condition,
                          check_spread_condition,
                          evaluate,
                          expected_reward,
                          expected_reward_derivative,
                          schedule_from_json,
                          schedule_to_json,
                          spread_bound,
                          to_sales_volume_domain,
)
from .simulation import SimConfig, SimResult, empirical_best_response_check, simulate
from .solvers import (
                          ProfitBounds,
                          SolverReport,
                          bound_pi1,
                          profit_bounds,
                          solve_rate_constrained,
                          solve_relaxed_bound,
                          solve_spread_constrained,
)
from .sweep import SweepRow, run_sweep

__all__ = [
                          "BracketError",
                          "Constant",
                          "ConvergenceError",
                          "DomainError",
                          "Equilibrium",
                          "InfeasibleError",
                          "IntervalRefund",
                          "IntervalSearchConfig",
                          "MarketParams",
                          "MultipleEquilibriaError",
                          "NoEquilibriumError",
                          "NumericError",
                          "Posterior",
                          "ProfitBounds",
                          "ProfitDecomposition",
                          "QuadratureSpec",
                          "RebateError",
                          "RewardSchedule",
                          "RootBracket",
                          "SaturatedLinear",
                          "SimConfig",
                          "SimResult",
                          "SolverReport",
                          "Step",
                          "SweepRow",
                          "Tabulated",
                          "bound_pi1",
                          "check_rate_condition",
                          "check_spread_condition",
                          "cutoff_reward_condition",
                          "empirical_best_response_check",
                          "evaluate",
                          "expected_profit_quality",
                          "expected_profit_valuation",
                          "expected_reward",
                          "expected_reward_derivative",
                          "expected_sales_volume",
                          "find_root",
                          "gauss_expect",
                          "indifference",
                          "indifference_volume_domain",
                          "no_reward_profit",
                          "optimal_price",
                          "optimize_interval_refund",
                          "posterior",
                          "posterior_mean",
                          "profit_bounds",
                          "profitability_gap",
                          "run_sweep",
                          "schedule_from_json",
                          "schedule_to_json",
                          "simulate",
                          "solve_cutoff",
                          "solve_cutoffs",
                          "solve_cutoffs_volume_domain",
                          "solve_rate_constrained",
                          "solve_relaxed_bound",
                          "solve_spread_constrained",
                          "solve_system",
                          "spread_bound",
                          "to_sales_volume_domain",
]
__version__ = "0.1.0"
