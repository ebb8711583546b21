from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import split
from helpers import (
    instance_strategy,
    random_nondecreasing,
    random_params,
    random_schedule,
)
from hypothesis import given, settings

from salesrebate.equilibrium import (
    cutoff_reward_condition,
    expected_profit_quality,
    expected_profit_valuation,
    indifference,
    indifference_volume_domain,
    profitability_gap,
    reward_at,
    solve_cutoff,
    solve_cutoffs,
    solve_cutoffs_volume_domain,
    uniqueness_guaranteed,
)
from salesrebate.errors import MultipleEquilibriaError, NoEquilibriumError
from salesrebate.gaussian import norm_cdf
from salesrebate.market import (
    MarketParams,
    no_reward_profit,
    optimal_price,
    posterior_mean,
)
from salesrebate.schedules import (
    ZERO_REWARD,
    Constant,
    SaturatedLinear,
    Step,
    Tabulated,
    check_spread_condition,
)
from salesrebate.solvers import solve_spread_constrained


class TestSolveCutoff:
    def test_zero_reward(self, figure_params, figure_price):
        eq = solve_cutoff(figure_params, figure_price, ZERO_REWARD)
        assert eq.cutoff == pytest.approx(figure_price, abs=1e-12)
        assert eq.reward_at_cutoff == 0.0

    @pytest.mark.parametrize("k", [0.5, 1.5, 3.0])
    def test_constant(self, figure_params, figure_price, k):
        eq = solve_cutoff(figure_params, figure_price, Constant(k, price_cap=figure_price))
        assert eq.cutoff == pytest.approx(figure_price - k, abs=1e-12)

    def test_step_against_grid_scan(self):
        params = split(0.9)
        p = optimal_price(params)
        sched = solve_spread_constrained(params, p).schedule
        eq = solve_cutoff(params, p, sched)
        # Locate the sign change of g on a 1e-4 grid; the root is inside that cell.
        grid = np.arange(p - sched.level - 1e-4, p + 1e-4, 1e-4)
        g = indifference(params, p, sched, grid)
        cells = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
        assert cells.size == 1
        assert grid[cells[0]] - 1e-12 <= eq.cutoff <= grid[cells[0] + 1] + 1e-12
        mu_c = posterior_mean(params, eq.cutoff)
        rhs = eq.cutoff + sched.level * norm_cdf((sched.threshold - mu_c) / params.sigma_v)
        assert rhs == pytest.approx(p, abs=1e-9)

    @given(instance_strategy())
    @settings(max_examples=60, deadline=None)
    def test_equilibrium_identity(self, inst):
        params, p, sched = inst
        try:
            eq = solve_cutoff(params, p, sched)
        except MultipleEquilibriaError:
            return
        assert abs(eq.cutoff + eq.reward_at_cutoff - p) <= 1e-9
        assert abs(eq.indifference_residual) <= 1e-9

    def test_cutoffs_lie_in_bracket(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            params = random_params(rng)
            p = optimal_price(params)
            sched = random_schedule(rng, params, p)
            r_lo, r_hi = sched.reward_range()
            for c in solve_cutoffs(params, p, sched):
                assert p - r_hi - 1e-8 <= c <= p - r_lo + 1e-8

    def test_tall_early_step_has_three_cutoffs(self, figure_params, figure_price):
        sched = Step(figure_price, 3.0, price_cap=figure_price)
        assert not uniqueness_guaranteed(figure_params, sched)
        roots = solve_cutoffs(figure_params, figure_price, sched)
        assert len(roots) == 3
        for c in roots:
            assert abs(float(indifference(figure_params, figure_price, sched, c))) <= 1e-9
        with pytest.raises(MultipleEquilibriaError) as info:
            solve_cutoff(figure_params, figure_price, sched)
        assert info.value.cutoffs == pytest.approx(roots)

    def test_certified_schedule_reported_unique(self, figure_params, figure_price):
        sched = SaturatedLinear(figure_price, 3.0, 3.0 + figure_params.tau * figure_price)
        assert solve_cutoff(figure_params, figure_price, sched).unique

    def test_nonpositive_price(self, figure_params):
        with pytest.raises(NoEquilibriumError):
            solve_cutoff(figure_params, 0.0, ZERO_REWARD)


class TestVolumeDomainUniqueness:
    def test_agrees_with_quality_domain_at_announcement(self, figure_params, figure_price):
        sched = Step(2.0, 4.0, price_cap=figure_price)
        for c0 in (1.0, 2.5, 3.5):
            assert float(indifference_volume_domain(figure_params, figure_price, sched, c0, c0)) == \
                pytest.approx(float(indifference(figure_params, figure_price, sched, c0)), abs=1e-15)

    def test_nonincreasing_schedules_have_one_sign_change(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            params = random_params(rng)
            p = optimal_price(params)
            k = int(rng.integers(1, 6))
            knots = np.sort(rng.uniform(params.theta - 3 * params.sigma, params.theta + 3 * params.sigma, k + 1))
            values = np.sort(rng.uniform(0, p, k + 1))[::-1]
            sched = Tabulated(tuple(knots), tuple(values), price_cap=p) if k > 1 else Step(values[0], knots[0], price_cap=p)
            c0 = rng.uniform(0.0, p)
            grid = np.linspace(-5 * params.sigma_v, p, 2001)
            g = indifference_volume_domain(params, p, sched, c0, grid)
            assert np.count_nonzero(np.diff(np.sign(g)) != 0) == 1
            assert len(solve_cutoffs_volume_domain(params, p, sched, c0)) == 1

    def test_tall_early_step_is_unique_when_announced_in_volume(self, figure_params, figure_price):
        sched = Step(figure_price, 3.0, price_cap=figure_price)
        for c0 in solve_cutoffs(figure_params, figure_price, sched):
            roots = solve_cutoffs_volume_domain(figure_params, figure_price, sched, c0)
            assert roots == pytest.approx([c0], abs=1e-9)


class TestProfitRoutes:
    def test_zero_reward_collapses_to_no_reward_profit(self, figure_params, figure_price):
        got = expected_profit_quality(figure_params, figure_price, ZERO_REWARD, figure_price)
        assert got == pytest.approx(no_reward_profit(figure_params, figure_price), abs=1e-12)

    def test_full_refund_everywhere(self, figure_params, figure_price):
        assert expected_profit_quality(figure_params, figure_price, Constant(figure_price, price_cap=figure_price), 0.3) == 0.0

    def test_zero_reward_decomposition(self, figure_params):
        c = 3.2
        dec = expected_profit_valuation(figure_params, 3.2, ZERO_REWARD, c)
        assert dec.baseline_at_cutoff == pytest.approx(c * norm_cdf((5.0 - c) / 1.0), abs=1e-14)
        assert dec.discrimination_surplus == 0.0

    def test_constant_has_no_surplus(self, figure_params, figure_price):
        dec = expected_profit_valuation(figure_params, figure_price, Constant(1.2, price_cap=figure_price), figure_price - 1.2)
        assert dec.discrimination_surplus == pytest.approx(0.0, abs=1e-14)

    def test_spread_constrained_step_routes_agree(self):
        params = split(0.9)
        p = optimal_price(params)
        rep = solve_spread_constrained(params, p)
        total = expected_profit_valuation(params, p, rep.schedule, rep.cutoff).total
        assert total == pytest.approx(expected_profit_quality(params, p, rep.schedule, rep.cutoff), abs=1e-8)

    def test_route_agreement_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            params = random_params(rng)
            p = optimal_price(params)
            sched = random_schedule(rng, params, p)
            c = rng.uniform(p - sched.reward_range()[1], p)
            quality = expected_profit_quality(params, p, sched, c)
            dec = expected_profit_valuation(params, p, sched, c)
            assert dec.total == pytest.approx(quality, abs=1e-8)
            assert dec.baseline_at_cutoff + dec.discrimination_surplus == pytest.approx(dec.total, abs=1e-12)

    def test_known_quality(self):
        params = MarketParams(5.0, 0.5, 0.0)
        got = expected_profit_quality(params, 4.0, Step(1.0, 6.0, price_cap=4.0), 4.5)
        assert got == pytest.approx(3.0 * norm_cdf(0.5 / 0.5), abs=1e-14)


class TestCutoffRewardCondition:
    def test_constant_fails_with_equality(self, figure_params, figure_price):
        chk = cutoff_reward_condition(figure_params, figure_price, Constant(1.0, price_cap=figure_price), figure_price - 1.0)
        assert not chk.holds
        assert chk.reward_at_cutoff == pytest.approx(chk.mean_reward_per_purchase, abs=1e-13)

    def test_nondecreasing_fails_strictly(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            params = random_params(rng)
            p = optimal_price(params)
            sched = random_nondecreasing(rng, params, p)
            eq = solve_cutoff(params, p, sched)
            chk = cutoff_reward_condition(params, p, sched, eq.cutoff)
            assert not chk.holds
            assert chk.reward_at_cutoff < chk.mean_reward_per_purchase

    def test_spread_constrained_step_holds(self):
        params = split(0.9)
        p = optimal_price(params)
        rep = solve_spread_constrained(params, p)
        assert cutoff_reward_condition(params, p, rep.schedule, rep.cutoff).holds

    def test_sign_matches_gain_over_cutoff_baseline(self):
        rng = np.random.default_rng(29)
        seen = {True: 0, False: 0}
        for _ in range(150):
            params = random_params(rng)
            p = optimal_price(params)
            sched = random_schedule(rng, params, p)
            try:
                eq = solve_cutoff(params, p, sched)
            except MultipleEquilibriaError:
                continue
            chk = cutoff_reward_condition(params, p, sched, eq.cutoff)
            gain = eq.expected_profit - eq.cutoff * norm_cdf((params.theta - eq.cutoff) / params.sigma)
            diff = chk.reward_at_cutoff - chk.mean_reward_per_purchase
            if abs(diff) < 1e-7:
                continue
            assert (gain > 0) == (diff > 0)
            seen[diff > 0] += 1
        assert seen[True] > 5 and seen[False] > 5


class TestProfitabilityGap:
    def test_zero_reward(self, figure_params, figure_price):
        assert profitability_gap(figure_params, figure_price, ZERO_REWARD) == pytest.approx(0.0, abs=1e-12)

    def test_certified_increasing_never_profitable(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            params = random_params(rng)
            p = optimal_price(params)
            sched = random_nondecreasing(rng, params, p)
            assert check_spread_condition(sched, params).holds
            assert profitability_gap(params, p, sched) <= 1e-9

    @pytest.mark.parametrize("sigma_eps", [0.85, 0.9, 0.95])
    def test_spread_constrained_step_profitable(self, sigma_eps):
        params = split(sigma_eps)
        p = optimal_price(params)
        assert profitability_gap(params, p, solve_spread_constrained(params, p).schedule) > 0


def test_reward_at_matches_schedule_expectation(figure_params):
    sched = Step(2.0, 4.5)
    v = np.array([3.0, 4.0])
    want = 2.0 * norm_cdf((4.5 - posterior_mean(figure_params, v)) / figure_params.sigma_v)
    assert reward_at(figure_params, sched, v) == pytest.approx(want, abs=1e-15)
    assert math.isfinite(float(reward_at(figure_params, sched, 100.0)))
