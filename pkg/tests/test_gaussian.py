from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salesrebate.errors import BracketError, ConvergenceError, DomainError, NumericError
from salesrebate.gaussian import (
    QuadratureSpec,
    RootBracket,
    find_root,
    gauss_expect,
    integrate,
    lower_partial_expectation,
    mills_ratio,
    norm_cdf,
    norm_pdf,
    scan_roots,
    solve_system,
)

mpmath.mp.dps = 40


def mp_pdf(x, mu, s):
    return float(mpmath.npdf(x, mu, s))


def mp_cdf(x, mu, s):
    return float(mpmath.ncdf(x, mu, s))


class TestDensity:
    def test_standard_mode(self):
        assert norm_pdf(0.0, 0.0, 1.0) == pytest.approx(0.3989422804014327, abs=1e-16)

    def test_mode_scales_inverse_sigma(self):
        assert norm_pdf(1.0, 1.0, 2.0) == pytest.approx(0.19947114020071635, abs=1e-16)

    def test_against_high_precision(self):
        assert norm_pdf(3.91, 5.0, 1.0) == pytest.approx(mp_pdf(3.91, 5, 1), rel=1e-14)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_rejects_nonpositive_sigma(self, sigma):
        with pytest.raises(DomainError):
            norm_pdf(0.0, 0.0, sigma)
        with pytest.raises(DomainError):
            norm_cdf(0.0, 0.0, sigma)

    def test_vectorized(self):
        out = norm_pdf(np.array([-1.0, 0.0, 1.0]))
        assert out.shape == (3,)
        assert out[0] == out[2]


class TestCdf:
    def test_half_at_mean(self):
        assert norm_cdf(0.0) == 0.5

    def test_reference_value(self):
        assert norm_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-15)

    @given(st.floats(-30, 30), st.floats(0.01, 100), st.floats(0, 12))
    def test_reflection(self, mu, sigma, k):
        # Forming mu ± kσ rounds; that shifts z by up to ~eps·|mu|/σ.
        tol = 1e-15 + 1e-15 * abs(mu) / sigma
        assert norm_cdf(mu + k * sigma, mu, sigma) + norm_cdf(mu - k * sigma, mu, sigma) == pytest.approx(1.0, abs=tol)

    @given(st.floats(-37, 8))
    @settings(max_examples=200)
    def test_matches_high_precision(self, x):
        assert abs(norm_cdf(x) - mp_cdf(x, 0, 1)) <= 1e-14 * max(1.0, 0) + 1e-16

    def test_nondecreasing(self):
        vals = norm_cdf(np.linspace(-40, 40, 20001), 0.3, 1.7)
        assert np.all(np.diff(vals) >= 0)


class TestHelpers:
    @given(st.floats(-20, 20))
    def test_mills_ratio(self, x):
        ref = float(mpmath.ncdf(x) / mpmath.npdf(x))
        assert mills_ratio(x) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.1, 3))
    def test_lower_partial_expectation(self, a, mu, sigma):
        pts = sorted({mu - 40 * sigma, min(mu, a), a})
        ref = float(mpmath.quad(lambda v: (a - v) * mpmath.npdf(v, mu, sigma), pts)) if a > mu - 40 * sigma else 0.0
        assert lower_partial_expectation(a, mu, sigma) == pytest.approx(ref, abs=1e-12)

    def test_lower_partial_expectation_point_mass(self):
        assert lower_partial_expectation(2.0, 1.5, 0.0) == 0.5
        assert lower_partial_expectation(1.0, 1.5, 0.0) == 0.0


class TestQuadratureSpec:
    def test_defaults(self):
        spec = QuadratureSpec()
        assert spec.rule == "gauss_hermite_transformed"
        assert spec.node_count == 128
        assert spec.truncation_radius == 10

    def test_too_few_hermite_nodes(self):
        with pytest.raises(DomainError):
            QuadratureSpec(node_count=16)

    def test_small_radius(self):
        with pytest.raises(DomainError):
            QuadratureSpec(truncation_radius=6)

    def test_unknown_rule(self):
        with pytest.raises(DomainError):
            QuadratureSpec(rule="trapezoid")


class TestGaussExpect:
    def test_normalization(self):
        assert gauss_expect(lambda v: np.ones_like(v), 0.3, 2.0) == pytest.approx(1.0, abs=1e-12)

    def test_mean(self):
        assert gauss_expect(lambda v: v, 2.0, 3.0) == pytest.approx(2.0, rel=1e-12)

    def test_indicator(self):
        mu, s = 1.0, 0.7
        v0 = mu + s
        got = gauss_expect(lambda v: (v <= v0).astype(float), mu, s, breakpoints=[v0])
        assert got == pytest.approx(norm_cdf(1.0), abs=1e-12)

    def test_indicators_random(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            mu, s, v0 = rng.uniform(-5, 5), rng.uniform(0.05, 4), rng.uniform(-8, 8)
            got = gauss_expect(lambda v: (v <= v0).astype(float), mu, s, breakpoints=[v0])
            assert got == pytest.approx(norm_cdf(v0, mu, s), abs=1e-10)

    @given(st.floats(-3, 3), st.floats(0.2, 3), st.floats(-2, 2), st.floats(0.1, 3))
    def test_piecewise_linear_closed_form(self, mu, s, a, width):
        # E[(b - V) clipped to [0, width]] has a closed form in partial expectations.
        b = a + width
        f = lambda v: np.clip(b - v, 0.0, width)
        ref = lower_partial_expectation(b, mu, s) - lower_partial_expectation(a, mu, s)
        got = gauss_expect(f, mu, s, breakpoints=[a, b])
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-14)

    def test_simpson_rule_agrees(self):
        spec = QuadratureSpec(rule="adaptive_simpson")
        got = gauss_expect(lambda v: np.sin(v) ** 2, 0.5, 1.2, spec)
        ref = gauss_expect(lambda v: np.sin(v) ** 2, 0.5, 1.2)
        assert got == pytest.approx(ref, abs=1e-9)

    def test_point_mass(self):
        assert gauss_expect(lambda v: v**2, 3.0, 0.0) == 9.0

    def test_truncated_window(self):
        got = gauss_expect(lambda v: np.ones_like(v), 0.0, 1.0, lower=0.0)
        assert got == pytest.approx(0.5, abs=1e-13)

    def test_non_finite_integrand_reports_abscissa(self):
        with pytest.raises(NumericError) as info:
            gauss_expect(lambda v: np.where(v > 1.0, np.nan, 0.0), 0.0, 1.0)
        assert info.value.abscissa > 1.0

    def test_integrate_polynomial(self):
        assert integrate(lambda x: x**3, 0.0, 2.0, breakpoints=[0.5, 1.0]) == pytest.approx(4.0, rel=1e-14)


class TestFindRoot:
    def test_linear(self):
        assert find_root(lambda x: x - 1.0, RootBracket(0.0, 2.0)) == pytest.approx(1.0, abs=1e-13)

    def test_cdf_symmetry(self):
        assert find_root(lambda x: norm_cdf(x) - 0.5, RootBracket(-3.0, 3.0)) == pytest.approx(0.0, abs=1e-13)

    def test_price_condition(self):
        root = find_root(lambda x: x - mills_ratio(5.0 - x), RootBracket(0.1, 5.0))
        assert root == pytest.approx(3.91, abs=0.005)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x * x + 1.0, RootBracket(-1.0, 1.0))

    def test_iteration_limit(self):
        with pytest.raises(ConvergenceError):
            # A sign function forces bisection, which needs ~50 halvings here.
            find_root(lambda x: math.copysign(1.0, x - 0.123456789),
                      RootBracket(0.0, 1.0, tol_abs=1e-15, max_iter=3))

    def test_invalid_bracket(self):
        with pytest.raises(DomainError):
            RootBracket(1.0, 0.0)
        with pytest.raises(DomainError):
            RootBracket(0.0, 1.0, tol_abs=0.0)

    @given(st.floats(-10, 10), st.floats(0.1, 5))
    def test_never_leaves_bracket(self, r, half):
        lo, hi = r - half, r + 2 * half
        x = find_root(lambda x: math.tanh(x - r), RootBracket(lo, hi))
        assert lo <= x <= hi
        assert abs(math.tanh(x - r)) <= 1e-12

    def test_scan_finds_all_roots(self):
        roots = scan_roots(lambda x: np.sin(x), 0.5, 10.0, 500)
        assert roots == pytest.approx([math.pi, 2 * math.pi, 3 * math.pi], abs=1e-12)


class TestSolveSystem:
    def test_linear(self):
        rep = solve_system(lambda x: (x[0] - 1.0, x[1] - 2.0), (0.0, 0.0))
        assert rep.converged
        assert rep.solution == pytest.approx([1.0, 2.0], abs=1e-10)
        assert rep.history_length >= 2

    def test_gradient_of_quadratic(self):
        rep = solve_system(lambda x: (x[0], x[1]), (3.0, -4.0))
        assert rep.converged
        assert np.max(np.abs(rep.solution)) <= 1e-10

    def test_three_dimensional(self):
        F = lambda x: (x[0] ** 2 - 4.0, x[1] - x[0], np.exp(x[2]) - 1.0)
        rep = solve_system(F, (1.0, 0.0, 1.0))
        assert rep.converged
        assert rep.solution == pytest.approx([2.0, 2.0, 0.0], abs=1e-9)

    def test_damping_rescues_bad_start(self):
        rep = solve_system(lambda x: (np.arctan(x[0]), x[1] - 1.0), (5.0, 0.0))
        assert rep.converged

    def test_singular_without_fallback(self):
        with pytest.raises(ConvergenceError):
            solve_system(lambda x: (x[0] + x[1] - 1.0, 2 * x[0] + 2 * x[1] - 2.5), (0.0, 0.0))

    def test_singular_uses_fallback(self):
        F = lambda x: (x[0] ** 3, x[1] - 1.0)
        rep = solve_system(F, (0.0, 0.0), fallback=lambda x: (0.0, 1.0))
        assert rep.used_fallback
        assert rep.converged

    def test_dimension_checked(self):
        with pytest.raises(DomainError):
            solve_system(lambda x: (x[0],), (0.0,))

    def test_iteration_cap_reports_unconverged(self):
        rep = solve_system(lambda x: (np.arctan(x[0]) - 1.5, x[1]), (0.0, 1.0), max_iter=1)
        assert not rep.converged
        assert rep.residual_inf_norm > 1e-10
