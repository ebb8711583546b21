"""Random instances shared by several test modules."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from salesrebate import (
    Constant,
    IntervalRefund,
    MarketParams,
    SaturatedLinear,
    Step,
    Tabulated,
    optimal_price,
    spread_bound,
)


def random_params(rng: np.random.Generator, lo: float = 0.1, hi: float = 2.0) -> MarketParams:
    return MarketParams(rng.uniform(1.0, 8.0), rng.uniform(lo, hi), rng.uniform(lo, hi))


def random_schedule(rng: np.random.Generator, params: MarketParams, p: float):
    """Any of the five shapes, placed where the valuation mass is."""
    th, s = params.theta, params.sigma
    kind = rng.integers(5)
    if kind == 0:
        return Constant(rng.uniform(0, p), price_cap=p)
    if kind == 1:
        return Step(rng.uniform(0, p), rng.uniform(th - 2 * s, th + 2 * s), price_cap=p)
    if kind == 2:
        a = rng.uniform(th - 3 * s, th + s)
        return SaturatedLinear(p, a, a + rng.uniform(0.05, 3) * s)
    if kind == 3:
        edges = np.sort(rng.uniform(th - 3 * s, th + 3 * s, 2 * rng.integers(1, 4)))
        ivs = [(edges[i], edges[i + 1]) for i in range(0, edges.size, 2)]
        if rng.random() < 0.3:
            ivs[0] = (-np.inf, ivs[0][1])
        return IntervalRefund(p, tuple(ivs))
    k = int(rng.integers(2, 8))
    knots = np.sort(rng.uniform(th - 3 * s, th + 3 * s, k))
    return Tabulated(tuple(knots), tuple(rng.uniform(0, p, k)), price_cap=p)


def random_nondecreasing(rng: np.random.Generator, params: MarketParams, p: float) -> Tabulated:
    """Nonconstant nondecreasing Tabulated schedule within the spread bound."""
    th, s = params.theta, params.sigma
    k = int(rng.integers(2, 7))
    knots = np.sort(rng.uniform(th - 3 * s, th + 3 * s, k))
    while np.any(np.diff(knots) <= 1e-6):
        knots = np.sort(rng.uniform(th - 3 * s, th + 3 * s, k))
    steps = rng.uniform(0.0, 1.0, k - 1)
    steps[rng.integers(k - 1)] += 0.05
    shape = np.concatenate([[0.0], np.cumsum(steps)])
    spread = min(p, spread_bound(params)) * rng.uniform(0.05, 1.0)
    values = shape / shape[-1] * spread
    values += rng.uniform(0.0, p - spread)
    return Tabulated(tuple(knots), tuple(np.minimum(values, p)), price_cap=p)


@st.composite
def params_strategy(draw, lo: float = 0.1, hi: float = 2.0):
    return MarketParams(draw(st.floats(1.0, 8.0)), draw(st.floats(lo, hi)), draw(st.floats(lo, hi)))


@st.composite
def instance_strategy(draw):
    """(params, price, schedule) built from a hypothesis-drawn seed."""
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    params = random_params(rng)
    p = optimal_price(params)
    return params, p, random_schedule(rng, params, p)
