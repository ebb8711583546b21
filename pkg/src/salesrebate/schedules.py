"""
Reward programs expressed as functions of realized quality.

A program announced on sales volume, r(ā), becomes r̂(v) = r(Φ((v - c)/σ_ε))
once consumers use the cutoff c.  Everything here works with r̂; the
sales-volume form is produced on demand by :func:`to_sales_volume_domain`.

Expectations are taken under the posterior v | v_i ~ N(μ_i, σ_v²) and are
vectorized over μ_i.  The four structured shapes have closed forms; a
:class:`Tabulated` schedule is integrated segment by segment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from scipy import special

from .errors import DomainError
from .gaussian import (
    DEFAULT_QUADRATURE,
    SQRT_2PI,
    QuadratureSpec,
    legendre_nodes,
    lower_partial_expectation,
    norm_ppf,
)
from .market import MarketParams, posterior_mean

_CAP_RTOL = 1e-12


def _phi(z):
    return np.exp(-0.5 * z * z) / SQRT_2PI


class RewardSchedule:
    """Common interface of the reward shapes.

    Subclasses are frozen dataclasses; ``expected`` and ``expected_score``
    return E[r̂(V)] and E[r̂(V)(V - μ)/s] for V ~ N(μ, s²), elementwise in μ.
    """

    kind: ClassVar[str]
    price_cap: float

    def evaluate(self, v):
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        raise NotImplementedError

    def reward_range(self) -> tuple[float, float]:
        """(r_min, r_max) over the whole real line."""
        raise NotImplementedError

    def max_slope(self) -> float:
        raise NotImplementedError

    def is_nonincreasing(self) -> bool:
        raise NotImplementedError

    def is_nondecreasing(self) -> bool:
        raise NotImplementedError

    def expected(self, mu, s, spec: QuadratureSpec = DEFAULT_QUADRATURE):
        raise NotImplementedError

    def expected_score(self, mu, s, spec: QuadratureSpec = DEFAULT_QUADRATURE):
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def _check_cap(self):
        r_min, r_max = self.reward_range()
        if r_min < 0:
            raise DomainError(f"{self.kind} schedule pays a negative reward")
        if r_max > self.price_cap * (1 + _CAP_RTOL):
            raise DomainError(f"{self.kind} schedule exceeds its price cap {self.price_cap}")

    def __call__(self, v):
        return self.evaluate(v)


def _resolve_cap(obj, default: float):
    if obj.price_cap is None:
        object.__setattr__(obj, "price_cap", float(default))


@dataclass(frozen=True)
class Constant(RewardSchedule):
    level: float
    price_cap: float | None = None
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        _resolve_cap(self, self.level)
        self._check_cap()

    def evaluate(self, v):
        return np.full_like(np.asarray(v, dtype=float), self.level) + 0.0

    def breakpoints(self):
        return ()

    def reward_range(self):
        return (self.level, self.level)

    def max_slope(self):
        return 0.0

    def is_nonincreasing(self):
        return True

    def is_nondecreasing(self):
        return True

    def expected(self, mu, s, spec=DEFAULT_QUADRATURE):
        return np.full_like(np.asarray(mu, dtype=float), self.level) + 0.0

    def expected_score(self, mu, s, spec=DEFAULT_QUADRATURE):
        return np.zeros_like(np.asarray(mu, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "level": self.level, "price_cap": self.price_cap}


@dataclass(frozen=True)
class Step(RewardSchedule):
    """Pays ``level`` when quality is at or below ``threshold``."""

    level: float
    threshold: float
    price_cap: float | None = None
    kind: ClassVar[str] = "step"

    def __post_init__(self):
        _resolve_cap(self, self.level)
        self._check_cap()

    def evaluate(self, v):
        return np.where(np.asarray(v, dtype=float) <= self.threshold, self.level, 0.0)

    def breakpoints(self):
        return (self.threshold,)

    def reward_range(self):
        return (0.0, self.level)

    def max_slope(self):
        return math.inf if self.level > 0 else 0.0

    def is_nonincreasing(self):
        return True

    def is_nondecreasing(self):
        return self.level == 0

    def expected(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.asarray(mu, dtype=float)
        if s == 0:
            return self.evaluate(mu)
        return self.level * special.ndtr((self.threshold - mu) / s)

    def expected_score(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.asarray(mu, dtype=float)
        return -self.level * _phi((self.threshold - mu) / s)

    def to_dict(self):
        return {"kind": self.kind, "level": self.level, "threshold": self.threshold,
                "price_cap": self.price_cap}


@dataclass(frozen=True)
class SaturatedLinear(RewardSchedule):
    """``p`` below ``v_lo``, linear down to 0 at ``v_hi``, 0 above."""

    p: float
    v_lo: float
    v_hi: float
    price_cap: float | None = None
    kind: ClassVar[str] = "saturated_linear"

    def __post_init__(self):
        if not self.v_lo < self.v_hi:
            raise DomainError("saturated linear schedule needs v_lo < v_hi")
        _resolve_cap(self, self.p)
        self._check_cap()

    @property
    def slope(self) -> float:
        return self.p / (self.v_hi - self.v_lo)

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        return np.clip(self.slope * (self.v_hi - v), 0.0, self.p)

    def breakpoints(self):
        return (self.v_lo, self.v_hi)

    def reward_range(self):
        return (0.0, self.p)

    def max_slope(self):
        return self.slope

    def is_nonincreasing(self):
        return True

    def is_nondecreasing(self):
        return self.p == 0

    def expected(self, mu, s, spec=DEFAULT_QUADRATURE):
        # r̂(v) = slope·[(v_hi - v)^+ - (v_lo - v)^+]
        mu = np.asarray(mu, dtype=float)
        return self.slope * (lower_partial_expectation(self.v_hi, mu, s)
                             - lower_partial_expectation(self.v_lo, mu, s))

    def expected_score(self, mu, s, spec=DEFAULT_QUADRATURE):
        # Gaussian integration by parts: E[r̂(V)(V-μ)/s] = s E[r̂'(V)].
        mu = np.asarray(mu, dtype=float)
        mass = special.ndtr((self.v_hi - mu) / s) - special.ndtr((self.v_lo - mu) / s)
        return -s * self.slope * mass

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "v_lo": self.v_lo, "v_hi": self.v_hi,
                "price_cap": self.price_cap}


@dataclass(frozen=True)
class IntervalRefund(RewardSchedule):
    """Full refund ``p`` when quality lies in one of the closed intervals.

    The first interval may start at -inf and the last may end at +inf.
    """

    p: float
    intervals: tuple[tuple[float, float], ...]
    price_cap: float | None = None
    kind: ClassVar[str] = "interval_refund"

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        prev = -math.inf
        for i, (a, b) in enumerate(ivs):
            if not a <= b:
                raise DomainError(f"interval {i} has w_L > w_H")
            if (i > 0 and not a > prev) or (math.isinf(a) and i > 0) or (a == math.inf):
                raise DomainError("refund intervals must be sorted and disjoint")
            if b == -math.inf or (math.isinf(b) and i != len(ivs) - 1):
                raise DomainError("only the last interval may be unbounded above")
            prev = b
        _resolve_cap(self, self.p)
        self._check_cap()

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        inside = np.zeros(v.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (v >= a) & (v <= b)
        return np.where(inside, self.p, 0.0)

    def breakpoints(self):
        return tuple(x for iv in self.intervals for x in iv if math.isfinite(x))

    def _covered(self) -> bool:
        return (len(self.intervals) == 1 and self.intervals[0][0] == -math.inf
                and self.intervals[0][1] == math.inf)

    def reward_range(self):
        if not self.intervals or self.p == 0:
            return (0.0, 0.0)
        if self._covered():
            return (self.p, self.p)
        return (0.0, self.p)

    def max_slope(self):
        lo, hi = self.reward_range()
        return math.inf if hi > lo else 0.0

    def is_nonincreasing(self):
        return (not self.intervals or self.p == 0
                or (len(self.intervals) == 1 and self.intervals[0][0] == -math.inf))

    def is_nondecreasing(self):
        return (not self.intervals or self.p == 0
                or (len(self.intervals) == 1 and self.intervals[0][1] == math.inf))

    def expected(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.asarray(mu, dtype=float)
        if s == 0:
            return self.evaluate(mu)
        total = np.zeros_like(mu)
        for a, b in self.intervals:
            total += special.ndtr((b - mu) / s) - special.ndtr((a - mu) / s)
        return self.p * total

    def expected_score(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.asarray(mu, dtype=float)
        total = np.zeros_like(mu)
        for a, b in self.intervals:
            if math.isfinite(a):
                total += _phi((a - mu) / s)
            if math.isfinite(b):
                total -= _phi((b - mu) / s)
        return self.p * total

    def to_dict(self):
        ivs = [[a if math.isfinite(a) else None, b if math.isfinite(b) else None]
               for a, b in self.intervals]
        return {"kind": self.kind, "p": self.p, "intervals": ivs, "price_cap": self.price_cap}


@dataclass(frozen=True)
class Tabulated(RewardSchedule):
    """Piecewise-linear interpolation of ``values`` at sorted ``breakpoints``;
    constant beyond the first and last breakpoint."""

    knots: tuple[float, ...]
    values: tuple[float, ...]
    price_cap: float | None = None
    kind: ClassVar[str] = "tabulated"
    _b: np.ndarray = field(init=False, repr=False, compare=False)
    _y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.shape != y.shape or b.size < 1:
            raise DomainError("tabulated schedule needs matching 1-D breakpoints and values")
        if np.any(np.diff(b) <= 0):
            raise DomainError("tabulated breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(y))):
            raise DomainError("tabulated schedule must be finite")
        object.__setattr__(self, "knots", tuple(b.tolist()))
        object.__setattr__(self, "values", tuple(y.tolist()))
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_y", y)
        _resolve_cap(self, float(y.max()))
        self._check_cap()

    def evaluate(self, v):
        out = np.interp(np.asarray(v, dtype=float), self._b, self._y)
        return out

    def breakpoints(self):
        return self.knots

    def reward_range(self):
        # Extrema of a piecewise-linear function sit at its knots.
        return (float(self._y.min()), float(self._y.max()))

    def max_slope(self):
        if self._b.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self._y) / np.diff(self._b))))

    def is_nonincreasing(self):
        return bool(np.all(np.diff(self._y) <= 0))

    def is_nondecreasing(self):
        return bool(np.all(np.diff(self._y) >= 0))

    def _segments(self, mu, s, spec, score: bool):
        """Gauss-Legendre over each knot interval, clipped to μ ± R s."""
        x, w = legendre_nodes(spec.node_count)
        radius = spec.truncation_radius * s
        total = np.zeros_like(mu)
        b, y = self._b, self._y
        for k in range(b.size - 1):
            lo = np.maximum(b[k], mu - radius)
            hi = np.minimum(b[k + 1], mu + radius)
            ok = hi > lo
            if not ok.any():
                continue
            lo_, hi_, mu_ = lo[ok, None], hi[ok, None], mu[ok, None]
            half = 0.5 * (hi_ - lo_)
            v = 0.5 * (hi_ + lo_) + half * x
            z = (v - mu_) / s
            r = y[k] + (y[k + 1] - y[k]) * (v - b[k]) / (b[k + 1] - b[k])
            f = r * _phi(z) / s
            if score:
                f = f * z
            total[ok] += (half * f) @ w
        return total

    def expected(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if s == 0:
            return self.evaluate(mu)
        b, y = self._b, self._y
        tails = (y[0] * special.ndtr((b[0] - mu) / s)
                 + y[-1] * special.ndtr((mu - b[-1]) / s))
        return tails + self._segments(mu, s, spec, score=False)

    def expected_score(self, mu, s, spec=DEFAULT_QUADRATURE):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        b, y = self._b, self._y
        tails = -y[0] * _phi((b[0] - mu) / s) + y[-1] * _phi((b[-1] - mu) / s)
        return tails + self._segments(mu, s, spec, score=True)

    def to_dict(self):
        return {"kind": self.kind, "breakpoints": list(self.knots), "values": list(self.values),
                "price_cap": self.price_cap}


ZERO_REWARD = Constant(0.0)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def evaluate(schedule: RewardSchedule, v):
    out = schedule.evaluate(v)
    return float(out) if np.ndim(out) == 0 else out


def to_sales_volume_domain(schedule: RewardSchedule, params: MarketParams, cutoff: float,
                           a_bar: float) -> float:
    """Reward announced for ex-post sales volume ``a_bar`` under cutoff ``cutoff``.

    Inverts ā = Φ((v - c)/σ_ε) and evaluates r̂ at the implied quality.
    """
    if params.sigma_eps <= 0:
        raise DomainError("the sales-volume map needs sigma_eps > 0")
    if not 0.0 < a_bar < 1.0:
        raise DomainError("sales volume must lie strictly between 0 and 1")
    return evaluate(schedule, cutoff + params.sigma_eps * norm_ppf(a_bar))


def expected_reward(schedule: RewardSchedule, params: MarketParams, v_i,
                    spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """E_{v|v_i}[r̂(v)], the reward a consumer with valuation ``v_i`` expects."""
    out = schedule.expected(posterior_mean(params, np.asarray(v_i, dtype=float)),
                            params.sigma_v, spec)
    return float(out[0]) if np.ndim(v_i) == 0 and np.ndim(out) else (
        float(out) if np.ndim(out) == 0 else out)


def expected_reward_derivative(schedule: RewardSchedule, params: MarketParams, v_i,
                               spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """∂/∂v_i E_{v|v_i}[r̂(v)] = (τ/σ_v) E_{v|v_i}[r̂(v)(v - μ_i)/σ_v]."""
    s = params.sigma_v
    if s == 0:
        raise DomainError("derivative needs a nondegenerate posterior (sigma_v > 0)")
    mu = posterior_mean(params, np.asarray(v_i, dtype=float))
    out = params.tau / s * schedule.expected_score(mu, s, spec)
    return float(out[0]) if np.ndim(v_i) == 0 and np.ndim(out) else (
        float(out) if np.ndim(out) == 0 else out)


@dataclass(frozen=True)
class SpreadCertificate:
    holds: bool
    lhs: float
    rhs: float
    vacuous: bool = False


@dataclass(frozen=True)
class RateCertificate:
    holds: bool
    max_slope: float
    bound: float
    vacuous: bool = False


def spread_bound(params: MarketParams) -> float:
    """Largest reward spread √(2π) σ_ε σ / σ_θ that keeps payoffs monotone."""
    if params.sigma_theta == 0:
        return math.inf
    return SQRT_2PI * params.sigma_eps * params.sigma / params.sigma_theta


def check_spread_condition(schedule: RewardSchedule, params: MarketParams) -> SpreadCertificate:
    r_min, r_max = schedule.reward_range()
    lhs = r_max - r_min
    if params.sigma_theta == 0:
        return SpreadCertificate(True, lhs, math.inf, vacuous=True)
    rhs = spread_bound(params)
    return SpreadCertificate(lhs <= rhs * (1 + _CAP_RTOL), lhs, rhs)


def check_rate_condition(schedule: RewardSchedule, params: MarketParams) -> RateCertificate:
    slope = schedule.max_slope()
    if params.tau == 0:
        return RateCertificate(True, slope, math.inf, vacuous=True)
    bound = 1.0 / params.tau
    return RateCertificate(slope <= bound * (1 + _CAP_RTOL), slope, bound)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _inf_or(x, sign):
    return sign * math.inf if x is None else float(x)


def schedule_from_dict(data: dict[str, Any]) -> RewardSchedule:
    """Inverse of ``RewardSchedule.to_dict``; ``null`` interval ends mean ±inf."""
    kind = data.get("kind")
    cap = data.get("price_cap")
    try:
        if kind == "constant":
            return Constant(float(data["level"]), cap)
        if kind == "step":
            return Step(float(data["level"]), float(data["threshold"]), cap)
        if kind == "saturated_linear":
            return SaturatedLinear(float(data["p"]), float(data["v_lo"]), float(data["v_hi"]), cap)
        if kind == "interval_refund":
            ivs = tuple((_inf_or(a, -1), _inf_or(b, 1)) for a, b in data["intervals"])
            return IntervalRefund(float(data["p"]), ivs, cap)
        if kind == "tabulated":
            return Tabulated(tuple(data["breakpoints"]), tuple(data["values"]), cap)
    except KeyError as exc:
        raise DomainError(f"{kind} schedule is missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown schedule kind {kind!r}")


def schedule_to_json(schedule: RewardSchedule, **kwargs) -> str:
    return json.dumps(schedule.to_dict(), **kwargs)


def schedule_from_json(text: str) -> RewardSchedule:
    return schedule_from_dict(json.loads(text))
