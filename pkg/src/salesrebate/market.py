"""Market primitives: the uncertainty triple, posterior beliefs and the
no-reward benchmark."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special

from .errors import BracketError, ConvergenceError, DomainError
from .gaussian import LOG_SQRT_2PI, RootBracket, find_root, norm_cdf


@dataclass(frozen=True)
class MarketParams:
    """Prior mean quality ``theta`` and the two noise scales.

    Valuations are v_i = v + ε_i with v ~ N(theta, sigma_theta²) and
    ε_i ~ N(0, sigma_eps²).  Derived quantities are properties so they
    can never go stale.
    """

    theta: float
    sigma_eps: float
    sigma_theta: float

    def __post_init__(self):
        if self.sigma_eps < 0 or self.sigma_theta < 0:
            raise DomainError("standard deviations must be nonnegative")
        if not self.sigma_eps + self.sigma_theta > 0:
            raise DomainError("sigma_eps and sigma_theta cannot both be zero")
        if not all(map(math.isfinite, (self.theta, self.sigma_eps, self.sigma_theta))):
            raise DomainError("market parameters must be finite")

    @classmethod
    def from_total(cls, theta: float, sigma_total: float, sigma_eps: float) -> MarketParams:
        """Split a total valuation spread ``sigma_total`` so that σ_ε = ``sigma_eps``."""
        if not 0 <= sigma_eps <= sigma_total:
            raise DomainError("need 0 <= sigma_eps <= sigma_total")
        return cls(theta, sigma_eps, math.sqrt(max(sigma_total**2 - sigma_eps**2, 0.0)))

    @property
    def sigma(self) -> float:
        return math.hypot(self.sigma_eps, self.sigma_theta)

    @property
    def tau(self) -> float:
        """Weight σ_θ²/σ² a consumer puts on her own valuation."""
        return self.sigma_theta**2 / self.sigma**2

    @property
    def sigma_v(self) -> float:
        """Posterior standard deviation of quality, σ_ε σ_θ / σ."""
        return self.sigma_eps * self.sigma_theta / self.sigma

    def scaled(self, k: float) -> MarketParams:
        return MarketParams(k * self.theta, k * self.sigma_eps, k * self.sigma_theta)


@dataclass(frozen=True)
class Posterior:
    mean: float
    stddev: float


def posterior_mean(params: MarketParams, v_i):
    """τ v_i + (1 - τ) θ; works elementwise on arrays."""
    tau = params.tau
    return tau * v_i + (1.0 - tau) * params.theta


def posterior(params: MarketParams, v_i: float) -> Posterior:
    """Belief about quality held by a consumer with valuation ``v_i``."""
    return Posterior(float(posterior_mean(params, v_i)), params.sigma_v)


def no_reward_profit(params: MarketParams, p: float) -> float:
    """pΦ((θ - p)/σ), the expected profit at price ``p`` without rewards."""
    if p < 0:
        raise DomainError("price must be nonnegative")
    return p * norm_cdf(params.theta - p, 0.0, params.sigma)


def expected_sales_volume(params: MarketParams, cutoff: float) -> float:
    """Ex-ante expected fraction of buyers under a threshold ``cutoff``."""
    return norm_cdf(params.theta - cutoff, 0.0, params.sigma)


def _price_condition(params: MarketParams):
    theta, sigma = params.theta, params.sigma

    # p/σ = Φ(z)/φ(z) with z = (θ - p)/σ, compared in logs so that neither
    # side overflows when θ/σ is large; strictly increasing in p.
    def g(p):
        z = (theta - p) / sigma
        return math.log(p / sigma) - 0.5 * z * z - LOG_SQRT_2PI - float(special.log_ndtr(z))

    return g


def optimal_price(params: MarketParams) -> float:
    """Profit-maximizing price without rewards.

    Solves p/σ = Φ((θ-p)/σ)/φ((θ-p)/σ) (in log form).  The bracket starts at
    [tiny, θ + 6σ] and is widened geometrically if needed.
    """
    sigma = params.sigma
    g = _price_condition(params)
    lo = 1e-12 * sigma
    hi = max(params.theta, 0.0) + 6.0 * sigma
    for _ in range(60):
        if g(hi) > 0:
            break
        hi = 2.0 * hi + sigma
    else:
        raise ConvergenceError(f"price condition not bracketed on [{lo}, {hi}]", hi)
    if g(lo) > 0:
        raise BracketError("price condition positive at the lower end", lo, hi)
    return find_root(g, RootBracket(lo, hi, tol_abs=1e-14 * max(1.0, hi)))
