"""
Gaussian numerics used throughout the package.

Every expectation in the model is an integral against a normal density,
usually of a factor that is only piecewise smooth (step and ramp rewards,
the sales-volume sigmoid Φ((v - c)/σ_ε)).  The integration helpers here
therefore take an explicit list of breakpoints and integrate segment by
segment, so a quadrature rule never straddles a kink.

Normal CDF/PDF/quantiles come from ``scipy.special`` (ndtr, log_ndtr,
ndtri), whose documented accuracy is close to machine precision.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy import optimize, special

from .errors import BracketError, ConvergenceError, DomainError, NumericError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise DomainError(f"standard deviation must be positive, got {sigma!r}")


def norm_pdf(x, mu=0.0, sigma=1.0):
    """Normal density with mean ``mu`` and standard deviation ``sigma``."""
    _check_sigma(sigma)
    z = (np.asarray(x, dtype=float) - mu) / sigma
    out = np.exp(-0.5 * z * z) / (SQRT_2PI * sigma)
    return float(out) if out.ndim == 0 else out


def norm_cdf(x, mu=0.0, sigma=1.0):
    """Normal CDF; absolute error is at the level of double rounding."""
    _check_sigma(sigma)
    out = special.ndtr((np.asarray(x, dtype=float) - mu) / sigma)
    return float(out) if out.ndim == 0 else out


def norm_logcdf(x, mu=0.0, sigma=1.0):
    _check_sigma(sigma)
    out = special.log_ndtr((np.asarray(x, dtype=float) - mu) / sigma)
    return float(out) if out.ndim == 0 else out


def norm_ppf(q):
    """Standard normal quantile.  ``q`` must lie strictly inside (0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise DomainError("quantile level must lie strictly between 0 and 1")
    out = special.ndtri(q)
    return float(out) if out.ndim == 0 else out


def mills_ratio(x):
    """Φ(x)/φ(x), evaluated in log space so it stays finite for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.exp(special.log_ndtr(x) + 0.5 * x * x + LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def lower_partial_expectation(a, mu, sigma):
    """E[(a - V)^+] for V ~ N(mu, sigma²).

    Closed form (a - mu)Φ(z) + sigma φ(z) with z = (a - mu)/sigma; a point
    mass is used when ``sigma == 0``.
    """
    a = np.asarray(a, dtype=float)
    if sigma == 0:
        out = np.maximum(a - mu, 0.0)
    else:
        z = (a - mu) / sigma
        out = (a - mu) * special.ndtr(z) + sigma * np.exp(-0.5 * z * z) / SQRT_2PI
        out = np.where(np.isneginf(a), 0.0, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

Rule = Literal["gauss_hermite_transformed", "adaptive_simpson"]


@dataclass(frozen=True)
class QuadratureSpec:
    """How Gaussian expectations are discretized.

    ``gauss_hermite_transformed`` uses Hermite nodes mapped to N(mu, sigma²)
    when the integrand is smooth over the whole line; once breakpoints or
    finite limits are involved each smooth piece of the window
    ``mu ± truncation_radius·sigma`` gets ``node_count`` Gauss-Legendre nodes.
    """

    rule: Rule = "gauss_hermite_transformed"
    node_count: int = 128
    truncation_radius: float = 10.0
    simpson_tol: float = 1e-13

    def __post_init__(self):
        if self.rule not in ("gauss_hermite_transformed", "adaptive_simpson"):
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        if self.node_count < 1:
            raise DomainError("node_count must be positive")
        if self.rule == "gauss_hermite_transformed" and self.node_count < 32:
            raise DomainError("gauss_hermite_transformed needs at least 32 nodes")
        if self.truncation_radius < 8:
            raise DomainError("truncation_radius must be at least 8 standard deviations")


DEFAULT_QUADRATURE = QuadratureSpec()


@lru_cache(maxsize=32)
def legendre_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def _hermite_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermgauss(n)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


def segment_edges(lo: float, hi: float, breakpoints: Iterable[float]) -> np.ndarray:
    """Sorted edges of the pieces of [lo, hi] cut at the interior breakpoints."""
    inner = [b for b in breakpoints if np.isfinite(b) and lo < b < hi]
    return np.unique(np.array([lo, *inner, hi], dtype=float))


def legendre_grid(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights covering consecutive segments."""
    x, w = legendre_nodes(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def _checked(f: Callable, nodes: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(nodes), dtype=float)
    if vals.shape != nodes.shape:
        vals = np.broadcast_to(vals, nodes.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        where = float(nodes[np.argmax(bad)])
        raise NumericError(f"integrand is not finite at v={where!r}", abscissa=where)
    return vals


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def check(x):
        val = float(f(x))
        if not math.isfinite(val):
            raise NumericError(f"integrand is not finite at v={x!r}", abscissa=x)
        return val

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = check(lm), check(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))

    fa, fb, fm = check(a), check(b), check(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)


def integrate(f: Callable, a: float, b: float, breakpoints: Iterable[float] = (),
              spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """∫_a^b f(x) dx over a finite interval, split at ``breakpoints``.

    ``f`` must accept a numpy array (vectorized) for the Gauss-Legendre
    rule; the Simpson rule calls it on scalars.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise DomainError("integrate() needs finite limits")
    if b <= a:
        return 0.0
    edges = segment_edges(a, b, breakpoints)
    if spec.rule == "adaptive_simpson":
        n_seg = len(edges) - 1
        return sum(_adaptive_simpson(f, lo, hi, spec.simpson_tol / n_seg)
                   for lo, hi in zip(edges[:-1], edges[1:]))
    nodes, weights = legendre_grid(edges, spec.node_count)
    return float(weights @ _checked(f, nodes))


def gauss_expect(f: Callable, mu: float, sigma: float,
                 spec: QuadratureSpec = DEFAULT_QUADRATURE,
                 breakpoints: Iterable[float] = (),
                 lower: float = -math.inf, upper: float = math.inf) -> float:
    """E[f(V) 1{lower <= V <= upper}] for V ~ N(mu, sigma²).

    The integration window is ``mu ± truncation_radius·sigma``; a zero
    ``sigma`` is treated as a point mass at ``mu``.
    """
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if sigma == 0:
        if lower <= mu <= upper:
            return float(_checked(f, np.array([float(mu)]))[0])
        return 0.0
    breakpoints = list(breakpoints)
    lo = max(mu - spec.truncation_radius * sigma, lower)
    hi = min(mu + spec.truncation_radius * sigma, upper)
    if hi <= lo:
        return 0.0
    smooth = (not any(lo < b < hi for b in breakpoints if np.isfinite(b))
              and math.isinf(lower) and math.isinf(upper))
    if spec.rule == "gauss_hermite_transformed" and smooth:
        z, w = _hermite_nodes(spec.node_count)
        return float(w @ _checked(f, mu + sigma * z))

    def weighted(v):
        d = (v - mu) / sigma
        return f(v) * np.exp(-0.5 * d * d) / (SQRT_2PI * sigma)

    return integrate(weighted, lo, hi, breakpoints, spec)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol_abs: float = 1e-13
    max_iter: int = 200

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tol_abs > 0:
            raise DomainError("tol_abs must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")


def find_root(g: Callable[[float], float], bracket: RootBracket) -> float:
    """Root of a continuous scalar function inside a sign-changing bracket.

    Brent's method (bisection safeguarding inverse quadratic / secant
    steps); iterates never leave the bracket.
    """
    lo, hi = float(bracket.lo), float(bracket.hi)
    glo, ghi = float(g(lo)), float(g(hi))
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if not (math.isfinite(glo) and math.isfinite(ghi)) or glo * ghi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: g={glo!r}, {ghi!r}", lo, hi)
    x, info = optimize.brentq(g, lo, hi, xtol=bracket.tol_abs, rtol=4 * np.finfo(float).eps,
                              maxiter=bracket.max_iter, full_output=True, disp=False)
    if not info.converged:
        raise ConvergenceError(f"root search stopped after {info.iterations} iterations", x)
    return float(x)


def scan_roots(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int = 2000,
               tol_abs: float = 1e-13) -> list[float]:
    """All sign changes of ``g`` on an n-point grid over [lo, hi], each refined.

    ``g`` is evaluated vectorized on the grid and as a scalar during
    refinement.  Non-finite grid values split the scan.
    """
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(g(xs), dtype=float)
    roots: list[float] = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            if not roots or roots[-1] != xs[i]:
                roots.append(float(xs[i]))
            continue
        if a * b < 0:
            roots.append(find_root(lambda x: float(g(np.array([x]))[0]),
                                   RootBracket(xs[i], xs[i + 1], tol_abs)))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


# ---------------------------------------------------------------------------
# Small nonlinear systems
# ---------------------------------------------------------------------------


@dataclass
class SystemReport:
    """Outcome of :func:`solve_system`."""

    solution: np.ndarray
    residual: np.ndarray
    residual_inf_norm: float
    iterations: int
    converged: bool
    history_length: int
    used_fallback: bool = False
    history: list[np.ndarray] = field(default_factory=list, repr=False)


def _jacobian(F, x, fx, rel_step=1e-7):
    n = x.size
    J = np.empty((fx.size, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fp, fm = np.asarray(F(xp), float), np.asarray(F(xm), float)
        if np.all(np.isfinite(fp)) and np.all(np.isfinite(fm)):
            J[:, j] = (fp - fm) / (2 * h)
        else:
            J[:, j] = (fp - fx) / h if np.all(np.isfinite(fp)) else (fx - fm) / h
    return J


def solve_system(F: Callable[[np.ndarray], Sequence[float]], x0: Sequence[float],
                 tol: float = 1e-10, max_iter: int = 60,
                 fallback: Callable[[np.ndarray], Sequence[float]] | None = None,
                 max_halvings: int = 30) -> SystemReport:
    """Damped Newton iteration with a central-difference Jacobian.

    The step is halved until the residual sup-norm decreases (at most
    ``max_halvings`` times).  When the Jacobian is singular or the line
    search stalls, ``fallback`` (a caller-supplied bracketed solve that
    exploits a monotone sub-structure) is tried from the current iterate;
    without one a singular Jacobian raises :class:`ConvergenceError`.
    """
    x = np.array(x0, dtype=float)
    if x.size not in (2, 3):
        raise DomainError("solve_system handles 2- or 3-dimensional systems")
    fx = np.asarray(F(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise NumericError("system is not finite at the starting point")
    history = [x.copy()]

    def report(x, fx, it, used_fallback=False):
        norm = float(np.max(np.abs(fx)))
        return SystemReport(x, fx, norm, it, norm <= tol, len(history), used_fallback, history)

    def try_fallback(x, it, why):
        if fallback is None:
            raise ConvergenceError(why, x)
        xf = np.array(fallback(x), dtype=float)
        history.append(xf.copy())
        return report(xf, np.asarray(F(xf), dtype=float), it, True)

    for it in range(max_iter + 1):
        norm = float(np.max(np.abs(fx)))
        if norm <= tol:
            return report(x, fx, it)
        if it == max_iter:
            break
        J = _jacobian(F, x, fx)
        try:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError("singular")
            step = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            return try_fallback(x, it, "singular Jacobian")
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = x + t * step
            ft = np.asarray(F(trial), dtype=float)
            if np.all(np.isfinite(ft)) and np.max(np.abs(ft)) < norm:
                break
            t *= 0.5
        else:
            if fallback is not None:
                return try_fallback(x, it, "line search stalled")
            return report(x, fx, it)
        x, fx = trial, ft
        history.append(x.copy())
    if fallback is not None:
        return try_fallback(x, max_iter, "iteration limit reached")
    return report(x, fx, max_iter)
