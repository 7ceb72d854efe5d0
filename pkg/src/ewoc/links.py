"""Distribution primitives shared by the whole package.

Provides the three link families used as dose-toxicity links (logistic,
normal, skew-normal), Owen's T function for the skew-normal CDF, and Beta
distribution helpers for the priors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaincinv, betaln, log_ndtr, ndtr, ndtri

__all__ = [
    "Family",
    "LinkFunction",
    "BetaParams",
    "owen_t",
    "beta_log_pdf",
    "beta_quantile",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Family(str, enum.Enum):
    LOGISTIC = "logistic"
    NORMAL = "normal"
    SKEW_NORMAL = "skew_normal"


def owen_t(h: float, a: float) -> float:
    """Owen's T function T(h, a).

    Evaluated by adaptive quadrature of the defining integral
    T(h, a) = (1/2pi) * int_0^a exp(-h^2 (1+t^2)/2) / (1+t^2) dt,
    which keeps the implementation directly checkable against the
    classical identities T(h, 1) = Phi(h)(1 - Phi(h))/2 and
    T(-h, a) = T(h, a).
    """
    if a == 0.0:
        return 0.0
    h2 = 0.5 * h * h

    def integrand(t: float) -> float:
        one_plus = 1.0 + t * t
        return math.exp(-h2 * one_plus) / one_plus

    val, _ = integrate.quad(integrand, 0.0, a, epsabs=1e-14, epsrel=1e-13)
    return val / (2.0 * math.pi)


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_sigmoid(z):
    # log(1/(1+e^-z)) computed without overflow on either tail
    z = np.asarray(z, dtype=float)
    return -np.logaddexp(0.0, -z)


@dataclass(frozen=True)
class LinkFunction:
    """A named CDF family with location/scale (and shape for skew-normal)."""

    family: Family
    location: float = 0.0
    scale: float = 1.0
    shape: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0.0):
            raise ValueError(f"scale must be > 0, got {self.scale}")

    @staticmethod
    def logistic(location: float = 0.0, scale: float = 1.0) -> "LinkFunction":
        return LinkFunction(Family.LOGISTIC, location, scale)

    @staticmethod
    def normal(location: float = 0.0, scale: float = 1.0) -> "LinkFunction":
        return LinkFunction(Family.NORMAL, location, scale)

    @staticmethod
    def skew_normal(location: float = 0.0, scale: float = 1.0,
                    shape: float = 0.0) -> "LinkFunction":
        return LinkFunction(Family.SKEW_NORMAL, location, scale, shape)

    def _standardize(self, x):
        return (np.asarray(x, dtype=float) - self.location) / self.scale

    def cdf(self, x):
        """P(Z <= x); total function, accepts scalars or arrays."""
        z = self._standardize(x)
        if self.family is Family.LOGISTIC:
            res = _sigmoid(z)
        elif self.family is Family.NORMAL:
            res = ndtr(z)
        else:
            res = _skew_normal_cdf(z, self.shape)
        return float(res) if np.isscalar(x) or np.ndim(x) == 0 else res

    def log_cdf(self, x):
        z = self._standardize(x)
        if self.family is Family.LOGISTIC:
            res = _log_sigmoid(z)
        elif self.family is Family.NORMAL:
            res = log_ndtr(z)
        else:
            res = np.log(np.clip(_skew_normal_cdf(z, self.shape), 1e-300, None))
        return float(res) if np.isscalar(x) or np.ndim(x) == 0 else res

    def log_sf(self, x):
        """log P(Z > x), stable on the upper tail."""
        z = self._standardize(x)
        if self.family is Family.LOGISTIC:
            res = _log_sigmoid(-z)
        elif self.family is Family.NORMAL:
            res = log_ndtr(-z)
        else:
            res = np.log(np.clip(1.0 - _skew_normal_cdf(z, self.shape),
                                 1e-300, None))
        return float(res) if np.isscalar(x) or np.ndim(x) == 0 else res

    def pdf(self, x):
        z = self._standardize(x)
        phi = np.exp(-0.5 * np.asarray(z) ** 2) / _SQRT_2PI
        if self.family is Family.LOGISTIC:
            s = _sigmoid(z)
            res = s * (1.0 - s) / self.scale
        elif self.family is Family.NORMAL:
            res = phi / self.scale
        else:
            res = 2.0 * phi * ndtr(self.shape * np.asarray(z)) / self.scale
        return float(res) if np.isscalar(x) or np.ndim(x) == 0 else res

    def quantile(self, p: float) -> float:
        """Inverse CDF; closed forms where available, otherwise a bracketed
        bisection refined with Newton steps."""
        if not (0.0 < p < 1.0):
            raise ValueError(f"quantile requires p in (0, 1), got {p}")
        if self.family is Family.LOGISTIC:
            z = math.log(p / (1.0 - p))
        elif self.family is Family.NORMAL:
            z = float(ndtri(p))
        else:
            z = _skew_normal_quantile_std(p, self.shape)
        return self.location + self.scale * z


def _skew_normal_cdf(z, shape: float):
    z = np.asarray(z, dtype=float)
    if shape == 0.0:
        out = ndtr(z)
    elif z.ndim == 0:
        out = np.asarray(ndtr(z) - 2.0 * owen_t(float(z), shape))
    else:
        t = np.array([owen_t(float(zi), shape) for zi in z.ravel()])
        out = ndtr(z) - 2.0 * t.reshape(z.shape)
    return np.clip(out, 0.0, 1.0)


def _skew_normal_quantile_std(p: float, shape: float) -> float:
    # Bracket geometrically from 0, then bisect with Newton refinement.
    lo, hi = -1.0, 1.0
    while float(_skew_normal_cdf(np.asarray(lo), shape)) > p:
        lo *= 2.0
        if lo < -60.0:
            break
    while float(_skew_normal_cdf(np.asarray(hi), shape)) < p:
        hi *= 2.0
        if hi > 60.0:
            break
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        fm = float(_skew_normal_cdf(np.asarray(mid), shape)) - p
        if fm == 0.0:
            return mid
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
        # Newton polish once the bracket is tight; keep it inside the bracket.
        if hi - lo < 1e-6:
            x = 0.5 * (lo + hi)
            for _ in range(4):
                f = float(_skew_normal_cdf(np.asarray(x), shape)) - p
                d = 2.0 * math.exp(-0.5 * x * x) / _SQRT_2PI * float(ndtr(shape * x))
                if d <= 0.0:
                    break
                step = f / d
                x_new = x - step
                if not (lo <= x_new <= hi):
                    break
                x = x_new
                if abs(step) < 1e-14:
                    break
            return x
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class BetaParams:
    """Parameters of a Beta(a, b) distribution."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"Beta parameters must be > 0, got ({self.a}, {self.b})")


def beta_log_pdf(params: BetaParams, x):
    """Log density of Beta(a, b) at x in (0, 1); -inf outside the support."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    out[inside] = ((params.a - 1.0) * np.log(xi)
                   + (params.b - 1.0) * np.log1p(-xi)
                   - betaln(params.a, params.b))
    return float(out) if out.ndim == 0 else out


def beta_cdf(params: BetaParams, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return float(betainc(params.a, params.b, x))


def beta_quantile(params: BetaParams, q: float) -> float:
    """Inverse of the regularized incomplete beta CDF."""
    if not (0.0 < q < 1.0):
        raise ValueError(f"beta_quantile requires q in (0, 1), got {q}")
    return float(betaincinv(params.a, params.b, q))
