"""Posterior computation for (rho0, gamma) by two interchangeable backends.

The default backend integrates the unnormalized posterior on a tensor-product
midpoint grid over the unit square, which makes every downstream quantity
deterministic and cheap to regression-test.  A random-walk Metropolis backend
is kept as an independent cross-check.

The slope constraint beta1 > 0 forces rho0 < theta, so the integration and
sampling domain for rho0 is (0, theta); the Beta prior on rho0 is truncated
accordingly (the truncation constant cancels in the normalization).
"""

from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ModelConfig, ToxicityRecord, log_likelihood, log_prior

__all__ = [
    "BackendKind",
    "BackendSpec",
    "PosteriorSummary",
    "PosteriorUnderflowError",
    "posterior_summary",
]

_LOG_UNDERFLOW = math.log(1e-300)


class BackendKind(str, enum.Enum):
    QUADRATURE = "quadrature"
    METROPOLIS = "metropolis"


@dataclass(frozen=True)
class BackendSpec:
    kind: BackendKind = BackendKind.QUADRATURE
    resolution: int = 401          # quadrature grid is resolution x resolution
    draws: int = 100_000           # Metropolis retained draws
    burn_in: int = 10_000

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        if self.draws < 1 or self.burn_in < 0:
            raise ValueError("draws must be >= 1 and burn_in >= 0")


class PosteriorUnderflowError(ValueError):
    """Total posterior mass underflowed; the configuration is pathological."""


@dataclass(frozen=True)
class PosteriorSummary:
    gamma_quantiles: dict[float, float]
    gamma_mean: float
    gamma_median: float
    rho0_mean: float
    normalization: float
    backend: BackendKind
    diagnostics: dict = field(default_factory=dict, compare=False)


class _QuadratureWorkspace:
    """Precomputed grids for one (model config, resolution) pair, with a
    bounded cache of cumulative log-likelihood grids keyed by record prefix."""

    _MAX_PREFIXES = 48

    def __init__(self, cfg: ModelConfig, resolution: int):
        self.cfg = cfg
        self.n = n = resolution
        mids = (np.arange(n) + 0.5) / n
        self.rho0 = cfg.theta * mids              # restricted support (0, theta)
        self.gamma = cfg.x_min + cfg.width * mids
        self.gamma_edges = cfg.x_min + cfg.width * np.arange(n + 1) / n
        self.cell_area = (cfg.theta / n) * (cfg.width / n)
        self.log_prior = log_prior(self.rho0[:, None], self.gamma[None, :], cfg)
        f_inv = cfg.working_link.quantile
        q_theta = f_inv(cfg.theta)
        q_rho = np.array([f_inv(r) for r in self.rho0])
        denom = self.gamma[None, :] - cfg.x_min
        self.beta1 = (q_theta - q_rho[:, None]) / denom
        self.beta0 = (self.gamma[None, :] * q_rho[:, None] - cfg.x_min * q_theta) / denom
        self._terms: dict[tuple[float, int], np.ndarray] = {}
        self._prefixes: OrderedDict[tuple, np.ndarray] = OrderedDict()
        self._summaries: OrderedDict[tuple, "PosteriorSummary"] = OrderedDict()

    def _term(self, rec: ToxicityRecord) -> np.ndarray:
        key = (rec.dose, rec.dlt)
        cached = self._terms.get(key)
        if cached is None:
            z = self.beta0 + self.beta1 * rec.dose
            link = self.cfg.working_link
            cached = link.log_cdf(z) if rec.dlt else link.log_sf(z)
            if len(self._terms) > 256:
                self._terms.clear()
            self._terms[key] = cached
        return cached

    def log_lik(self, data: tuple[ToxicityRecord, ...]) -> np.ndarray:
        if not data:
            return np.zeros((self.n, self.n))
        cached = self._prefixes.get(data)
        if cached is not None:
            self._prefixes.move_to_end(data)
            return cached
        prev = self._prefixes.get(data[:-1])
        if prev is not None:
            out = prev + self._term(data[-1])
        else:
            out = np.zeros((self.n, self.n))
            for rec in data:
                out = out + self._term(rec)
        self._prefixes[data] = out
        while len(self._prefixes) > self._MAX_PREFIXES:
            self._prefixes.popitem(last=False)
        return out


_workspaces: OrderedDict[tuple, _QuadratureWorkspace] = OrderedDict()


def _workspace(cfg: ModelConfig, resolution: int) -> _QuadratureWorkspace:
    key = (cfg, resolution)
    ws = _workspaces.get(key)
    if ws is None:
        ws = _QuadratureWorkspace(cfg, resolution)
        _workspaces[key] = ws
        while len(_workspaces) > 8:
            _workspaces.popitem(last=False)
    return ws


def posterior_summary(data: Sequence[ToxicityRecord], cfg: ModelConfig,
                      backend: BackendSpec,
                      probs: Sequence[float],
                      rng: np.random.Generator | None = None) -> PosteriorSummary:
    """Marginal summaries of the gamma (MTD) posterior given the data."""
    probs = tuple(probs)
    for p in probs:
        if not (0.0 < p < 1.0):
            raise ValueError(f"quantile probabilities must be in (0, 1), got {p}")
    data = tuple(data)
    if backend.kind is BackendKind.QUADRATURE:
        return _quadrature_summary(data, cfg, backend, probs)
    return _metropolis_summary(data, cfg, backend, probs, rng)


def _quadrature_summary(data, cfg, backend, probs) -> PosteriorSummary:
    ws = _workspace(cfg, backend.resolution)
    memo_key = (data, probs)
    memo = ws._summaries.get(memo_key)
    if memo is not None:
        ws._summaries.move_to_end(memo_key)
        return memo
    log_post = ws.log_lik(data) + ws.log_prior
    m = float(np.max(log_post))
    if not np.isfinite(m):
        raise PosteriorUnderflowError("posterior is identically zero on the grid")
    w = np.exp(log_post - m)
    total = float(w.sum())
    log_mass = m + math.log(total) + math.log(ws.cell_area)
    if log_mass < _LOG_UNDERFLOW:
        raise PosteriorUnderflowError(
            f"posterior mass ~exp({log_mass:.1f}) underflows before normalization")
    gamma_mass = w.sum(axis=0) / total
    rho0_mass = w.sum(axis=1) / total
    cdf = np.concatenate(([0.0], np.cumsum(gamma_mass)))
    cdf[-1] = 1.0
    quantiles = {p: float(np.interp(p, cdf, ws.gamma_edges)) for p in probs}
    summary = PosteriorSummary(
        gamma_quantiles=quantiles,
        gamma_mean=float(np.dot(gamma_mass, ws.gamma)),
        gamma_median=float(np.interp(0.5, cdf, ws.gamma_edges)),
        rho0_mean=float(np.dot(rho0_mass, ws.rho0)),
        normalization=math.exp(log_mass) if log_mass < 700 else math.inf,
        backend=BackendKind.QUADRATURE,
        diagnostics={
            "resolution": ws.n,
            "log_normalization": log_mass,
            "dose_edges": ws.gamma_edges,
            "cdf_edges": cdf,
            "gamma_density": gamma_mass * ws.n / cfg.width,
            "gamma_grid": ws.gamma,
        },
    )
    ws._summaries[memo_key] = summary
    while len(ws._summaries) > 64:
        ws._summaries.popitem(last=False)
    return summary


def _logit(p):
    return math.log(p / (1.0 - p))


def _expit(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _metropolis_summary(data, cfg, backend, probs, rng) -> PosteriorSummary:
    if rng is None:
        rng = np.random.default_rng(0)

    def log_target(z1: float, z2: float) -> float:
        s1, s2 = _expit(z1), _expit(z2)
        rho0 = cfg.theta * s1
        gamma = cfg.x_min + cfg.width * s2
        ll = log_likelihood(rho0, gamma, data, cfg)
        lp = log_prior(rho0, gamma, cfg)
        if not np.isfinite(lp):
            return -math.inf
        jac = (math.log(cfg.theta * s1 * (1.0 - s1))
               + math.log(cfg.width * s2 * (1.0 - s2)))
        return ll + lp + jac

    z = np.zeros(2)
    lt = log_target(z[0], z[1])
    step = 1.0
    accepted_window = 0
    window = 50
    for i in range(backend.burn_in):
        prop = z + step * rng.standard_normal(2)
        lt_prop = log_target(prop[0], prop[1])
        if math.log(rng.random()) < lt_prop - lt:
            z, lt = prop, lt_prop
            accepted_window += 1
        if (i + 1) % window == 0:
            rate = accepted_window / window
            step *= math.exp(rate - 0.3)
            step = min(max(step, 1e-3), 10.0)
            accepted_window = 0

    gammas = np.empty(backend.draws)
    rho0s = np.empty(backend.draws)
    accepted = 0
    for i in range(backend.draws):
        prop = z + step * rng.standard_normal(2)
        lt_prop = log_target(prop[0], prop[1])
        if math.log(rng.random()) < lt_prop - lt:
            z, lt = prop, lt_prop
            accepted += 1
        rho0s[i] = cfg.theta * _expit(z[0])
        gammas[i] = cfg.x_min + cfg.width * _expit(z[1])
    rate = accepted / backend.draws
    quantiles = {p: float(np.quantile(gammas, p)) for p in probs}
    return PosteriorSummary(
        gamma_quantiles=quantiles,
        gamma_mean=float(gammas.mean()),
        gamma_median=float(np.quantile(gammas, 0.5)),
        rho0_mean=float(rho0s.mean()),
        normalization=math.nan,
        backend=BackendKind.METROPOLIS,
        diagnostics={
            "chain_length": backend.draws,
            "burn_in": backend.burn_in,
            "acceptance_rate": rate,
            "step_size": step,
            "acceptance_warning": not (0.1 <= rate <= 0.6),
        },
    )
