"""The EWOC dose-toxicity model.

The model places a working link F on P(DLT | dose x) = F(b0 + b1 x) and
reparameterizes (b0, b1) into the clinically meaningful pair (rho0, gamma):
rho0 is the DLT probability at the minimum dose and gamma is the MTD, the
dose where the DLT probability equals the target rate theta.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .links import BetaParams, Family, LinkFunction, beta_log_pdf

__all__ = [
    "ModelConfig",
    "ToxicityRecord",
    "FeasibilityKind",
    "FeasibilitySchedule",
    "SchemeKind",
    "Rounding",
    "DoseScheme",
    "betas_from",
    "gamma_from",
    "log_likelihood",
    "log_prior",
    "feasibility_alpha",
    "apply_dose_policy",
]


@dataclass(frozen=True)
class ModelConfig:
    """Dose range, target rate, priors and working link."""

    x_min: float = 0.0
    x_max: float = 1.0
    theta: float = 0.33
    prior_rho0: BetaParams = field(default_factory=lambda: BetaParams(1.0, 1.0))
    prior_gamma: BetaParams = field(default_factory=lambda: BetaParams(1.0, 1.0))
    working_link: LinkFunction = field(
        default_factory=lambda: LinkFunction(Family.LOGISTIC))

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min must be < x_max, got [{self.x_min}, {self.x_max}]")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class ToxicityRecord:
    """One patient's administered dose and binary DLT outcome."""

    dose: float
    dlt: int

    def __post_init__(self):
        if self.dlt not in (0, 1):
            raise ValueError(f"dlt must be 0 or 1, got {self.dlt}")


class FeasibilityKind(str, enum.Enum):
    FIXED = "fixed"
    INCREASING = "increasing"
    CONDITIONAL = "conditional"


@dataclass(frozen=True)
class FeasibilitySchedule:
    """How the overdose-control quantile alpha evolves over the trial.

    Fixed keeps alpha at alpha0.  Increasing raises it by `step` per treated
    patient.  Conditional raises it by `step` only after a patient with no
    DLT.  All variants are capped at `cap`.
    """

    kind: FeasibilityKind = FeasibilityKind.CONDITIONAL
    alpha0: float = 0.25
    step: float = 0.05
    cap: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.alpha0 <= self.cap <= 0.5):
            raise ValueError(
                f"require 0 < alpha0 <= cap <= 0.5, got alpha0={self.alpha0} cap={self.cap}")
        if self.step < 0.0:
            raise ValueError(f"step must be >= 0, got {self.step}")


class SchemeKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class Rounding(str, enum.Enum):
    DOWN = "down"
    NEAREST = "nearest"


@dataclass(frozen=True)
class DoseScheme:
    """Continuous dosing, or a fixed grid with a rounding policy."""

    kind: SchemeKind = SchemeKind.CONTINUOUS
    grid: tuple[float, ...] = ()
    rounding: Rounding = Rounding.NEAREST
    no_skip: bool = True

    def __post_init__(self):
        if self.kind is SchemeKind.DISCRETE:
            if len(self.grid) < 2:
                raise ValueError("discrete scheme needs a grid of >= 2 doses")
            g = np.asarray(self.grid)
            if not np.all(np.diff(g) > 0):
                raise ValueError("grid must be strictly increasing")

    @staticmethod
    def continuous() -> "DoseScheme":
        return DoseScheme(SchemeKind.CONTINUOUS)

    @staticmethod
    def equally_spaced(spacing: float, x_min: float = 0.0, x_max: float = 1.0,
                      rounding: Rounding = Rounding.NEAREST,
                      no_skip: bool = True) -> "DoseScheme":
        n_steps = (x_max - x_min) / spacing
        if abs(n_steps - round(n_steps)) > 1e-9:
            raise ValueError(f"spacing {spacing} does not evenly divide [{x_min}, {x_max}]")
        grid = tuple(x_min + i * spacing for i in range(int(round(n_steps)) + 1))
        return DoseScheme(SchemeKind.DISCRETE, grid, rounding, no_skip)

    @property
    def label(self) -> str:
        if self.kind is SchemeKind.CONTINUOUS:
            return "continuous"
        return f"D{self.grid[1] - self.grid[0]:g}"


def betas_from(rho0: float, gamma: float, cfg: ModelConfig):
    """Map (rho0, gamma) to the working-link intercept and slope.

    Solves F(b0 + b1 x_min) = rho0 and F(b0 + b1 gamma) = theta.  Requires
    rho0 < theta so the slope is positive.
    """
    if not (0.0 < rho0 < cfg.theta):
        raise ValueError(f"rho0 must be in (0, theta={cfg.theta}), got {rho0}")
    if not (cfg.x_min < gamma <= cfg.x_max):
        raise ValueError(f"gamma must be in (x_min, x_max], got {gamma}")
    f_inv = cfg.working_link.quantile
    q_theta = f_inv(cfg.theta)
    q_rho = f_inv(rho0)
    denom = gamma - cfg.x_min
    beta1 = (q_theta - q_rho) / denom
    beta0 = (gamma * q_rho - cfg.x_min * q_theta) / denom
    return beta0, beta1


def gamma_from(beta0: float, beta1: float, cfg: ModelConfig) -> float:
    """Recover the MTD from the intercept/slope parameterization."""
    if not beta1 > 0.0:
        raise ValueError(f"beta1 must be > 0, got {beta1}")
    return (cfg.working_link.quantile(cfg.theta) - beta0) / beta1


def _beta_grids(rho0, gamma, cfg: ModelConfig):
    """Broadcasting version of betas_from for posterior evaluation; assumes
    inputs already inside the valid region."""
    rho0 = np.asarray(rho0, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    f_inv = cfg.working_link.quantile
    q_theta = f_inv(cfg.theta)
    q_rho = np.array([f_inv(r) for r in np.atleast_1d(rho0).ravel()])
    q_rho = q_rho.reshape(np.atleast_1d(rho0).shape)
    if rho0.ndim == 0:
        q_rho = q_rho[0]
    denom = gamma - cfg.x_min
    beta1 = (q_theta - q_rho) / denom
    beta0 = (gamma * q_rho - cfg.x_min * q_theta) / denom
    return beta0, beta1


def log_likelihood(rho0, gamma, data: Sequence[ToxicityRecord],
                   cfg: ModelConfig):
    """Bernoulli log likelihood of the observed (dose, DLT) pairs.

    `rho0` and `gamma` may be scalars or broadcastable arrays, which is how
    the quadrature backend evaluates the whole parameter grid at once.
    """
    beta0, beta1 = _beta_grids(rho0, gamma, cfg)
    total = np.zeros(np.broadcast(np.asarray(beta0), np.asarray(beta1)).shape)
    link = cfg.working_link
    for rec in data:
        z = beta0 + beta1 * rec.dose
        # log F and log(1-F) standardize as (z - loc)/scale inside the link
        total = total + (link.log_cdf(z) if rec.dlt else link.log_sf(z))
    if total.ndim == 0:
        return float(total)
    return total


def log_prior(rho0, gamma, cfg: ModelConfig):
    """Independent Beta priors: rho0 on (0, 1), gamma rescaled to the dose range."""
    rho0 = np.asarray(rho0, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    u = (gamma - cfg.x_min) / cfg.width
    out = (beta_log_pdf(cfg.prior_rho0, rho0)
           + beta_log_pdf(cfg.prior_gamma, u)
           - np.log(cfg.width))
    if np.ndim(out) == 0:
        return float(out)
    return out


def feasibility_alpha(sched: FeasibilitySchedule,
                      history: Sequence[ToxicityRecord]) -> float:
    """Overdose-control quantile for the next patient given the history."""
    if sched.kind is FeasibilityKind.FIXED:
        return sched.alpha0
    if sched.kind is FeasibilityKind.INCREASING:
        increments = len(history)
    else:
        increments = sum(1 for rec in history if rec.dlt == 0)
    return min(sched.cap, sched.alpha0 + sched.step * increments)


def grid_index(scheme: DoseScheme, dose: float) -> int:
    """Index of the grid dose matching `dose` (nearest, to absorb float noise)."""
    g = np.asarray(scheme.grid)
    return int(np.argmin(np.abs(g - dose)))


def apply_dose_policy(continuous_dose: float, scheme: DoseScheme,
                      history: Sequence[ToxicityRecord]) -> float:
    """Project a continuous recommendation onto the dose scheme.

    Discrete schemes round per policy and then apply the no-skip rule: an
    escalation may not jump more than one grid position above the highest
    dose administered so far (first patient is held at the lowest dose).
    De-escalation is never restricted.
    """
    if scheme.kind is SchemeKind.CONTINUOUS:
        return continuous_dose
    g = np.asarray(scheme.grid)
    if scheme.rounding is Rounding.DOWN:
        below = np.nonzero(g <= continuous_dose + 1e-12)[0]
        idx = int(below[-1]) if below.size else 0
    else:
        dist = np.abs(g - continuous_dose)
        best = dist.min()
        # tie between two neighbours goes to the lower dose
        idx = int(np.nonzero(dist <= best + 1e-12)[0][0])
    if scheme.no_skip:
        if history:
            max_idx = max(grid_index(scheme, rec.dose) for rec in history)
            cap_idx = min(max_idx + 1, len(scheme.grid) - 1)
        else:
            cap_idx = 0
        idx = min(idx, cap_idx)
    return float(g[idx])
