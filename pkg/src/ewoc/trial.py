"""Sequential trial state machine shared by simulation and live conduct.

States are immutable values; recording an outcome returns a new state.  All
recommendations are pure functions of (config, records), so a stored record
sequence replays to identical recommendations.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from .links import BetaParams, Family, LinkFunction
from .model import (DoseScheme, FeasibilityKind, FeasibilitySchedule,
                    ModelConfig, Rounding, SchemeKind, ToxicityRecord,
                    apply_dose_policy, feasibility_alpha, grid_index)
from .posterior import BackendKind, BackendSpec, PosteriorSummary, posterior_summary

__all__ = [
    "MtdEstimator",
    "TrialStatus",
    "TrialConfig",
    "TrialState",
    "DoseRecommendation",
    "MtdEstimate",
    "ConfigError",
    "SequencingError",
    "DoseMismatchError",
    "new_trial",
    "recommend_next",
    "record_outcome",
    "estimate_mtd",
    "snapshot_to_json",
    "snapshot_from_json",
]


class MtdEstimator(str, enum.Enum):
    POSTERIOR_MEDIAN = "median"
    ALPHA_QUANTILE = "alpha"


class TrialStatus(str, enum.Enum):
    READY_TO_DOSE = "ReadyToDose"
    AWAITING_OUTCOME = "AwaitingOutcome"
    COMPLETE = "Complete"


class ConfigError(ValueError):
    """Invalid trial configuration; `problems` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class SequencingError(RuntimeError):
    pass


class DoseMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    scheme: DoseScheme = field(default_factory=DoseScheme.continuous)
    feasibility: FeasibilitySchedule = field(default_factory=FeasibilitySchedule)
    sample_size: int = 20
    cohort_size: int = 1
    starting_dose: float | None = None
    backend: BackendSpec = field(default_factory=BackendSpec)
    mtd_estimator: MtdEstimator = MtdEstimator.POSTERIOR_MEDIAN

    def __post_init__(self):
        if self.starting_dose is None:
            start = (self.scheme.grid[0]
                     if self.scheme.kind is SchemeKind.DISCRETE else self.model.x_min)
            object.__setattr__(self, "starting_dose", start)
        problems = []
        if self.cohort_size < 1:
            problems.append(f"cohort_size must be >= 1, got {self.cohort_size}")
        if self.sample_size < max(self.cohort_size, 1):
            problems.append(
                f"sample_size must be >= cohort_size, got {self.sample_size}")
        if not (self.model.x_min <= self.starting_dose <= self.model.x_max):
            problems.append(
                f"starting_dose {self.starting_dose} outside "
                f"[{self.model.x_min}, {self.model.x_max}]")
        if self.scheme.kind is SchemeKind.DISCRETE:
            if not any(abs(g - self.starting_dose) < 1e-9 for g in self.scheme.grid):
                problems.append(
                    f"starting_dose {self.starting_dose} is not a grid member")
            if (self.scheme.grid[0] < self.model.x_min - 1e-12
                    or self.scheme.grid[-1] > self.model.x_max + 1e-12):
                problems.append("grid extends outside [x_min, x_max]")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class TrialState:
    config: TrialConfig
    records: tuple[ToxicityRecord, ...] = ()

    @property
    def status(self) -> TrialStatus:
        n = len(self.records)
        if n >= self.config.sample_size:
            return TrialStatus.COMPLETE
        if n % self.config.cohort_size != 0:
            return TrialStatus.AWAITING_OUTCOME
        return TrialStatus.READY_TO_DOSE


@dataclass(frozen=True)
class DoseRecommendation:
    continuous_dose: float
    administered_dose: float
    alpha_used: float
    posterior: PosteriorSummary


@dataclass(frozen=True)
class MtdEstimate:
    dose: float
    posterior: PosteriorSummary
    interim: bool


def new_trial(config: TrialConfig) -> TrialState:
    return TrialState(config=config)


def recommend_next(state: TrialState,
                   rng=None) -> DoseRecommendation:
    """Dose for the next cohort: the feasibility-alpha quantile of the MTD
    posterior, projected onto the dose scheme.  The first cohort receives
    the configured starting dose."""
    if state.status is TrialStatus.COMPLETE:
        raise SequencingError("trial is complete; no further doses")
    if state.status is TrialStatus.AWAITING_OUTCOME:
        raise SequencingError(
            "cohort outcomes are pending; record them before the next dose")
    cfg = state.config
    alpha = feasibility_alpha(cfg.feasibility, state.records)
    post = posterior_summary(state.records, cfg.model, cfg.backend,
                             probs=sorted({alpha, 0.25, 0.5}), rng=rng)
    if not state.records:
        continuous = cfg.starting_dose
        administered = cfg.starting_dose
    else:
        continuous = post.gamma_quantiles[alpha]
        administered = apply_dose_policy(continuous, cfg.scheme, state.records)
    return DoseRecommendation(
        continuous_dose=continuous,
        administered_dose=administered,
        alpha_used=alpha,
        posterior=post,
    )


def pending_dose(state: TrialState) -> float:
    """Administered dose the next outcome must be reported at."""
    cohort_start = (len(state.records) // state.config.cohort_size
                    ) * state.config.cohort_size
    prefix = TrialState(config=state.config, records=state.records[:cohort_start])
    return recommend_next(prefix).administered_dose


def record_outcome(state: TrialState, dose: float, dlt: int) -> TrialState:
    """Append one patient outcome after checking the dose matches the
    pending recommendation (guards live conduct against transcription slips)."""
    if state.status is TrialStatus.COMPLETE:
        raise SequencingError("trial is complete; no more outcomes accepted")
    expected = pending_dose(state)
    if abs(dose - expected) > 1e-9:
        raise DoseMismatchError(
            f"recorded dose {dose} does not match the recommended dose {expected}")
    rec = ToxicityRecord(dose=expected, dlt=int(dlt))
    return replace(state, records=state.records + (rec,))


def estimate_mtd(state: TrialState) -> MtdEstimate:
    """MTD estimate on the continuous scale (never grid-rounded)."""
    cfg = state.config
    alpha = feasibility_alpha(cfg.feasibility, state.records)
    post = posterior_summary(state.records, cfg.model, cfg.backend,
                             probs=sorted({alpha, 0.5}))
    if cfg.mtd_estimator is MtdEstimator.POSTERIOR_MEDIAN:
        dose = post.gamma_quantiles[0.5]
    else:
        dose = post.gamma_quantiles[alpha]
    return MtdEstimate(dose=dose, posterior=post,
                       interim=state.status is not TrialStatus.COMPLETE)


# --- snapshot (JSON persistence / wire format) -----------------------------

def _link_to_dict(link: LinkFunction) -> dict:
    return {"family": link.family.value, "location": link.location,
            "scale": link.scale, "shape": link.shape}


def _link_from_dict(d: dict) -> LinkFunction:
    return LinkFunction(Family(d["family"]), d.get("location", 0.0),
                        d.get("scale", 1.0), d.get("shape", 0.0))


def config_to_dict(config: TrialConfig) -> dict:
    m = config.model
    return {
        "model": {
            "x_min": m.x_min, "x_max": m.x_max, "theta": m.theta,
            "prior_rho0": {"a": m.prior_rho0.a, "b": m.prior_rho0.b},
            "prior_gamma": {"a": m.prior_gamma.a, "b": m.prior_gamma.b},
            "working_link": _link_to_dict(m.working_link),
        },
        "scheme": {
            "kind": config.scheme.kind.value,
            "grid": list(config.scheme.grid),
            "rounding": config.scheme.rounding.value,
            "no_skip": config.scheme.no_skip,
        },
        "feasibility": {
            "kind": config.feasibility.kind.value,
            "alpha0": config.feasibility.alpha0,
            "step": config.feasibility.step,
            "cap": config.feasibility.cap,
        },
        "sample_size": config.sample_size,
        "cohort_size": config.cohort_size,
        "starting_dose": config.starting_dose,
        "backend": {
            "kind": config.backend.kind.value,
            "resolution": config.backend.resolution,
            "draws": config.backend.draws,
            "burn_in": config.backend.burn_in,
        },
        "mtd_estimator": config.mtd_estimator.value,
    }


def config_from_dict(d: dict) -> TrialConfig:
    m = d.get("model", {})
    sch = d.get("scheme", {})
    feas = d.get("feasibility", {})
    be = d.get("backend", {})
    model = ModelConfig(
        x_min=m.get("x_min", 0.0), x_max=m.get("x_max", 1.0),
        theta=m.get("theta", 0.33),
        prior_rho0=BetaParams(**m.get("prior_rho0", {"a": 1.0, "b": 1.0})),
        prior_gamma=BetaParams(**m.get("prior_gamma", {"a": 1.0, "b": 1.0})),
        working_link=_link_from_dict(m.get("working_link", {"family": "logistic"})),
    )
    scheme = DoseScheme(
        kind=SchemeKind(sch.get("kind", "continuous")),
        grid=tuple(sch.get("grid", ())),
        rounding=Rounding(sch.get("rounding", "nearest")),
        no_skip=sch.get("no_skip", True),
    )
    return TrialConfig(
        model=model,
        scheme=scheme,
        feasibility=FeasibilitySchedule(
            kind=FeasibilityKind(feas.get("kind", "conditional")),
            alpha0=feas.get("alpha0", 0.25),
            step=feas.get("step", 0.05),
            cap=feas.get("cap", 0.5),
        ),
        sample_size=d.get("sample_size", 20),
        cohort_size=d.get("cohort_size", 1),
        starting_dose=d.get("starting_dose"),
        backend=BackendSpec(
            kind=BackendKind(be.get("kind", "quadrature")),
            resolution=be.get("resolution", 401),
            draws=be.get("draws", 100_000),
            burn_in=be.get("burn_in", 10_000),
        ),
        mtd_estimator=MtdEstimator(d.get("mtd_estimator", "median")),
    )


def snapshot_to_json(state: TrialState) -> str:
    doc = {
        "config": config_to_dict(state.config),
        "records": [{"dose": r.dose, "dlt": r.dlt} for r in state.records],
        "status": state.status.value,
    }
    return json.dumps(doc, indent=2)


def snapshot_from_json(text: str, verify_replay: bool = False) -> TrialState:
    doc = json.loads(text)
    config = config_from_dict(doc["config"])
    records = doc.get("records", [])
    if len(records) > config.sample_size:
        raise ConfigError(
            [f"snapshot holds {len(records)} records but sample_size is "
             f"{config.sample_size}"])
    if verify_replay:
        state = new_trial(config)
        for r in records:
            state = record_outcome(state, r["dose"], r["dlt"])
        return state
    recs = tuple(ToxicityRecord(r["dose"], int(r["dlt"])) for r in records)
    return TrialState(config=config, records=recs)
