"""Monte Carlo study harness: scenarios, parallel execution, operating
characteristics, optimal-dose censuses and relative-loss summaries."""

from __future__ import annotations

import enum
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from . import __version__
from .links import Family, LinkFunction
from .model import DoseScheme, SchemeKind
from .streams import replicate_stream
from .trial import (TrialConfig, config_from_dict, config_to_dict, estimate_mtd,
                    new_trial, record_outcome, recommend_next)

__all__ = [
    "TrueModel",
    "StudyConfig",
    "TrialRecord",
    "OCSet",
    "CensusKind",
    "true_prob",
    "simulate_trial",
    "run_study",
    "operating_characteristics",
    "optimal_dose_census",
    "relative_loss",
    "summarize_cells",
    "relative_loss_summary",
    "canonical_study_config",
    "canonical_true_links",
]

RELATIVE_LOSS_EPS = 1e-9
DLT_OUTSIDE_HALFWIDTH = 0.10


@dataclass(frozen=True)
class TrueModel:
    """Data-generating dose-toxicity curve: a true link pinned through
    (x_min, true_rho0) and (true_mtd, theta)."""

    link: LinkFunction
    true_mtd: float
    true_rho0: float = 0.05
    x_min: float = 0.0
    theta: float = 0.33

    def __post_init__(self):
        if not (0.0 < self.true_rho0 < self.theta):
            raise ValueError(
                f"true_rho0 must be in (0, theta={self.theta}), got {self.true_rho0}")
        if not self.true_mtd > self.x_min:
            raise ValueError("true_mtd must exceed x_min")

    @property
    def betas(self) -> tuple[float, float]:
        q_theta = self.link.quantile(self.theta)
        q_rho = self.link.quantile(self.true_rho0)
        denom = self.true_mtd - self.x_min
        return ((self.true_mtd * q_rho - self.x_min * q_theta) / denom,
                (q_theta - q_rho) / denom)

    @property
    def label(self) -> str:
        fam = self.link.family
        if fam is Family.SKEW_NORMAL:
            return f"skew_normal({self.link.shape:+g})"
        return fam.value


def true_prob(model: TrueModel, dose: float) -> float:
    """True P(DLT) at a dose."""
    beta0, beta1 = model.betas
    return model.link.cdf(beta0 + beta1 * dose)


@dataclass(frozen=True)
class StudyConfig:
    trial: TrialConfig
    true_models: tuple[TrueModel, ...]
    schemes: tuple[DoseScheme, ...]
    sample_sizes: tuple[int, ...]
    replicates: int = 1000
    seed: int = 0
    optimal_mtd_halfwidth_factor: float = 0.15
    optimal_tox_halfwidth: float = 0.10

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not (self.optimal_mtd_halfwidth_factor > 0
                and self.optimal_tox_halfwidth > 0):
            raise ValueError("halfwidths must be > 0")

    def cells(self) -> list[tuple[TrueModel, int, DoseScheme]]:
        return [(tm, n, sch)
                for tm in self.true_models
                for n in self.sample_sizes
                for sch in self.schemes]


@dataclass(frozen=True)
class TrialRecord:
    doses: tuple[float, ...]
    dlts: tuple[int, ...]
    mtd_estimate: float
    patient_in_mtd_interval: tuple[bool, ...]
    patient_in_tox_interval: tuple[bool, ...]
    dlt_proportion: float


@dataclass(frozen=True)
class OCSet:
    bias: float
    mse: float
    avg_dlt_rate: float
    pct_trials_dlt_outside: float
    pct_trials_mtd_in_mtd_interval: float
    pct_trials_mtd_in_tox_interval: float
    avg_pct_patients_optimal_mtd: float
    avg_pct_patients_optimal_tox: float

    FIELDS = ("bias", "mse", "avg_dlt_rate", "pct_trials_dlt_outside",
              "pct_trials_mtd_in_mtd_interval", "pct_trials_mtd_in_tox_interval",
              "avg_pct_patients_optimal_mtd", "avg_pct_patients_optimal_tox")


def mtd_interval(true_mtd: float, halfwidth_factor: float) -> tuple[float, float]:
    hw = halfwidth_factor * true_mtd
    return true_mtd - hw, true_mtd + hw


def _in_interval(x: float, lo: float, hi: float) -> bool:
    # inclusive with a float-noise guard
    return lo - 1e-12 <= x <= hi + 1e-12


def simulate_trial(model: TrueModel, trial_cfg: TrialConfig,
                   rng: np.random.Generator,
                   mtd_halfwidth_factor: float = 0.15,
                   tox_halfwidth: float = 0.10) -> TrialRecord:
    """One simulated trial: DLTs drawn as Bernoulli(true curve at the
    administered dose), dosing driven by the trial state machine."""
    state = new_trial(trial_cfg)
    doses, dlts = [], []
    while len(state.records) < trial_cfg.sample_size:
        rec = recommend_next(state)
        dose = rec.administered_dose
        for _ in range(min(trial_cfg.cohort_size,
                           trial_cfg.sample_size - len(state.records))):
            dlt = 1 if rng.random() < true_prob(model, dose) else 0
            state = record_outcome(state, dose, dlt)
            doses.append(dose)
            dlts.append(dlt)
    estimate = estimate_mtd(state).dose
    lo, hi = mtd_interval(model.true_mtd, mtd_halfwidth_factor)
    theta = model.theta
    in_mtd = tuple(_in_interval(d, lo, hi) for d in doses)
    in_tox = tuple(_in_interval(true_prob(model, d), theta - tox_halfwidth,
                                theta + tox_halfwidth) for d in doses)
    return TrialRecord(
        doses=tuple(doses), dlts=tuple(dlts), mtd_estimate=estimate,
        patient_in_mtd_interval=in_mtd, patient_in_tox_interval=in_tox,
        dlt_proportion=sum(dlts) / len(dlts),
    )


def operating_characteristics(records: Sequence[TrialRecord], model: TrueModel,
                              mtd_halfwidth_factor: float = 0.15,
                              tox_halfwidth: float = 0.10) -> OCSet:
    if not records:
        raise ValueError("operating characteristics need at least one trial")
    est = np.array([r.mtd_estimate for r in records])
    props = np.array([r.dlt_proportion for r in records])
    theta = model.theta
    lo, hi = mtd_interval(model.true_mtd, mtd_halfwidth_factor)
    outside = (props < theta - DLT_OUTSIDE_HALFWIDTH - 1e-12) \
        | (props > theta + DLT_OUTSIDE_HALFWIDTH + 1e-12)
    in_mtd = np.array([_in_interval(e, lo, hi) for e in est])
    in_tox = np.array([_in_interval(true_prob(model, e), theta - tox_halfwidth,
                                    theta + tox_halfwidth) for e in est])
    pat_mtd = np.array([np.mean(r.patient_in_mtd_interval) for r in records])
    pat_tox = np.array([np.mean(r.patient_in_tox_interval) for r in records])
    return OCSet(
        bias=float(est.mean() - model.true_mtd),
        mse=float(np.mean((est - model.true_mtd) ** 2)),
        avg_dlt_rate=float(props.mean()),
        pct_trials_dlt_outside=float(100.0 * outside.mean()),
        pct_trials_mtd_in_mtd_interval=float(100.0 * in_mtd.mean()),
        pct_trials_mtd_in_tox_interval=float(100.0 * in_tox.mean()),
        avg_pct_patients_optimal_mtd=float(100.0 * pat_mtd.mean()),
        avg_pct_patients_optimal_tox=float(100.0 * pat_tox.mean()),
    )


class CensusKind(str, enum.Enum):
    MTD_INTERVAL = "mtd"
    TOX_INTERVAL = "tox"


def round_half_up(x: float, decimals: int = 1) -> float:
    return float(Decimal(repr(x)).quantize(Decimal(10) ** -decimals,
                                           rounding=ROUND_HALF_UP))


def optimal_dose_census(scheme: DoseScheme, true_mtd: float, model: TrueModel,
                        kind: CensusKind,
                        mtd_halfwidth_factor: float = 0.15,
                        tox_halfwidth: float = 0.10) -> tuple[int, float]:
    """Count grid doses inside the optimal set; percentage of the grid size,
    rounded half-away-from-zero to one decimal."""
    if scheme.kind is not SchemeKind.DISCRETE:
        raise ValueError("census requires a discrete scheme")
    if kind is CensusKind.MTD_INTERVAL:
        lo, hi = mtd_interval(true_mtd, mtd_halfwidth_factor)
        count = sum(_in_interval(d, lo, hi) for d in scheme.grid)
    else:
        theta = model.theta
        count = sum(_in_interval(true_prob(model, d), theta - tox_halfwidth,
                                 theta + tox_halfwidth) for d in scheme.grid)
    pct = 100.0 * count / len(scheme.grid)
    return int(count), round_half_up(pct, 1)


def relative_loss(oc_discrete: OCSet, oc_continuous: OCSet) -> dict[str, dict]:
    """Per-characteristic signed relative difference to the continuous scheme.

    Positive values mean the discrete scheme is larger; values computed with
    a near-zero continuous baseline are flagged unstable.
    """
    out = {}
    for name in OCSet.FIELDS:
        c = getattr(oc_continuous, name)
        d = getattr(oc_discrete, name)
        denom = max(abs(c), RELATIVE_LOSS_EPS)
        out[name] = {"value": (d - c) / denom,
                     "unstable": abs(c) <= RELATIVE_LOSS_EPS}
    return out


def summarize_cells(values: Sequence[float]) -> tuple[float, float, float]:
    """(median, q25, q75) of a group of per-cell relative losses."""
    if len(values) == 0:
        raise ValueError("cannot summarize an empty group")
    if len(values) < 12:
        warnings.warn(f"summarizing {len(values)} cells; 12 expected",
                      stacklevel=2)
    v = np.sort(np.asarray(values, dtype=float))
    med, q25, q75 = np.percentile(v, [50, 25, 75], method="linear")
    return float(med), float(q25), float(q75)


@dataclass(frozen=True)
class CellResult:
    cell_index: int
    model: TrueModel
    sample_size: int
    scheme: DoseScheme
    oc: OCSet
    replicates: int
    failures: int
    records: tuple[TrialRecord, ...] = ()


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    cells: tuple[CellResult, ...]


def _trial_config_for(study: StudyConfig, n: int, scheme: DoseScheme) -> TrialConfig:
    start = (scheme.grid[0] if scheme.kind is SchemeKind.DISCRETE
             else study.trial.starting_dose)
    return replace(study.trial, sample_size=n, scheme=scheme,
                   starting_dose=start)


def _run_cell(study: StudyConfig, cell_index: int,
              keep_records: bool = False) -> CellResult:
    model, n, scheme = study.cells()[cell_index]
    cfg = _trial_config_for(study, n, scheme)
    records, failures = [], 0
    for r in range(study.replicates):
        rng = replicate_stream(study.seed, cell_index, r)
        try:
            records.append(simulate_trial(
                model, cfg, rng,
                mtd_halfwidth_factor=study.optimal_mtd_halfwidth_factor,
                tox_halfwidth=study.optimal_tox_halfwidth))
        except Exception:
            failures += 1
    if not records:
        raise RuntimeError(
            f"all {study.replicates} replicates failed in cell {cell_index}")
    oc = operating_characteristics(
        records, model,
        mtd_halfwidth_factor=study.optimal_mtd_halfwidth_factor,
        tox_halfwidth=study.optimal_tox_halfwidth)
    return CellResult(cell_index=cell_index, model=model, sample_size=n,
                      scheme=scheme, oc=oc, replicates=study.replicates,
                      failures=failures,
                      records=tuple(records) if keep_records else ())


def run_study(study: StudyConfig, threads: int = 1,
              keep_records: bool = False) -> StudyResult:
    """Simulate every (true model x n x scheme) cell.

    The per-replicate streams depend only on (seed, cell, replicate) and
    cells are assembled in index order, so the result is identical for any
    thread count.  With keep_records the per-replicate trajectories are
    retained on each cell (memory scales with cells x replicates x n).
    """
    n_cells = len(study.cells())
    if threads <= 1:
        cells = [_run_cell(study, i, keep_records) for i in range(n_cells)]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_run_cell, [study] * n_cells, range(n_cells),
                                  [keep_records] * n_cells))
    cells.sort(key=lambda c: c.cell_index)
    return StudyResult(config=study, cells=tuple(cells))


# --- relative-loss summary over (scheme, link) groups ----------------------

def relative_loss_summary(result: StudyResult) -> list[dict]:
    """Quartile summaries of relative loss per (discrete scheme, true link,
    characteristic), across the (true MTD x sample size) cells."""
    continuous = {(c.model, c.sample_size): c for c in result.cells
                  if c.scheme.kind is SchemeKind.CONTINUOUS}
    groups: dict[tuple[str, str, str], list[float]] = {}
    unstable: dict[tuple[str, str, str], bool] = {}
    for c in result.cells:
        if c.scheme.kind is SchemeKind.CONTINUOUS:
            continue
        base = continuous.get((c.model, c.sample_size))
        if base is None:
            warnings.warn("no continuous baseline cell; skipping relative loss",
                          stacklevel=2)
            continue
        losses = relative_loss(c.oc, base.oc)
        for name, entry in losses.items():
            key = (c.scheme.label, c.model.label, name)
            groups.setdefault(key, []).append(entry["value"])
            unstable[key] = unstable.get(key, False) or entry["unstable"]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for (scheme, link, name), values in sorted(groups.items()):
            med, q25, q75 = summarize_cells(values)
            rows.append({"scheme": scheme, "true_link": link,
                         "characteristic": name, "median": med,
                         "q25": q25, "q75": q75,
                         "unstable": unstable[(scheme, link, name)]})
    return rows


# --- serialization ---------------------------------------------------------

def _scheme_to_dict(s: DoseScheme) -> dict:
    return {"kind": s.kind.value, "grid": list(s.grid),
            "rounding": s.rounding.value, "no_skip": s.no_skip}


def _scheme_from_dict(d: dict) -> DoseScheme:
    from .model import Rounding
    return DoseScheme(kind=SchemeKind(d.get("kind", "continuous")),
                      grid=tuple(d.get("grid", ())),
                      rounding=Rounding(d.get("rounding", "nearest")),
                      no_skip=d.get("no_skip", True))


def _true_model_to_dict(tm: TrueModel) -> dict:
    return {"link": {"family": tm.link.family.value, "location": tm.link.location,
                     "scale": tm.link.scale, "shape": tm.link.shape},
            "true_mtd": tm.true_mtd, "true_rho0": tm.true_rho0,
            "x_min": tm.x_min, "theta": tm.theta}


def _true_model_from_dict(d: dict) -> TrueModel:
    li = d["link"]
    link = LinkFunction(Family(li["family"]), li.get("location", 0.0),
                        li.get("scale", 1.0), li.get("shape", 0.0))
    return TrueModel(link=link, true_mtd=d["true_mtd"],
                     true_rho0=d.get("true_rho0", 0.05),
                     x_min=d.get("x_min", 0.0), theta=d.get("theta", 0.33))


def study_to_dict(study: StudyConfig) -> dict:
    return {
        "trial": config_to_dict(study.trial),
        "true_models": [_true_model_to_dict(tm) for tm in study.true_models],
        "schemes": [_scheme_to_dict(s) for s in study.schemes],
        "sample_sizes": list(study.sample_sizes),
        "replicates": study.replicates,
        "seed": study.seed,
        "optimal_mtd_halfwidth_factor": study.optimal_mtd_halfwidth_factor,
        "optimal_tox_halfwidth": study.optimal_tox_halfwidth,
    }


def study_from_dict(d: dict) -> StudyConfig:
    return StudyConfig(
        trial=config_from_dict(d.get("trial", {})),
        true_models=tuple(_true_model_from_dict(t) for t in d["true_models"]),
        schemes=tuple(_scheme_from_dict(s) for s in d["schemes"]),
        sample_sizes=tuple(d["sample_sizes"]),
        replicates=d.get("replicates", 1000),
        seed=d.get("seed", 0),
        optimal_mtd_halfwidth_factor=d.get("optimal_mtd_halfwidth_factor", 0.15),
        optimal_tox_halfwidth=d.get("optimal_tox_halfwidth", 0.10),
    )


# --- canonical study -------------------------------------------------------

CANONICAL_GRID_SPACINGS = (0.05, 0.10, 0.20, 0.25)
CANONICAL_TRUE_MTDS = (0.2, 0.4, 0.6, 0.8)
CANONICAL_SAMPLE_SIZES = (20, 40, 60)


def canonical_true_links() -> tuple[LinkFunction, ...]:
    return (LinkFunction.logistic(0.0, 1.0),
            LinkFunction.normal(0.0, 2.0),
            LinkFunction.skew_normal(0.0, 2.0, 3.0),
            LinkFunction.skew_normal(0.0, 2.0, -3.0))


def canonical_study_config(replicates: int = 1000, seed: int = 0,
                       true_rho0: float = 0.05,
                       links: tuple[LinkFunction, ...] | None = None,
                       true_mtds: tuple[float, ...] = CANONICAL_TRUE_MTDS,
                       sample_sizes: tuple[int, ...] = CANONICAL_SAMPLE_SIZES) -> StudyConfig:
    """The canonical comparison study: continuous dosing plus the four
    equally spaced grids, conditional feasibility C(0.05, 0.05), theta 0.33,
    uniform priors on the unit dose range."""
    from .model import FeasibilityKind, FeasibilitySchedule
    trial = TrialConfig(
        feasibility=FeasibilitySchedule(kind=FeasibilityKind.CONDITIONAL,
                                        alpha0=0.05, step=0.05, cap=0.5),
        sample_size=max(sample_sizes),
    )
    if links is None:
        links = canonical_true_links()
    models = tuple(TrueModel(link=link, true_mtd=mtd, true_rho0=true_rho0)
                   for link in links for mtd in true_mtds)
    schemes = (DoseScheme.continuous(),) + tuple(
        DoseScheme.equally_spaced(s) for s in CANONICAL_GRID_SPACINGS)
    return StudyConfig(trial=trial, true_models=models, schemes=schemes,
                       sample_sizes=tuple(sample_sizes), replicates=replicates,
                       seed=seed)


# --- file outputs ----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def write_oc_csv(result: StudyResult, path) -> None:
    import csv
    keys = ["cell", "true_link", "true_mtd", "true_rho0", "n", "scheme"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + list(OCSet.FIELDS) + ["replicates", "failures"])
        for c in result.cells:
            row = [c.cell_index, c.model.label, c.model.true_mtd,
                   c.model.true_rho0, c.sample_size, c.scheme.label]
            row += [getattr(c.oc, f) for f in OCSet.FIELDS]
            row += [c.replicates, c.failures]
            w.writerow([_fmt(v) for v in row])


def write_relative_loss_csv(result: StudyResult, path) -> None:
    import csv
    rows = relative_loss_summary(result)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "true_link", "characteristic",
                    "median", "q25", "q75", "unstable"])
        for r in rows:
            w.writerow([r["scheme"], r["true_link"], r["characteristic"],
                        _fmt(r["median"]), _fmt(r["q25"]), _fmt(r["q75"]),
                        r["unstable"]])


def write_census_csv(study: StudyConfig, path) -> None:
    import csv
    grids = [s for s in study.schemes if s.kind is SchemeKind.DISCRETE]
    mtds = sorted({tm.true_mtd for tm in study.true_models})
    by_mtd = {tm.true_mtd: tm for tm in study.true_models}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["kind", "true_mtd"]
        for g in grids:
            header += [f"{g.label}_pct", f"{g.label}_count"]
        w.writerow(header)
        for kind in (CensusKind.MTD_INTERVAL, CensusKind.TOX_INTERVAL):
            for mtd in mtds:
                row = [kind.value, _fmt(mtd)]
                for g in grids:
                    count, pct = optimal_dose_census(
                        g, mtd, by_mtd[mtd], kind,
                        study.optimal_mtd_halfwidth_factor,
                        study.optimal_tox_halfwidth)
                    row += [_fmt(pct), count]
                w.writerow(row)


def write_metadata_json(result: StudyResult, path) -> None:
    study = result.config
    doc = {
        "version": __version__,
        "seed": study.seed,
        "replicates": study.replicates,
        "backend": study.trial.backend.kind.value,
        "backend_resolution": study.trial.backend.resolution,
        "mtd_estimator": study.trial.mtd_estimator.value,
        "true_rho0": sorted({tm.true_rho0 for tm in study.true_models}),
        "optimal_mtd_halfwidth_factor": study.optimal_mtd_halfwidth_factor,
        "optimal_tox_halfwidth": study.optimal_tox_halfwidth,
        "relative_loss": "(discrete - continuous) / max(|continuous|, 1e-9)",
        "total_failures": sum(c.failures for c in result.cells),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
