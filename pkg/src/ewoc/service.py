"""HTTP service for live trial conduct.

Each trial is persisted as an append-only JSON-lines event log under the
data directory; the in-memory snapshot is rebuilt by replaying the log at
startup, which doubles as an integrity check.  Every mutation is flushed and
fsynced before the response is sent, so an acknowledged outcome survives a
hard kill.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .trial import (ConfigError, DoseMismatchError, SequencingError, TrialState,
                    TrialStatus, config_from_dict, config_to_dict, estimate_mtd,
                    new_trial, record_outcome, recommend_next)

DENSITY_TRACE_POINTS = 201


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def validate_config_doc(doc: dict) -> tuple[object | None, list[dict]]:
    """Build a TrialConfig from a request document, collecting per-field
    validation messages instead of raising."""
    problems: list[dict] = []

    def attempt(field: str, fn):
        try:
            return fn()
        except (ConfigError, ValueError, TypeError, KeyError) as exc:
            problems.append({"field": field, "message": str(exc)})
            return None

    model_doc = doc.get("model", {})
    scheme_doc = doc.get("scheme", {})
    attempt("model", lambda: config_from_dict({"model": model_doc}))
    attempt("scheme.grid", lambda: config_from_dict({"scheme": scheme_doc}))
    if problems:
        return None, problems
    config = attempt("config", lambda: config_from_dict(doc))
    if config is None:
        return None, problems
    return config, []


class TrialStore:
    """Durable per-trial event logs plus the in-memory replayed snapshots."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._trials: dict[str, dict] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._load_all()

    def _lock(self, trial_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(trial_id, threading.Lock())

    def _path(self, trial_id: str) -> Path:
        return self.data_dir / f"{trial_id}.jsonl"

    def _load_all(self) -> None:
        for path in sorted(self.data_dir.glob("*.jsonl")):
            trial_id = path.stem
            state = None
            audit = []
            with open(path) as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    audit.append({"timestamp": event["ts"],
                                  "action": event["action"],
                                  "digest": event["digest"]})
                    if event["action"] == "create":
                        state = new_trial(config_from_dict(event["payload"]))
                    else:
                        state = record_outcome(state, event["payload"]["dose"],
                                               event["payload"]["dlt"])
            if state is not None:
                self._trials[trial_id] = {
                    "state": state,
                    "revision": len(audit) - 1,
                    "audit": audit,
                    "updated": audit[-1]["timestamp"],
                }

    def _append(self, trial_id: str, action: str, payload: dict) -> dict:
        event = {"ts": _now(), "action": action, "payload": payload,
                 "digest": _digest(payload)}
        with open(self._path(trial_id), "a") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return event

    def create(self, config) -> tuple[str, dict]:
        trial_id = uuid.uuid4().hex
        with self._lock(trial_id):
            event = self._append(trial_id, "create", config_to_dict(config))
            entry = {
                "state": new_trial(config),
                "revision": 0,
                "audit": [{"timestamp": event["ts"], "action": "create",
                           "digest": event["digest"]}],
                "updated": event["ts"],
            }
            self._trials[trial_id] = entry
        return trial_id, entry

    def get(self, trial_id: str) -> dict | None:
        return self._trials.get(trial_id)

    def list_ids(self) -> list[str]:
        return sorted(self._trials)

    def add_outcome(self, trial_id: str, dose: float, dlt: int,
                    expected_revision: int):
        """Returns the new revision; raises on conflict or invalid dose."""
        with self._lock(trial_id):
            entry = self._trials[trial_id]
            if expected_revision != entry["revision"]:
                raise RevisionConflict(entry["revision"])
            new_state = record_outcome(entry["state"], dose, dlt)
            event = self._append(trial_id, "outcome",
                                 {"dose": dose, "dlt": int(dlt)})
            entry["state"] = new_state
            entry["revision"] += 1
            entry["audit"].append({"timestamp": event["ts"],
                                   "action": "outcome",
                                   "digest": event["digest"]})
            entry["updated"] = event["ts"]
            return entry["revision"]


class RevisionConflict(Exception):
    def __init__(self, current_revision: int):
        super().__init__(f"expected_revision does not match {current_revision}")
        self.current_revision = current_revision


def _snapshot_doc(state: TrialState) -> dict:
    return {
        "config": config_to_dict(state.config),
        "records": [{"dose": r.dose, "dlt": r.dlt} for r in state.records],
        "status": state.status.value,
    }


def _density_trace(posterior) -> dict:
    diag = posterior.diagnostics
    grid = diag.get("gamma_grid")
    density = diag.get("gamma_density")
    if grid is None or density is None:
        return {"dose": [], "density": []}
    doses = np.linspace(float(grid[0]), float(grid[-1]), DENSITY_TRACE_POINTS)
    dens = np.interp(doses, grid, density)
    return {"dose": [round(float(d), 10) for d in doses],
            "density": [round(float(v), 10) for v in dens]}


def _recommendation_doc(entry: dict) -> dict:
    state = entry["state"]
    rec = recommend_next(state)
    est = estimate_mtd(state)
    return {
        "revision": entry["revision"],
        "continuous_dose": rec.continuous_dose,
        "administered_dose": rec.administered_dose,
        "alpha": rec.alpha_used,
        "posterior": {
            "gamma_median": rec.posterior.gamma_median,
            "gamma_mean": rec.posterior.gamma_mean,
            "gamma_quantiles": {str(k): v
                                for k, v in rec.posterior.gamma_quantiles.items()},
            "density_trace": _density_trace(rec.posterior),
        },
        "interim_mtd": {"dose": est.dose, "interim": est.interim},
        "patients_treated": len(state.records),
        "sample_size": state.config.sample_size,
        "status": state.status.value,
    }


def create_app(data_dir: str | Path = "trials",
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="ewoc trial conduct service")
    store = TrialStore(data_dir)
    app.state.store = store
    recommendation_cache: dict[tuple[str, int], dict] = {}

    @app.post("/trials", status_code=201)
    async def create_trial(request: Request):
        doc = await request.json()
        config, problems = validate_config_doc(doc)
        if problems:
            return JSONResponse(status_code=422, content={"detail": problems})
        trial_id, entry = store.create(config)
        return {"id": trial_id, "revision": entry["revision"],
                "config": config_to_dict(config)}

    @app.get("/trials")
    async def list_trials():
        out = []
        for trial_id in store.list_ids():
            entry = store.get(trial_id)
            state = entry["state"]
            out.append({"id": trial_id,
                        "patients": len(state.records),
                        "sample_size": state.config.sample_size,
                        "status": state.status.value,
                        "revision": entry["revision"],
                        "last_updated": entry["updated"]})
        return out

    @app.get("/trials/{trial_id}")
    async def get_trial(trial_id: str):
        entry = store.get(trial_id)
        if entry is None:
            return JSONResponse(status_code=404,
                                content={"detail": "unknown trial id"})
        return {"id": trial_id, "revision": entry["revision"],
                "snapshot": _snapshot_doc(entry["state"]),
                "audit": entry["audit"]}

    @app.get("/trials/{trial_id}/recommendation")
    async def get_recommendation(trial_id: str):
        entry = store.get(trial_id)
        if entry is None:
            return JSONResponse(status_code=404,
                                content={"detail": "unknown trial id"})
        state = entry["state"]
        if state.status is TrialStatus.COMPLETE:
            est = estimate_mtd(state)
            return JSONResponse(status_code=409, content={
                "detail": "trial complete",
                "status": state.status.value,
                "final_mtd_estimate": est.dose,
            })
        if state.status is TrialStatus.AWAITING_OUTCOME:
            return JSONResponse(status_code=409, content={
                "detail": "cohort outcomes pending",
                "status": state.status.value,
            })
        key = (trial_id, entry["revision"])
        doc = recommendation_cache.get(key)
        if doc is None:
            doc = _recommendation_doc(entry)
            recommendation_cache[key] = doc
            if len(recommendation_cache) > 128:
                recommendation_cache.pop(next(iter(recommendation_cache)))
        return doc

    @app.post("/trials/{trial_id}/outcomes")
    async def post_outcome(trial_id: str, request: Request):
        if store.get(trial_id) is None:
            return JSONResponse(status_code=404,
                                content={"detail": "unknown trial id"})
        body = await request.json()
        try:
            dose = float(body["dose"])
            dlt = int(body["dlt"])
            expected = int(body["expected_revision"])
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse(status_code=422,
                                content={"detail": f"bad outcome body: {exc}"})
        if dlt not in (0, 1):
            return JSONResponse(status_code=422,
                                content={"detail": "dlt must be 0 or 1"})
        try:
            revision = store.add_outcome(trial_id, dose, dlt, expected)
        except RevisionConflict as exc:
            return JSONResponse(status_code=409, content={
                "detail": "revision conflict",
                "current_revision": exc.current_revision,
            })
        except DoseMismatchError as exc:
            return JSONResponse(status_code=422,
                                content={"detail": str(exc)})
        except SequencingError as exc:
            return JSONResponse(status_code=422,
                                content={"detail": f"trial-complete: {exc}"})
        return {"revision": revision}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
