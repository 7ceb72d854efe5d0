"""Operator command line: run studies, print censuses, advance a trial from
a snapshot file, and launch the conduct service.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .links import Family, LinkFunction
from .model import DoseScheme, SchemeKind
from .posterior import BackendKind, BackendSpec
from .study import (CensusKind, CANONICAL_GRID_SPACINGS, CANONICAL_TRUE_MTDS, TrueModel,
                    optimal_dose_census, run_study, study_from_dict,
                    write_census_csv, write_metadata_json, write_oc_csv,
                    write_relative_loss_csv)
from .trial import (ConfigError, MtdEstimator, estimate_mtd, recommend_next,
                    snapshot_from_json, snapshot_to_json)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def _default_threads() -> int:
    env = os.environ.get("EWOC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def apply_override(doc: dict, dotted: str, raw_value: str) -> None:
    """Set a dotted-path key in a config document; the path must exist."""
    parts = dotted.split(".")
    node = doc
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise UsageError(f"unknown config key: {dotted}")
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise UsageError(f"unknown config key: {dotted}")
    try:
        node[leaf] = json.loads(raw_value)
    except json.JSONDecodeError:
        node[leaf] = raw_value


def _load_study_doc(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config parse error in {path}: "
                         f"line {exc.lineno} column {exc.colno}: {exc.msg}")


def cmd_simulate(args) -> int:
    doc = _load_study_doc(args.config)
    for ov in args.set or []:
        if "=" not in ov:
            raise UsageError(f"override must be key=value, got {ov!r}")
        key, _, value = ov.partition("=")
        apply_override(doc, key, value)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replicates is not None:
        doc["replicates"] = args.replicates
    if args.backend is not None:
        doc.setdefault("trial", {}).setdefault("backend", {})["kind"] = args.backend
    if args.estimator is not None:
        doc.setdefault("trial", {})["mtd_estimator"] = args.estimator
    try:
        study = study_from_dict(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid study config: {exc}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_study(study, threads=args.threads)
    write_oc_csv(result, out / "oc.csv")
    write_relative_loss_csv(result, out / "relative_loss.csv")
    write_census_csv(study, out / "census.csv")
    write_metadata_json(result, out / "metadata.json")
    failures = {c.cell_index: c.failures for c in result.cells if c.failures}
    if failures:
        report = {"error": "replicate_failures", "failures_by_cell": failures}
        print(json.dumps(report), file=sys.stderr)
        return RUNTIME_ERROR
    print(f"wrote {len(result.cells)} cells to {out}")
    return 0


def _census_model(args, mtd: float) -> TrueModel:
    if args.link == "logistic":
        link = LinkFunction.logistic()
    elif args.link == "normal":
        link = LinkFunction.normal(0.0, 2.0)
    else:
        link = LinkFunction.skew_normal(0.0, 2.0, args.shape)
    return TrueModel(link=link, true_mtd=mtd, true_rho0=args.rho0,
                     theta=args.theta)


def cmd_census(args) -> int:
    kind = CensusKind(args.kind)
    spacings = [args.spacing] if args.spacing else list(CANONICAL_GRID_SPACINGS)
    mtds = [args.mtd] if args.mtd else list(CANONICAL_TRUE_MTDS)
    try:
        schemes = {s: DoseScheme.equally_spaced(s) for s in spacings}
    except ValueError as exc:
        raise UsageError(str(exc))
    rows = []
    header = ["true_mtd"] + [f"D{s:g}" for s in spacings]
    for mtd in mtds:
        model = _census_model(args, mtd)
        row = [f"{mtd:g}"]
        for s in spacings:
            count, pct = optimal_dose_census(
                schemes[s], mtd, model, kind,
                mtd_halfwidth_factor=args.mtd_halfwidth,
                tox_halfwidth=args.tox_halfwidth)
            row.append(f"{pct:.1f} ({count})")
        rows.append(row)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    if args.csv:
        import csv
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "true_mtd", "scheme", "count", "percentage"])
            for mtd in mtds:
                model = _census_model(args, mtd)
                for s in spacings:
                    count, pct = optimal_dose_census(
                        schemes[s], mtd, model, kind,
                        mtd_halfwidth_factor=args.mtd_halfwidth,
                        tox_halfwidth=args.tox_halfwidth)
                    w.writerow([kind.value, f"{mtd:g}", f"D{s:g}", count,
                                f"{pct:.1f}"])
    return 0


def _load_snapshot(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"snapshot not found: {path}")
    try:
        return snapshot_from_json(p.read_text(), verify_replay=False)
    except ConfigError as exc:
        raise UsageError(f"invalid snapshot: {exc}")
    except (KeyError, ValueError) as exc:
        raise UsageError(f"cannot parse snapshot {path}: {exc}")


def cmd_next_dose(args) -> int:
    state = _load_snapshot(args.snapshot)
    rec = recommend_next(state)
    payload = {
        "continuous_dose": rec.continuous_dose,
        "administered_dose": rec.administered_dose,
        "alpha": rec.alpha_used,
        "gamma_median": rec.posterior.gamma_median,
        "gamma_quantiles": {str(k): v for k, v in rec.posterior.gamma_quantiles.items()},
        "patients_treated": len(state.records),
    }
    print(json.dumps(payload, indent=2))
    if args.commit:
        doc = json.loads(snapshot_to_json(state))
        doc["pending"] = {"continuous_dose": rec.continuous_dose,
                          "administered_dose": rec.administered_dose,
                          "alpha": rec.alpha_used}
        Path(args.snapshot).write_text(json.dumps(doc, indent=2))
    return 0


def cmd_estimate(args) -> int:
    state = _load_snapshot(args.snapshot)
    est = estimate_mtd(state)
    print(json.dumps({
        "mtd_estimate": est.dose,
        "interim": est.interim,
        "gamma_quantiles": {str(k): v for k, v in est.posterior.gamma_quantiles.items()},
        "patients_treated": len(state.records),
    }, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(data_dir=args.data_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewoc",
        description="Overdose-controlled Bayesian dose finding: simulation "
                    "studies, dose censuses and live trial conduct.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a JSON config")
    p.add_argument("--config", required=True, help="study config JSON path")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker processes (default $EWOC_THREADS or 1)")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--backend", choices=["quadrature", "metropolis"], default=None)
    p.add_argument("--estimator", choices=["median", "alpha"], default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted-path config override, e.g. trial.backend.resolution=201")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("census", help="optimal-dose census per grid scheme")
    p.add_argument("--kind", choices=["mtd", "tox"], required=True)
    p.add_argument("--spacing", type=float, default=None,
                   help="grid spacing (default: all of 0.05/0.1/0.2/0.25)")
    p.add_argument("--mtd", type=float, default=None,
                   help="true MTD (default: all of 0.2/0.4/0.6/0.8)")
    p.add_argument("--theta", type=float, default=0.33)
    p.add_argument("--rho0", type=float, default=0.05,
                   help="true DLT probability at the minimum dose")
    p.add_argument("--link", choices=["logistic", "normal", "skew-normal"],
                   default="logistic")
    p.add_argument("--shape", type=float, default=3.0,
                   help="skew-normal shape (with --link skew-normal)")
    p.add_argument("--mtd-halfwidth", type=float, default=0.15,
                   help="halfwidth factor of the optimal MTD interval")
    p.add_argument("--tox-halfwidth", type=float, default=0.10,
                   help="halfwidth of the optimal toxicity interval")
    p.add_argument("--csv", default=None, help="also write the table as CSV")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("next-dose", help="recommendation from a trial snapshot")
    p.add_argument("snapshot", help="trial snapshot JSON path")
    p.add_argument("--commit", action="store_true",
                   help="write the pending recommendation back into the snapshot")
    p.set_defaults(func=cmd_next_dose)

    p = sub.add_parser("estimate", help="MTD estimate from a trial snapshot")
    p.add_argument("snapshot", help="trial snapshot JSON path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("serve", help="run the trial-conduct HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--data-dir", default="trials")
    p.add_argument("--static-dir", default=None,
                   help="built UI assets to host at the root path")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
