"""Command line front end.

``spinwave-photon run`` reads an experiment config, applies flag overrides,
runs the selected protocol and writes into ``--out``:

* ``report.json``: top-level keys manifest, protocol, results, curves, warnings
* ``etable.csv``: correlation table
* ``trials/<setting>.csv``: per-trial click logs (Monte Carlo engine only)
* ``phi_vs_tau.csv`` and, for several storage times, ``s_vs_tau.csv``
  (with ``--emit-curves``)

Every file embeds the run manifest (CSV files as ``# manifest:`` comment
lines).  Wall-clock time is printed to stderr only, so repeated runs are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, config, protocols
from .source import phi_of_tau

EXIT_OK, EXIT_ERROR = 0, 2


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default, allow_nan=False) + "\n"


def _manifest_lines(manifest: dict) -> list[str]:
    return ["manifest: " + json.dumps(manifest, sort_keys=True, separators=(",", ":"))]


def apply_overrides(doc: dict, args) -> dict:
    """Flag values take precedence over the config file."""
    raw = json.loads(json.dumps(doc))  # deep copy with plain containers
    if args.protocol:
        if args.protocol != raw["protocol"]:
            raw["settings"] = None
        raw["protocol"] = args.protocol
    if args.engine:
        raw["engine"]["kind"] = args.engine
    if args.mc_trials is not None:
        raw["engine"]["mc_trials"] = args.mc_trials
    if args.seed is not None:
        raw["engine"]["seed"] = args.seed
    if args.workers is not None:
        raw["engine"]["workers"] = args.workers
    if args.tau:
        raw["taus"] = list(args.tau)
    raw["source"]["visibility_by_tau"] = {float(k): v for k, v in raw["source"]["visibility_by_tau"].items()}
    return config.resolve(raw)


def phi_curve(cfg: protocols.ExperimentConfig, tau_max_ns: float = 500.0, step_ns: float = 10.0):
    rows = []
    for i in range(int(round(tau_max_ns / step_ns)) + 1):
        tau = i * step_ns
        try:
            equal = phi_of_tau(tau * 1e-9, cfg.source.beta)
            proj = phi_of_tau(tau * 1e-9, cfg.source.beta, form="projected")
        except ValueError:
            break
        rows.append((tau, math.degrees(equal), math.degrees(proj)))
    return rows


def _write_csv(path: Path, header_lines, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _write_trial_log(path: Path, header_lines, run, timing, tau_ns) -> None:
    masks = run.masks
    stamps = timing.timestamp_ns(np.arange(len(masks)), tau_ns)
    values, inverse = np.unique(masks, return_inverse=True)
    labels = [";".join(sorted(run.dist.clicks_of(int(v)))) for v in values]
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("trial_index,timestamp_ns,click_list\n")
        fh.writelines(f"{k},{t},{labels[i]}\n" for k, (t, i) in enumerate(zip(stamps.tolist(), inverse.tolist())))


def run_command(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"tool": "spinwave-photon", "version": __version__,
                "config_path": args.config, "outputs": {"report": "report.json"}}
    report_doc = {"manifest": manifest, "protocol": args.protocol, "results": {}, "curves": {}, "warnings": []}
    t0 = time.perf_counter()
    try:
        doc = config.load(args.config) if args.config else config.resolve({})
        doc = apply_overrides(doc, args)
        cfg = config.build(doc)
        embedded = json.loads(json.dumps(doc, default=_json_default))
        embedded["engine"].pop("workers")  # parallelism never changes results
        manifest.update({"config": embedded, "engine": cfg.engine, "seed": cfg.seed})
        report_doc["protocol"] = cfg.protocol
        outputs = manifest["outputs"]
        outputs["etable"] = "etable.csv"
        if cfg.engine == "mc":
            outputs["trial_logs"] = "trials/"
        if args.emit_curves:
            outputs["phi_vs_tau"] = "phi_vs_tau.csv"
            if len(cfg.taus_ns) > 1:
                outputs["s_vs_tau"] = "s_vs_tau.csv"

        report = protocols.run(cfg)
        header = _manifest_lines(manifest)
        report_doc["results"] = report.results
        report_doc["warnings"] = report.warnings
        analysis.write_etable(out / "etable.csv", report.etable, report.etable_columns, header)
        if cfg.engine == "mc":
            (out / "trials").mkdir(exist_ok=True)
            for name, tau, run in report.trial_logs:
                _write_trial_log(out / "trials" / f"{name}.csv", header, run, cfg.timing, tau)
        if args.emit_curves:
            rows = phi_curve(cfg)
            _write_csv(out / "phi_vs_tau.csv", header, ("tau_ns", "phi_deg", "phi_projected_deg"), rows)
            report_doc["curves"]["phi_vs_tau"] = {"file": "phi_vs_tau.csv", "points": len(rows),
                                                  "phi_deg_at_max": rows[-1][1] if rows else None}
            if len(rows) < 51:
                report_doc["warnings"].append("phi(tau) curve truncated where beta*tau reaches pi/2")
            if len(cfg.taus_ns) > 1:
                _write_csv(out / "s_vs_tau.csv", header, ("tau_ns", "arm", "S", "stderr"),
                           [(r["tau_ns"], r["arm"], r["S"], r["stderr"]) for r in report.s_vs_tau])
                report_doc["curves"]["s_vs_tau"] = {"file": "s_vs_tau.csv", "points": len(report.s_vs_tau)}
        status = EXIT_OK
    except (ValueError, OSError) as exc:
        report_doc["results"] = {"error": {"type": type(exc).__name__, "message": str(exc),
                                           "path": getattr(exc, "path", None), "line": getattr(exc, "line", None)}}
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_ERROR
    (out / "report.json").write_text(_dumps(report_doc))
    print(f"runtime: {time.perf_counter() - t0:.3f} s -> {out}", file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinwave-photon", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one protocol and write its report")
    r.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
    r.add_argument("--protocol", choices=protocols.PROTOCOLS)
    r.add_argument("--engine", choices=protocols.ENGINES)
    r.add_argument("--mc-trials", type=int, metavar="N")
    r.add_argument("--seed", type=int, metavar="U64")
    r.add_argument("--tau", type=float, action="append", metavar="NS", help="storage time in ns (repeatable)")
    r.add_argument("--out", default="out", metavar="DIR")
    r.add_argument("--emit-curves", action="store_true", help="write phi_vs_tau.csv and s_vs_tau.csv")
    r.add_argument("--workers", type=int, metavar="K", help="Monte Carlo worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
