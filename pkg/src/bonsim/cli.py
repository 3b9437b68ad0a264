"""Command-line front end.

    bonsim run          --config PATH --out DIR [--seed N] [--snapshots S] [--trace]
    bonsim compare      --config PATH --out DIR [--seed N]
    bonsim sweep        --config PATH --out DIR --axis KEY --values V1,V2,... [--parallelism K]
    bonsim analyze      --in DIR --out DIR
    bonsim validate-eq1 --config PATH --out DIR [--seed N] [--basis in_degree|above_k_min]

``--out`` falls back to ``$BONSIM_OUT_DIR``.  Exit codes: 0 ok, 1 runtime
failure, 2 bad configuration or arguments.  Outputs are overwritten, never
appended to.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytics
from .config import ConfigError, Constant, ScenarioConfig, load_config, quantization_warning, sweepable, with_axis
from .engine import METRIC_COLUMNS, read_metrics_csv, run, run_birth_death
from .graph import degree_histogram, read_snapshot, write_snapshot

log = logging.getLogger("bonsim")

OUT_ENV = "BONSIM_OUT_DIR"


class UsageError(Exception):
    pass


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _prepare(args) -> tuple[ScenarioConfig, Path]:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed).validate()
    if getattr(args, "snapshots", None) is not None:
        cfg = cfg.replace(snapshot_every=args.snapshots).validate()
    note = quantization_warning(cfg)
    if note:
        log.info("%s", note)
    return cfg, _out_dir(args)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError(f"no output directory: pass --out or set {OUT_ENV}")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_run(cfg: ScenarioConfig, out: Path, kind: str = "bon", prefix: str = "", trace: bool = False):
    snap_dir = out / "snapshots"
    hook = None
    if cfg.snapshot_every and kind == "bon":
        snap_dir.mkdir(exist_ok=True)
        for old in snap_dir.glob("*.edges"):
            old.unlink()

        def hook(g, t):
            write_snapshot(g, snap_dir / f"step_{t:06d}.edges", t)

    report = run(cfg, kind, snapshot_hook=hook)
    (out / f"{prefix}metrics.csv").write_text(report.metrics_csv())
    (out / f"{prefix}report.json").write_text(report.to_json())
    (out / "config.txt").write_text(cfg.dumps())
    if trace:
        from .workload import generate_trace

        generate_trace(cfg).write_csv(out / "trace.csv")
    return report


def cmd_run(args) -> int:
    cfg, out = _prepare(args)
    report = _write_run(cfg, out, trace=args.trace)
    log.info("run finished: %d jobs completed", report.jobs_completed)
    return 0


def compare_result(bon_completed: int, central_completed: int) -> dict:
    ratio = bon_completed / central_completed if central_completed else None
    return {"bon_completed": bon_completed, "central_completed": central_completed, "ratio": ratio}


def cmd_compare(args) -> int:
    cfg, out = _prepare(args)
    bon = _write_run(cfg, out, "bon", prefix="bon_")
    central = _write_run(cfg, out, "central", prefix="central_")
    result = compare_result(bon.jobs_completed, central.jobs_completed)
    result["config"] = cfg.to_dict()
    _dump_json(out / "compare.json", result)
    print(json.dumps({k: v for k, v in result.items() if k != "config"}))
    return 0


SUMMARY_COLUMNS = ("axis", "value") + METRIC_COLUMNS + ("std_load_tail", "load_norm_tail", "bytes_total")


def _tail_mean(rows, attr: str, frac: float = 0.05) -> float | str:
    if not rows:
        return ""
    k = max(1, int(len(rows) * frac))
    return float(np.mean([getattr(r, attr) for r in rows[-k:]]))


def _sweep_one(job: tuple[ScenarioConfig, str, float, str]) -> list:
    cfg, axis, value, run_dir = job
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    report = _write_run(cfg, path)
    final = report.rows[-1].as_row() if report.rows else [""] * len(METRIC_COLUMNS)
    return [axis, value, *final, _tail_mean(report.rows, "std_load"), _tail_mean(report.rows, "load_norm"),
            report.bandwidth["total"]]


def cmd_sweep(args) -> int:
    cfg, out = _prepare(args)
    if not sweepable(args.axis):
        raise ConfigError(f"unknown or non-numeric sweep axis {args.axis!r}")
    values = [float(v) for v in args.values.split(",") if v.strip()] if args.values else []
    jobs = []
    for v in values:
        value = int(v) if v.is_integer() else v
        sub = with_axis(cfg, args.axis, value).validate()
        jobs.append((sub, args.axis, value, str(out / "runs" / f"{args.axis}={value}")))
    if args.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallelism) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    (out / "config.txt").write_text(cfg.dumps())
    return 0


def analyze_dir(in_dir: Path, out: Path) -> dict:
    """Degree fits for each snapshot and the diameter scatter from a run directory."""
    cfg_echo = None
    report_path = in_dir / "report.json"
    if report_path.exists():
        cfg_echo = json.loads(report_path.read_text()).get("config")
    k_max = None
    if cfg_echo and str(cfg_echo.get("power_dist", "")).startswith("constant"):
        k_max = int(cfg_echo["k_min"]) + int(str(cfg_echo["power_dist"]).split()[1])

    result: dict = {"config": cfg_echo, "snapshots": [], "diameter_fit": None}
    hist_rows = []
    for snap in sorted((in_dir / "snapshots").glob("*.edges")):
        g, step = read_snapshot(snap)
        hist = degree_histogram(g, "in")
        entry: dict = {"file": snap.name, "step": step, "nodes": g.n_nodes, "edges": g.edge_count,
                       "mean_in_degree": g.edge_count / g.n_nodes, "fit": None}
        probs = None
        if k_max is not None and max(hist) <= k_max:
            jobs = max(0, g.n_nodes * k_max - g.edge_count)
            model = analytics.AnalyticModel(g.n_nodes, k_max, jobs)
            entry["fit"] = analytics.fit_degree_distribution(hist, model).to_dict()
            probs = analytics.binomial_degree_dist(model)
        result["snapshots"].append(entry)
        for d, c in hist.items():
            p = float(probs[d]) if probs is not None and d < len(probs) else ""
            hist_rows.append([step, d, c, p])

    with open(out / "degree_hist.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "degree", "count", "model_prob"])
        w.writerows(hist_rows)

    scatter = []
    metrics_path = in_dir / "metrics.csv"
    if metrics_path.exists():
        n = int(cfg_echo["n_nodes"]) if cfg_echo else None
        for row in read_metrics_csv(metrics_path):
            if row["diameter_est"] is None or n is None or row["mean_k"] <= 1:
                continue
            x = math.log(n) / math.log(row["mean_k"])
            scatter.append([row["step"], n, row["mean_k"], x, row["diameter_est"]])
    with open(out / "diameter_scatter.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "n_nodes", "mean_k", "ln_n_over_ln_k", "diameter_est"])
        w.writerows(scatter)
    xs = [r[3] for r in scatter]
    if len(set(xs)) >= 2:
        slope, intercept, r2 = analytics.linear_fit(xs, [r[4] for r in scatter])
        result["diameter_fit"] = {"slope": slope, "intercept": intercept, "r2": r2}
    _dump_json(out / "analysis.json", result)
    return result


def cmd_analyze(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise UsageError(f"{in_dir} is not a directory")
    analyze_dir(in_dir, _out_dir(args))
    return 0


def cmd_validate_eq1(args) -> int:
    cfg, out = _prepare(args)
    if cfg.walk_variant != "last_node" or not isinstance(cfg.power_dist, Constant):
        raise ConfigError("validate-eq1 needs walk_variant = last_node and a constant power_dist")
    result = run_birth_death(cfg, args.basis)
    payload = result.to_dict()
    payload["config"] = cfg.to_dict()
    _dump_json(out / "eq1_fit.json", payload)
    (out / "config.txt").write_text(cfg.dumps())
    print(f"pooled TV={result.pooled.distance:.4f} final chi2 p={result.final.p_value:.4f} "
          f"{'PASS' if result.passed else 'FAIL'}")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bonsim", description="Balanced overlay network simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--snapshots", type=int, nargs="?", const=100, default=None, metavar="S",
                        help="write graph snapshots every S steps (100 if S is omitted)")
        sp.add_argument("--parallelism", type=int, default=1, metavar="K")

    sp = sub.add_parser("run", help="one overlay run")
    common(sp)
    sp.add_argument("--trace", action="store_true", help="also export the arrival trace as CSV")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="overlay vs central scheduler on the same trace")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="one run per value of a numeric config key")
    common(sp)
    sp.add_argument("--axis", required=True)
    sp.add_argument("--values", default="")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("analyze", help="fit degree laws and diameters from a run directory")
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("validate-eq1", help="closed-population last-node run vs the binomial degree law")
    common(sp)
    sp.add_argument("--basis", choices=("in_degree", "above_k_min"), default="in_degree")
    sp.set_defaults(func=cmd_validate_eq1)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level guard maps failures to exit 1
        log.exception("run failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
