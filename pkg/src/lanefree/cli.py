"""Command-line entry point: run scenarios, compare variants, recompute metrics.

``run`` executes one scenario and writes ``trajectories.csv`` plus
``metrics.json``; ``compare`` runs all four methods over shared seeds and
emits a comparison table, per-interval z-tests and tidy plot-ready CSVs;
``metrics`` recomputes kinematic metrics from an existing trajectory file.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .agent import Variant
from .metrics import collect_metrics, two_sample_ztest
from .sim import (ScenarioConfig, load_config, read_trajectories,
                  run_scenario, write_metrics, write_trajectories)

METHODS = (Variant.MAX_SUM, Variant.NO_MAX_SUM, Variant.COND_MAX_SUM,
           Variant.MOBIL)


def _parse_seeds(text: str):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _load(args) -> ScenarioConfig:
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = load_config(path)
    if getattr(args, "variant", None):
        cfg.variant = Variant(args.variant)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "duration", None) is not None:
        cfg.duration_s = args.duration
    if getattr(args, "flow", None) is not None:
        if cfg.inflow is None:
            raise ValueError("--flow only applies to inflow scenarios")
        cfg.inflow = dataclasses.replace(cfg.inflow, flow_veh_h=args.flow)
    cfg.validate()
    return cfg


def _violations(report, variant) -> int:
    if variant is Variant.MOBIL:
        return 0
    return report.collisions + report.bound_breaches


def _summary_lines(report):
    yield f"  v_avg      {report.v_avg:8.3f} m/s"
    yield f"  v_dev_avg  {report.v_dev_avg:8.3f} m/s"
    yield f"  jerk_y_avg {report.jerk_y_avg:8.4f} m/s^3"
    yield f"  TTS        {report.tts_h:8.4f} h"
    yield f"  collisions {report.collisions:5d}   bound breaches {report.bound_breaches:5d}"
    if report.graph:
        yield (f"  graph      {report.graph.mean_single:.2f} single / "
               f"{report.graph.mean_pairwise:.2f} pairwise, "
               f"c_p={report.graph.c_p:.2f}, i_b={report.graph.i_b_bytes:.1f} B")


def _write_interval_csv(path, per_method):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("method", "interval", "v_avg_mps"))
        for m, rep in per_method.items():
            for k, v in enumerate(rep.interval_v_avg):
                w.writerow((m, k, v))


def _write_hist_csv(path, per_method):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("method", "bin_low", "bin_high", "pct"))
        for m, rep in per_method.items():
            edges = rep.jerk_hist_edges
            for k, p in enumerate(rep.jerk_hist_pct):
                w.writerow((m, edges[k], edges[k + 1], p))


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, report = run_scenario(cfg, record=True)
    write_trajectories(out / "trajectories.csv", rows)
    write_metrics(out / "metrics.json", report)
    _write_interval_csv(out / "interval_means.csv",
                        {cfg.variant.value: report})
    _write_hist_csv(out / "jerk_hist.csv", {cfg.variant.value: report})
    print(f"{cfg.variant.value}  seed={cfg.seed}  steps={report.n_steps}")
    for line in _summary_lines(report):
        print(line)
    print(f"wrote {out / 'trajectories.csv'} and {out / 'metrics.json'}")
    bad = _violations(report, cfg.variant)
    if bad and not args.allow_violations:
        print(f"error: {bad} safety violations (rerun with "
              "--allow-violations to ignore)", file=sys.stderr)
        return 1
    return 0


def _compare_worker(payload):
    cfg, variant, seed = payload
    cfg = dataclasses.replace(cfg, variant=variant, seed=seed)
    rows, report = run_scenario(cfg, record=True)
    return variant.value, seed, rows, report


def cmd_compare(args) -> int:
    cfg = _load(args)
    seeds = _parse_seeds(args.seeds) if args.seeds else [cfg.seed]
    jobs = [(cfg, m, s) for m in METHODS for s in seeds]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    results = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for method, seed, rows, report in pool.map(_compare_worker, jobs):
                results[(method, seed)] = (rows, report)
    else:
        for payload in jobs:
            method, seed, rows, report = _compare_worker(payload)
            results[(method, seed)] = (rows, report)

    per_method_first = {}
    summary = {}
    violations = 0
    for method in (m.value for m in METHODS):
        reps = [results[(method, s)][1] for s in seeds]
        per_method_first[method] = reps[0]
        n = len(reps)
        mean = lambda key: sum(getattr(r, key) for r in reps) / n
        err = lambda key: (0.0 if n < 2 else
                           (sum((getattr(r, key) - mean(key)) ** 2
                                for r in reps) / (n - 1) / n) ** 0.5)
        summary[method] = {
            "v_avg": mean("v_avg"), "v_avg_se": err("v_avg"),
            "v_dev_avg": mean("v_dev_avg"), "v_dev_se": err("v_dev_avg"),
            "jerk_y_avg": mean("jerk_y_avg"), "jerk_se": err("jerk_y_avg"),
            "tts_h": mean("tts_h"), "tts_se": err("tts_h"),
            "collisions": sum(r.collisions for r in reps),
            "bound_breaches": sum(r.bound_breaches for r in reps),
        }
        if method != Variant.MOBIL.value:
            violations += summary[method]["collisions"]
            violations += summary[method]["bound_breaches"]
        method_dir = out / method
        method_dir.mkdir(exist_ok=True)
        rows0, rep0 = results[(method, seeds[0])]
        write_trajectories(method_dir / "trajectories.csv", rows0)
        write_metrics(method_dir / "metrics.json", rep0)

    ztests = []
    cond = per_method_first[Variant.COND_MAX_SUM.value]
    base = per_method_first[Variant.MAX_SUM.value]
    steps_per_interval = cond.n_steps and max(
        int(round(300.0 / cfg.dt)), 1)
    if steps_per_interval:
        n_int = max(len(cond.interval_v_avg), len(base.interval_v_avg))
        for k in range(n_int):
            a = cond.speed_samples[k * steps_per_interval:
                                   (k + 1) * steps_per_interval]
            b = base.speed_samples[k * steps_per_interval:
                                   (k + 1) * steps_per_interval]
            if len(a) < 2 or len(b) < 2:
                continue
            zt = two_sample_ztest(a, b)
            ztests.append({"interval": k, "z": zt.z,
                           "significant": zt.significant,
                           "mean_cond": zt.mean_a, "mean_max": zt.mean_b})

    _write_interval_csv(out / "interval_means.csv", per_method_first)
    _write_hist_csv(out / "jerk_hist.csv", per_method_first)
    if cfg.mode == "fleet":  # combined traces stay small for fixed fleets
        with open(out / "speed_traces.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("method", "step", "time_s", "vehicle_id", "vx_mps",
                        "y_m"))
            for method in (m.value for m in METHODS):
                for r in results[(method, seeds[0])][0]:
                    w.writerow((method, r[0], r[1], r[2], r[5], r[4]))
    with open(out / "comparison.json", "w") as fh:
        json.dump({"seeds": seeds, "summary": summary, "ztests": ztests},
                  fh, indent=2)
        fh.write("\n")

    hdr = f"{'method':<14}{'v_avg':>9}{'v_dev':>9}{'jerk_y':>11}{'TTS(h)':>10}"
    print(hdr)
    for method in (m.value for m in METHODS):
        s = summary[method]
        print(f"{method:<14}{s['v_avg']:>9.3f}{s['v_dev_avg']:>9.3f}"
              f"{s['jerk_y_avg']:>11.4f}{s['tts_h']:>10.4f}")
    for zt in ztests:
        star = " *" if zt["significant"] else ""
        print(f"interval {zt['interval']:>2}: z={zt['z']:+.2f}{star}")
    print(f"wrote {out / 'comparison.json'}")
    if violations and not args.allow_violations:
        print(f"error: {violations} safety violations in DCOP runs",
              file=sys.stderr)
        return 1
    return 0


def cmd_metrics(args) -> int:
    path = Path(args.trajectories)
    if not path.exists():
        raise FileNotFoundError(f"trajectory file not found: {path}")
    rows = read_trajectories(path)
    report = collect_metrics(rows, dt=args.dt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.json", report)
    for line in _summary_lines(report):
        print(line)
    print(f"wrote {out / 'metrics.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lanefree",
        description="Lane-free coordination simulator and analysis tools")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--variant", choices=[m.value for m in METHODS],
                       help="override the configured method")
        p.add_argument("--duration", type=float, help="override duration (s)")
        p.add_argument("--flow", type=float,
                       help="override inflow rate (veh/h)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--allow-violations", action="store_true",
                       help="exit 0 even if safety monitors fired")

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.add_argument("--seed", type=int, help="override the seed")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="run all four methods")
    common(p_cmp)
    p_cmp.add_argument("--seeds", help="e.g. 1..5 or 1,2,3")
    p_cmp.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
    p_cmp.set_defaults(fn=cmd_compare)

    p_met = sub.add_parser("metrics", help="recompute metrics from a CSV")
    p_met.add_argument("--trajectories", required=True)
    p_met.add_argument("--dt", type=float, default=0.2)
    p_met.add_argument("--out", default="out")
    p_met.set_defaults(fn=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
