"""Command-line pipeline: baseline, calibrate, generate, ingest, train,
evaluate, report.

Each subcommand reads the artifacts of the previous one by path and is
idempotent for a fixed config and seed. Exit codes: 0 success, 1 usage,
2 data or schema error, 3 protocol error (missing upstream artifacts).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import models as models_mod
from .config import RunConfig
from .dataset import dataset_from_trace, read_dataset, write_dataset
from .errors import (ConfigError, DomainError, FormatError, ParseError,
                     ProtocolError, RttbenchError, SchemaError)
from .evaluation import build_split, evaluate_models, train_models
from .labeling import FrameRtt, Threshold, compute_threshold
from .parsers import assemble_frames, parse_iostat, parse_netstat, parse_vmstat, read_rtt_csv
from .report import emit_report, read_report_json, write_report_json
from .sim import SimConfig, simulate_scenario
from .stressors import (Catalog, ScenarioId, UNTRAINED_KINDS, all_scenarios,
                        default_catalog, validate_purity)
from .util import atomic_write_text

PURITY_GATE = 0.97


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _scenario_seed(root_seed: int, tag: int) -> int:
    ss = np.random.SeedSequence((root_seed, tag))
    return int(ss.generate_state(1, np.uint64)[0])


def _sim_config(cfg: RunConfig, n_frames: int, seed: int) -> SimConfig:
    frame_duration = cfg.sim.get("frame_duration", 6.0)
    return SimConfig(run_duration=n_frames * frame_duration, seed=seed,
                     **cfg.sim)


def _catalog(cfg: RunConfig) -> Catalog:
    catalog = default_catalog()
    if not cfg.profiles:
        return catalog
    doc = catalog.to_dict()
    for key, overrides in cfg.profiles.items():
        if key not in doc["profiles"]:
            raise ConfigError(f"profile override for unknown scenario '{key}'")
        doc["profiles"][key].update(overrides)
    return Catalog.from_dict(doc)


def _hyperparams(cfg: RunConfig) -> dict:
    hp = models_mod.default_hyperparams()
    for kind, overrides in cfg.hyperparams.items():
        if kind not in models_mod.MODEL_KINDS:
            raise ConfigError(f"hyperparams for unknown model '{kind}'")
        hp[kind] = {**hp[kind], **overrides}
    return hp


def _threshold_path(cfg: RunConfig) -> str:
    return os.path.join(cfg.data_dir, "threshold.json")


def _load_threshold(cfg: RunConfig) -> Threshold:
    path = _threshold_path(cfg)
    if not os.path.exists(path):
        raise ProtocolError(f"threshold file {path} not found; run the "
                            "'baseline' subcommand first")
    with open(path) as fh:
        return Threshold.from_json(fh.read())


def _dataset_path(cfg: RunConfig, scenario: ScenarioId) -> str:
    return os.path.join(cfg.data_dir, f"dataset_{scenario.name}.csv")


def _selected_scenarios(cfg: RunConfig) -> list[ScenarioId]:
    return [s for s in all_scenarios()
            if s.kind == "none" or s.kind in cfg.scenarios]


def cmd_baseline(cfg: RunConfig) -> int:
    """Two independent-seed unstressed runs; threshold from the combined frames."""
    catalog = _catalog(cfg)
    n = cfg.frames["baseline"]
    if n < cfg.min_baseline_frames:
        raise DomainError(
            f"frames.baseline={n} is below the minimum of "
            f"{cfg.min_baseline_frames} frames")
    runs = []
    for half in (0, 1):
        sim_cfg = _sim_config(cfg, n // 2 + n % 2 if half == 0 else n // 2,
                              _scenario_seed(cfg.seed, 1000 + half))
        runs.append(simulate_scenario(sim_cfg, catalog.profile_for("none", "none"),
                                      catalog))

    def stats(avgs, raws):
        return {
            "Average over full duration": float(np.mean(raws)),
            "Standard deviation using rtt": float(np.std(raws, ddof=1)),
            "3rd standard deviation using rtt":
                float(np.mean(raws) + 3 * np.std(raws, ddof=1)),
            "Standard deviation using rtt for the frame":
                float(np.std(avgs, ddof=1)),
            "3rd standard deviation using rtt for the frame":
                float(np.mean(avgs) + 3 * np.std(avgs, ddof=1)),
        }

    per_run = [stats(t.frame_avgs(), t.raw_rtts()) for t in runs]
    combined_avgs = np.concatenate([t.frame_avgs() for t in runs])
    combined_raws = np.concatenate([t.raw_rtts() for t in runs])
    combined = stats(combined_avgs, combined_raws)

    width = max(len(k) for k in combined) + 2
    print(f"{'Metric':<{width}}{'1st run':>12}{'2nd run':>12}{'Overall':>12}")
    for key in combined:
        print(f"{key:<{width}}"
              f"{per_run[0][key]:>10.3f}ms{per_run[1][key]:>10.3f}ms"
              f"{combined[key]:>10.3f}ms")

    threshold = compute_threshold(combined_avgs,
                                  min_frames=cfg.min_baseline_frames)
    os.makedirs(cfg.data_dir, exist_ok=True)
    atomic_write_text(_threshold_path(cfg), threshold.to_json() + "\n")
    print(f"\nanomalous cutoff: {threshold.cutoff:.3f}ms "
          f"({threshold.baseline_frame_count} baseline frames) "
          f"-> {_threshold_path(cfg)}")
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    """Search per-scenario inflation until the purity gate passes."""
    catalog = _catalog(cfg)
    threshold = _load_threshold(cfg)
    doc = catalog.to_dict()
    failures = []
    for scenario in _selected_scenarios(cfg):
        if scenario.kind == "none":
            continue
        key = f"{scenario.kind}/{scenario.level}"
        entry = doc["profiles"][key]
        for attempt in range(12):
            catalog = Catalog.from_dict(doc)
            profile = catalog.profile_for(scenario.kind, scenario.level)
            sim_cfg = _sim_config(cfg, cfg.frames["trained"],
                                  _scenario_seed(cfg.seed, 2000 + attempt))
            trace = simulate_scenario(sim_cfg, profile, catalog)
            purity = validate_purity(trace, threshold, scenario.expected_class)
            if purity >= PURITY_GATE:
                print(f"{scenario.name:14s} purity {purity:.4f}  "
                      f"inflation {entry['processing_inflation']:.3f}"
                      + ("  (adjusted)" if attempt else ""))
                break
            old = entry["processing_inflation"]
            if scenario.level == "high":
                entry["processing_inflation"] = old * 1.3
            else:
                entry["processing_inflation"] = max(1.0, 1.0 + (old - 1.0) * 0.7)
            print(f"{scenario.name:14s} purity {purity:.4f} < {PURITY_GATE}; "
                  f"inflation {old:.3f} -> {entry['processing_inflation']:.3f}")
        else:
            failures.append(scenario.name)
    os.makedirs(cfg.data_dir, exist_ok=True)
    out = os.path.join(cfg.data_dir, "profiles.json")
    atomic_write_text(out, json.dumps(doc, indent=2) + "\n")
    print(f"calibrated catalog -> {out}")
    if failures:
        print(f"calibration failed for: {failures}", file=sys.stderr)
        return 3
    return 0


def cmd_generate(cfg: RunConfig) -> int:
    """Simulate every selected scenario and write labeled dataset CSVs."""
    catalog = _catalog(cfg)
    threshold = _load_threshold(cfg)
    scenarios = _selected_scenarios(cfg)
    os.makedirs(cfg.data_dir, exist_ok=True)
    order = {s: i for i, s in enumerate(all_scenarios())}
    for scenario in scenarios:
        if scenario.kind == "none":
            n = cfg.frames["unstressed"]
        elif scenario.kind in UNTRAINED_KINDS:
            n = cfg.frames["untrained_rows"]
        else:
            n = cfg.frames["trained"]
        sim_cfg = _sim_config(cfg, n, _scenario_seed(cfg.seed, order[scenario]))
        trace = simulate_scenario(
            sim_cfg, catalog.profile_for(scenario.kind, scenario.level), catalog)
        ds = dataset_from_trace(trace, threshold)
        path = _dataset_path(cfg, scenario)
        write_dataset(ds, path)
        anom = float(np.mean(ds.labels == 1))
        print(f"{scenario.name:14s} {ds.n_rows:5d} rows  "
              f"anomalous {anom * 100:5.1f}%  -> {path}")
    return 0


def cmd_ingest(cfg: RunConfig, args) -> int:
    """Build a labeled dataset from captured tool output plus a client RTT log."""
    threshold = _load_threshold(cfg)

    def read(path):
        with open(path) as fh:
            return fh.read()

    records = {
        "vmstat": parse_vmstat(read(args.vmstat), interval=args.interval),
        "iostat": parse_iostat(read(args.iostat), interval=args.interval),
        "netstat": parse_netstat(read(args.netstat),
                                 interval=args.netstat_interval),
    }
    frame_duration = cfg.sim.get("frame_duration", 6.0)
    frames, dropped = assemble_frames(records, frame_duration)
    rtt = read_rtt_csv(args.rtt)
    t0 = frames[0].frame_start

    scenario = ScenarioId(args.kind, args.level)
    rows = []
    skipped_rtt = 0
    for kpi in frames:
        w_lo, w_hi = kpi.frame_start, kpi.frame_start + frame_duration
        in_frame = rtt[(rtt[:, 0] >= w_lo) & (rtt[:, 0] < w_hi)]
        if in_frame.shape[0] == 0:
            skipped_rtt += 1
            continue
        rows.append((kpi, FrameRtt(frame_start=kpi.frame_start,
                                   avg_rtt=float(np.mean(in_frame[:, 1])),
                                   sample_count=in_frame.shape[0])))
    if not rows:
        raise DomainError("no frames with both KPI data and RTT samples")

    from .dataset import LabeledDataset
    avg = np.array([r.avg_rtt for _, r in rows])
    ds = LabeledDataset(
        frame_start=np.array([k.frame_start for k, _ in rows]),
        kinds=np.array([scenario.kind] * len(rows)),
        levels=np.array([scenario.level] * len(rows)),
        avg_rtt=avg,
        labels=(avg >= threshold.cutoff).astype(np.int8),
        features=np.vstack([k.features for k, _ in rows]))
    write_dataset(ds, args.out)
    print(f"ingested {ds.n_rows} frames (dropped {dropped} incomplete KPI "
          f"windows, {skipped_rtt} without RTT samples, t0={t0}) -> {args.out}")
    return 0


def _load_datasets(cfg: RunConfig) -> dict:
    datasets = {}
    missing = []
    for scenario in all_scenarios():
        path = _dataset_path(cfg, scenario)
        if os.path.exists(path):
            datasets[scenario] = read_dataset(path)
        else:
            missing.append(path)
    if missing:
        raise ProtocolError(
            f"missing dataset files {missing[:3]}{'...' if len(missing) > 3 else ''}; "
            "run the 'generate' subcommand first")
    return datasets


def _models_dir(cfg: RunConfig) -> str:
    return os.path.join(cfg.data_dir, "models")


def cmd_train(cfg: RunConfig) -> int:
    """Train the selected model kinds on the pooled 80/20 training split."""
    datasets = _load_datasets(cfg)
    hp = _hyperparams(cfg)
    split = build_split(datasets, cfg.seed, cfg.train_fraction)
    trained, seconds = train_models(split, cfg.models, hp, cfg.seed)
    out_dir = _models_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    for kind, tm in trained.items():
        path = os.path.join(out_dir, f"{kind}.npz")
        models_mod.save_model(tm, path)
        print(f"{kind:8s} trained on {tm.meta['rows']} rows "
              f"({tm.meta['anomalous_rows']} anomalous) "
              f"in {seconds[kind]:6.2f}s -> {path}")
    manifest = {"seed": cfg.seed, "train_fraction": cfg.train_fraction,
                "models": list(trained), "train_seconds": seconds}
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2) + "\n")
    return 0


def cmd_evaluate(cfg: RunConfig, fmt: str = "json") -> int:
    """Score persisted models over held-out and untrained scenarios."""
    manifest_path = os.path.join(_models_dir(cfg), "manifest.json")
    if not os.path.exists(manifest_path):
        raise ProtocolError("no trained models on disk; run the 'train' "
                            "subcommand first")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    datasets = _load_datasets(cfg)
    split = build_split(datasets, manifest["seed"], manifest["train_fraction"])
    trained = {}
    for kind in manifest["models"]:
        path = os.path.join(_models_dir(cfg), f"{kind}.npz")
        if not os.path.exists(path):
            raise ProtocolError(f"model file {path} missing; run 'train' first")
        trained[kind] = models_mod.load_model(path)
    run = evaluate_models(trained, split, manifest["seed"],
                          manifest["train_fraction"],
                          manifest.get("train_seconds"))
    os.makedirs(cfg.report_dir, exist_ok=True)
    path = os.path.join(cfg.report_dir, "report.json")
    write_report_json(run, path)
    print(f"evaluation report -> {path}")
    if fmt == "csv":
        emit_report(run, cfg.report_dir, formats=("csv",), figures=False)
    for kind in manifest["models"]:
        overall = run.category_results[kind]["overall"]
        print(f"{kind:8s} overall accuracy {overall.accuracy * 100:6.2f}%  "
              f"f1 {overall.f1 if overall.f1 is not None else float('nan'):.5f}")
    return 0


def cmd_report(cfg: RunConfig, fmt: str = "csv") -> int:
    """Render tables and figures from an existing report.json."""
    path = os.path.join(cfg.report_dir, "report.json")
    if not os.path.exists(path):
        raise ProtocolError(f"{path} not found; run the 'evaluate' "
                            "subcommand first")
    run = read_report_json(path)
    formats = ("json", "csv") if fmt == "json" else ("csv",)
    written = emit_report(run, cfg.report_dir, formats=formats, figures=True)
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="rttbench",
                     description="RTT-classified anomaly detection workbench")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory "
                                      "(data dir, or report dir for "
                                      "evaluate/report)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("baseline", help="measure the unstressed system and "
                                    "write the anomalous threshold")
    sub.add_parser("calibrate", help="tune stressor inflations to the "
                                     "97 percent purity gate")
    gen = sub.add_parser("generate", help="simulate scenarios into dataset CSVs")
    gen.add_argument("--scenarios", help="comma-separated stressor kinds")

    ing = sub.add_parser("ingest", help="build a dataset from captured "
                                        "vmstat/iostat/netstat output")
    ing.add_argument("--vmstat", required=True)
    ing.add_argument("--iostat", required=True)
    ing.add_argument("--netstat", required=True)
    ing.add_argument("--rtt", required=True, help="client RTT CSV "
                                                  "(timestamp,rtt_ms)")
    ing.add_argument("--kind", required=True)
    ing.add_argument("--level", required=True)
    ing.add_argument("--out", required=True, dest="ingest_out")
    ing.add_argument("--interval", type=float, default=2.0,
                     help="vmstat/iostat sampling interval seconds")
    ing.add_argument("--netstat-interval", type=float, default=6.0)

    tr = sub.add_parser("train", help="train models on the pooled split")
    tr.add_argument("--models", help="comma-separated model kinds")

    ev = sub.add_parser("evaluate", help="evaluate trained models")
    ev.add_argument("--format", choices=("json", "csv"), default="json")

    rep = sub.add_parser("report", help="render tables and figures")
    rep.add_argument("--format", choices=("json", "csv"), default="csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.out:
            if args.command in ("evaluate", "report"):
                cfg = dataclasses.replace(cfg, report_dir=args.out)
            else:
                cfg = dataclasses.replace(cfg, data_dir=args.out)
        if getattr(args, "models", None):
            cfg = dataclasses.replace(cfg, models=args.models.split(","))
        if getattr(args, "scenarios", None):
            cfg = dataclasses.replace(cfg, scenarios=args.scenarios.split(","))

        if args.command == "baseline":
            return cmd_baseline(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "ingest":
            args.out = args.ingest_out
            return cmd_ingest(cfg, args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.format)
        if args.command == "report":
            return cmd_report(cfg, args.format)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, DomainError, SchemaError, ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RttbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
