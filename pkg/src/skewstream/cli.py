"""Command line entry point: ``skewstream run | generate | evaluate``.

Every flag has a config-file equivalent (``run:``, ``generate:`` and
``evaluate:`` sections of the YAML config); flags win over the file.
Log verbosity is read from the ``SKEWSTREAM_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .config import DetectorConfig
from .engine import StreamEngine
from .evaluation import (pr_auc, read_scores, read_truth, roc_auc, segmentation_accuracy,
                         window_labels, write_metrics, write_scores)
from .exceptions import AlignmentError, ConfigError, UndefinedMetricError
from .ingestion import Dictionaries, EventReader, IngestStats, parse_schema, window_stream
from .synthgen import load_scenario, sample_stream, write_stream

log = logging.getLogger("skewstream")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ALIGNMENT = 2
EXIT_UNDEFINED = 3

RUN_KEYS = ("input", "output", "snapshot_in", "snapshot_out", "snapshot_every", "seed",
            "max_windows", "truth_out", "latency_out", "start_time")


def _setup_logging():
    level = os.environ.get("SKEWSTREAM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load_yaml(path) -> tuple[str, dict]:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return text, data


def _merge(section: dict, args: argparse.Namespace, keys) -> dict:
    out = dict(section or {})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _labeling_rule(theta: float) -> str:
    if theta <= 0:
        return "window is positive if it contains any attack event"
    return f"window is positive if at least {theta:g} of its events are attacks"


def _parse_labeling(value) -> float:
    if value is None or str(value).strip().lower() in ("any", "any-attack", "default"):
        return 0.0
    try:
        theta = float(value)
    except ValueError:
        raise ConfigError(f"labeling must be 'any' or a fraction in [0, 1], got {value!r}")
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"labeling fraction must lie in [0, 1], got {theta}")
    return theta


# -- run ------------------------------------------------------------------

def _restore(engine: StreamEngine, n_categorical: int):
    extra = engine.extra or {}
    dicts = Dictionaries(n_categorical, extra.get("dictionaries"))
    origin = extra.get("origin")
    last_time = extra.get("last_time")
    last_time = -math.inf if last_time is None else float(last_time)
    return dicts, origin, last_time


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run needs --config")
    text, data = _load_yaml(args.config)
    schema, bindings = parse_schema(text)
    opts = _merge(data.get("run"), args, RUN_KEYS)
    for key in ("input", "output"):
        if not opts.get(key):
            raise ConfigError(f"run needs --{key} (or run.{key} in the config)")
    detector = dict(data.get("detector") or {})

    if opts.get("snapshot_in"):
        engine = StreamEngine.load(opts["snapshot_in"])
        cfg = engine.config
        dicts, origin, last_time = _restore(engine, schema.n_categorical)
        log.info("resuming at window %d", engine.windows_seen)
    else:
        cfg = DetectorConfig.from_dict(detector)
        engine = StreamEngine(cfg, seed=opts.get("seed"))
        dicts, last_time = Dictionaries(schema.n_categorical), -math.inf
        origin = opts.get("start_time")
    if origin is not None:
        origin = float(origin)
    skip_before = origin + engine.windows_seen * cfg.tau if origin is not None and \
        engine.windows_seen else None

    reader = EventReader(bindings, schema, dicts, clamp_epsilon=cfg.clamp_epsilon,
                         skip_before=skip_before, last_time=last_time)
    windows = window_stream(reader.read_path(opts["input"]), cfg.tau, start=origin,
                            tick_seconds=cfg.tick_seconds, n_categorical=schema.n_categorical,
                            n_continuous=schema.n_continuous, first_index=engine.windows_seen,
                            vocab_sizes=lambda: dicts.sizes, stats=reader.stats)

    max_windows = opts.get("max_windows")
    every = int(opts.get("snapshot_every") or 0)
    snap_out = opts.get("snapshot_out")
    records, truth, latency = [], [], []
    processed_last_time = last_time
    for w in windows:
        if max_windows is not None and len(records) >= int(max_windows):
            break
        if origin is None:
            origin = w.start_time - w.window_index * cfg.tau
        t0 = time.perf_counter()
        rec = engine.process(w)
        latency.append((w.window_index, len(w), time.perf_counter() - t0))
        records.append(rec)
        n_attack = int(w.labels.sum()) if w.labels is not None else 0
        truth.append((w.window_index, len(w), n_attack))
        if len(w):
            processed_last_time = float(w.times[-1])
        engine.extra = {"dictionaries": dicts.values, "origin": origin,
                        "last_time": None if math.isinf(processed_last_time)
                        else processed_last_time}
        if snap_out and every and engine.windows_seen % every == 0:
            engine.save(snap_out)

    with open(opts["output"], "w", newline="") as fh:
        write_scores(records, fh)
    if opts.get("truth_out"):
        with open(opts["truth_out"], "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["window_index", "n_events", "n_attack", "is_anomaly"])
            for i, n, a in truth:
                out.writerow([i, n, a, int(a > 0)])
    if opts.get("latency_out"):
        with open(opts["latency_out"], "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["window_index", "n_events", "seconds"])
            for i, n, s in latency:
                out.writerow([i, n, f"{s:.6f}"])
    if snap_out:
        engine.save(snap_out)

    stats: IngestStats = reader.stats
    meta = {
        "detector": cfg.to_dict(),
        "schema": {"timestamp": bindings.timestamp, "timestamp_format": bindings.timestamp_format,
                   "categorical": bindings.categorical, "continuous": bindings.continuous,
                   "label": bindings.label, "delimiter": bindings.delimiter},
        "run": {k: opts.get(k) for k in RUN_KEYS},
        "anomaly_score": "bits per event" if cfg.per_event_normalization else "total bits",
        "window_labeling": _labeling_rule(0.0),
        "ingest": {"rows": stats.rows, "accepted": stats.accepted, "rejected": stats.rejected,
                   "out_of_order": stats.out_of_order, "skipped": stats.skipped,
                   "rejection_rate": stats.rejection_rate},
        "windows": len(records),
        "regimes": engine.description.R,
        "switches": engine.description.G,
    }
    with open(f"{opts['output']}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if stats.rows:
        log.info("rejected %d of %d rows (%.2f%%)", stats.rejected + stats.out_of_order,
                 stats.rows, 100 * stats.rejection_rate)
    print(f"processed {len(records)} windows, {stats.accepted} events; "
          f"R={engine.description.R} G={engine.description.G}; "
          f"rejection rate {stats.rejection_rate:.4f}")
    return EXIT_OK


# -- generate -------------------------------------------------------------

def cmd_generate(args) -> int:
    section = {}
    if args.config:
        section = _load_yaml(args.config)[1].get("generate") or {}
    opts = _merge(section, args, ("scenario", "seed", "out"))
    if not opts.get("scenario") or not opts.get("out"):
        raise ConfigError("generate needs --scenario and --out")
    t0 = time.perf_counter()
    scenario = load_scenario(opts["scenario"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    sample = sample_stream(scenario, np.random.default_rng(opts.get("seed")))
    write_stream(sample, scenario, out / "events.csv", out / "truth.csv")
    with open(out / "config.yaml", "w") as fh:
        yaml.safe_dump(scenario.run_config(), fh, sort_keys=False)
    n_events = sum(len(w) for w in sample.windows)
    print(f"wrote {n_events} events in {len(sample.windows)} windows to {out} "
          f"({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


# -- evaluate -------------------------------------------------------------

def cmd_evaluate(args) -> int:
    section = {}
    if args.config:
        section = _load_yaml(args.config)[1].get("evaluate") or {}
    opts = _merge(section, args, ("scores", "truth", "labeling", "metrics_out"))
    if not opts.get("scores") or not opts.get("truth"):
        raise ConfigError("evaluate needs --scores and --truth")
    theta = _parse_labeling(opts.get("labeling"))
    scores = read_scores(opts["scores"])
    truth = read_truth(opts["truth"])
    if [s["window_index"] for s in scores] != [t["window_index"] for t in truth]:
        raise AlignmentError(f"{len(scores)} score rows and {len(truth)} truth rows "
                             "do not cover the same windows")
    if truth and all("n_events" in t for t in truth):
        groups = [[True] * t["n_attack"] + [False] * (t["n_events"] - t["n_attack"])
                  for t in truth]
        labels = window_labels(groups, theta)
        rule = _labeling_rule(theta)
    else:
        labels = [t["is_anomaly"] for t in truth]
        rule = "per-window truth file (is_anomaly column)"
    values = [s["anomaly_score"] for s in scores]
    print(f"labeling: {rule}")
    metrics = {"windows": len(scores), "positives": int(sum(labels))}
    metrics["roc_auc"] = roc_auc(values, labels)
    metrics["pr_auc"] = pr_auc(values, labels)
    if truth and all(t["regime_id"] is not None for t in truth):
        metrics["segmentation_accuracy"] = segmentation_accuracy(
            [s["chosen_regime_id"] for s in scores], [t["regime_id"] for t in truth], len(truth))
    for k, v in metrics.items():
        print(f"{k}: {v:.6f}" if isinstance(v, float) else f"{k}: {v}")
    out = opts.get("metrics_out") or f"{opts['scores']}.metrics.csv"
    metrics["labeling"] = rule
    write_metrics(metrics, out)
    return EXIT_OK


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skewstream",
                                description="Streaming anomaly detection over skewed event logs.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="stream an event log through the detector")
    r.add_argument("--config", required=True, help="YAML with schema/detector/run sections")
    r.add_argument("--input", help="delimited event log (.gz/.bz2/.xz or - for stdin)")
    r.add_argument("--output", help="per-window score file")
    r.add_argument("--snapshot-in", dest="snapshot_in", help="resume from this snapshot")
    r.add_argument("--snapshot-out", dest="snapshot_out", help="write the final snapshot here")
    r.add_argument("--snapshot-every", dest="snapshot_every", type=int,
                   help="also snapshot every N windows")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-windows", dest="max_windows", type=int,
                   help="stop after this many windows")
    r.add_argument("--start-time", dest="start_time", type=float,
                   help="origin of the window grid in epoch seconds (default: first event)")
    r.add_argument("--truth-out", dest="truth_out",
                   help="write per-window event and attack counts here")
    r.add_argument("--latency-out", dest="latency_out",
                   help="write per-window processing time here")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("generate", help="sample a labelled synthetic stream")
    g.add_argument("--config", help="YAML with a generate section")
    g.add_argument("--scenario", help="scenario YAML")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score detector output against truth")
    e.add_argument("--config", help="YAML with an evaluate section")
    e.add_argument("--scores")
    e.add_argument("--truth")
    e.add_argument("--labeling", help="'any' (default) or minimum attack fraction per window")
    e.add_argument("--metrics-out", dest="metrics_out",
                   help="metric,value file (default: <scores>.metrics.csv)")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: undefined metric: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except AlignmentError as exc:
        print(f"error: alignment: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
