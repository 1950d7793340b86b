"""Command-line interface.

Commands::

    sodesn synth-data   generate a correlated synthetic sensor CSV
    sodesn train        train a fault-detection network from a CSV
    sodesn monitor      run the monitoring loop with a trained bundle
    sodesn experiment   run one of the benchmark scenarios
    sodesn config show  print every configuration default

Configuration is a JSON object with flat dotted keys (see ``config show``);
``--set key=value`` overrides file values.  Every invocation writes a
manifest (resolved config, seed, input fingerprints, tool version,
timestamps) into the run directory, sufficient to reproduce the run.

Exit codes: 0 success, 2 usage, 3 config error, 4 data error,
5 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_bundle, save_bundle, series_fingerprint
from .data import Fault, FaultSchedule, SeriesSet, diurnal_base, load_csv, save_csv, synthesize_correlated
from .errors import ConfigError, DataError, NumericError, SodesnError
from .estimators import SodesnFaultDetector
from .experiments import SCENARIOS, ExperimentConfig, default_config, run_experiment
from .detection import ThresholdPolicy, run_monitor

RUN_DIR_ENV = "SODESN_RUN_DIR"

TRAIN_DEFAULTS = {
    "topology.rows": 2,
    "topology.cols": 4,
    "topology.edge_list": None,
    "reservoir.units_per_node": 15,
    "reservoir.density_local": 0.2,
    "reservoir.density_cross": 0.1,
    "reservoir.spectral_radius": 0.66,
    "reservoir.teacher_mode": "linear",
    "train.link_quality": 0.9,
    "train.washout": "auto",
    "train.noise_amplitude": 1.0,
    "train.sv_cutoff": 1e-10,
    "train.ridge": 0.0,
    "train.calibration_fraction": 0.25,
    "monitor.threshold_mode": "windowed",
    "monitor.window": 96,
    "monitor.safety_factor": 1.2,
    "seed": 0,
}

EXPERIMENT_DEFAULTS = {
    f"experiment.{k}": v
    for k, v in {
        "rows": 2,
        "cols": 4,
        "units_per_node": 15,
        "density_local": 0.2,
        "density_cross": 0.1,
        "spectral_radius": 0.66,
        "link_quality": 0.9,
        "teacher_mode": "linear",
        "noise_amplitude": 1.0,
        "sv_cutoff": 1e-10,
        "ridge": 0.0,
        "train_points": 10000,
        "test_points": 2000,
        "eval_washout": 200,
        "folds": 3,
        "train_sizes": [300, 1000, 3000, 10000],
        "unit_sweep": [3, 15, 27, 39],
        "link_qualities": [0.10, 0.50, 0.90, 0.98],
        "fault_counts": [0, 16, 50, 60],
        "feedback_modes": ["passthrough", "replace"],
        "oracle_faults": True,
        "esn_units": 120,
        "csv_path": None,
        "synth_max_shift": 2,
        "synth_noise": 0.10,
    }.items()
}


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object of dotted keys")
    return doc


def _parse_override(text: str) -> tuple:
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed
    return key.strip(), value


def _resolve(defaults: dict, config_file, overrides) -> dict:
    resolved = dict(defaults)
    if config_file:
        for key, value in _load_config_file(config_file).items():
            if key not in resolved:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[key] = value
    for item in overrides or []:
        key, value = _parse_override(item)
        if key not in resolved:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = value
    return resolved


def _run_dir(args) -> Path:
    run_dir = Path(args.run_dir or os.environ.get(RUN_DIR_ENV, "runs"))
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Manifest:
    """Per-invocation run record; started at entry, finished at exit."""

    def __init__(self, command: str, args_list, config: dict, seed):
        self.doc = {
            "command": command,
            "argv": list(args_list),
            "config": config,
            "seed": seed,
            "inputs": {},
            "outputs": [],
            "tool_version": __version__,
            "started": datetime.now(timezone.utc).isoformat(),
        }

    def add_input(self, path):
        self.doc["inputs"][str(path)] = _fingerprint(path)

    def add_output(self, path):
        self.doc["outputs"].append(str(path))

    def write(self, path):
        self.doc["finished"] = datetime.now(timezone.utc).isoformat()
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=2)
            fh.write("\n")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_synth_data(args, argv) -> int:
    run_dir = _run_dir(args)
    rng = np.random.default_rng(args.seed)
    base = diurnal_base(args.steps + 2 * args.max_shift, interval_minutes=args.interval, rng=rng)
    series = synthesize_correlated(
        base,
        args.sensors,
        max_shift_steps=args.max_shift,
        noise_fraction=args.noise_fraction,
        rng=rng,
        interval_minutes=args.interval,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(series, out)
    manifest = _Manifest(
        "synth-data",
        argv,
        {
            "sensors": args.sensors,
            "steps": args.steps,
            "interval": args.interval,
            "max_shift": args.max_shift,
            "noise_fraction": args.noise_fraction,
        },
        args.seed,
    )
    manifest.add_output(out)
    manifest.write(run_dir / "synth-data_manifest.json")
    print(f"wrote {out} ({series.n_steps} steps x {series.n_sensors} sensors)")
    return 0


def cmd_train(args, argv) -> int:
    run_dir = _run_dir(args)
    config = _resolve(TRAIN_DEFAULTS, args.config, args.set)
    if args.seed is not None:
        config["seed"] = args.seed
    series = load_csv(args.data)
    edge_list = config["topology.edge_list"]
    edges = None
    if edge_list:
        from .topology import load_edge_list

        edges = load_edge_list(edge_list).undirected_edges()
    detector = SodesnFaultDetector(
        rows=config["topology.rows"],
        cols=config["topology.cols"],
        edges=edges,
        units_per_node=config["reservoir.units_per_node"],
        density_local=config["reservoir.density_local"],
        density_cross=config["reservoir.density_cross"],
        spectral_radius=config["reservoir.spectral_radius"],
        teacher_mode=config["reservoir.teacher_mode"],
        link_quality=config["train.link_quality"],
        washout=config["train.washout"],
        noise_amplitude=config["train.noise_amplitude"],
        sv_cutoff=config["train.sv_cutoff"],
        ridge=config["train.ridge"],
        calibration_fraction=config["train.calibration_fraction"],
        threshold_mode=config["monitor.threshold_mode"],
        window=config["monitor.window"],
        safety_factor=config["monitor.safety_factor"],
        random_state=config["seed"],
    )
    try:
        detector.fit(series.samples, sensor_names=series.names)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericError(str(exc)) from exc
    out = Path(args.out) if args.out else run_dir / "bundle.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    training_meta = {
        "series_fingerprint": series_fingerprint(series.samples, series.names),
        "data_path": str(args.data),
        "washout": detector.washout_,
        "noise": {"amplitude": detector.noise_.amplitude, "seed": detector.noise_.seed},
        "sv_cutoff": config["train.sv_cutoff"],
        "ridge": config["train.ridge"],
        "link_quality": config["train.link_quality"],
        "seed": config["seed"],
        "policy": {
            "mode": detector.policy_.mode,
            "thresholds": [float(t) for t in detector.policy_.thresholds],
            "window": detector.policy_.window,
        },
    }
    save_bundle(detector.net_, out, training_meta=training_meta)
    manifest = _Manifest("train", argv, config, config["seed"])
    manifest.add_input(args.data)
    manifest.add_output(out)
    manifest.write(run_dir / "train_manifest.json")
    print(f"trained bundle written to {out}")
    return 0


def _parse_injection(text: str) -> Fault:
    try:
        sensor, start = text.split(":", 1)
        return Fault(sensor=int(sensor), start=int(start))
    except ValueError as exc:
        raise ConfigError(f"--inject-zero expects SENSOR:STEP, got {text!r}") from exc


def cmd_monitor(args, argv) -> int:
    run_dir = _run_dir(args)
    net = load_bundle(args.bundle)
    if not hasattr(net, "n_nodes"):
        raise ConfigError(f"{args.bundle} holds an ESN bundle; monitor needs a sodesn bundle")
    if net.normalization is None:
        raise ConfigError(f"{args.bundle} is untrained (no normalization section)")
    series = load_csv(args.data)
    if net.sensor_names is not None and tuple(series.names) != tuple(net.sensor_names):
        raise ConfigError(
            f"sensor sets differ: bundle has {list(net.sensor_names)},"
            f" data has {list(series.names)}"
        )
    meta = net.training_meta or {}
    policy_doc = meta.get("policy")
    if policy_doc is None:
        raise ConfigError("bundle carries no threshold policy; retrain with current tool")
    policy = ThresholdPolicy(
        mode=policy_doc["mode"],
        thresholds=np.asarray(policy_doc["thresholds"], dtype=float),
        window=policy_doc["window"],
    )
    schedule = None
    injected = [_parse_injection(t) for t in args.inject_zero or []]
    if injected:
        from .data import apply_faults

        schedule = FaultSchedule(tuple(injected))
        truth = series
        series = apply_faults(series, schedule)
    else:
        truth = None
    link_quality = meta.get("link_quality", 1.0)
    report = run_monitor(
        net,
        series,
        policy=policy,
        feedback=args.feedback,
        link_quality=link_quality,
        rng=np.random.default_rng(args.seed),
        truth=truth,
        score_washout=args.score_washout,
    )
    prefix = args.out_prefix or "monitor"
    trace_path = run_dir / f"{prefix}_trace.csv"
    summary_path = run_dir / f"{prefix}_summary.json"
    report.write_trace_csv(trace_path)
    report.write_summary(summary_path)
    manifest = _Manifest(
        "monitor",
        argv,
        {
            "feedback": args.feedback,
            "score_washout": args.score_washout,
            "link_quality": link_quality,
            "injected": [[f.sensor, f.start] for f in injected],
        },
        args.seed,
    )
    manifest.add_input(args.bundle)
    manifest.add_input(args.data)
    manifest.add_output(trace_path)
    manifest.add_output(summary_path)
    manifest.write(run_dir / f"{prefix}_manifest.json")
    flagged = report.summary_dict()["flagged_sensors"]
    print(f"monitored {report.n_steps} steps; flagged sensors: {flagged or 'none'}")
    print(f"trace: {trace_path}\nsummary: {summary_path}")
    return 0


def cmd_experiment(args, argv) -> int:
    run_dir = _run_dir(args)
    base = default_config(args.scenario, seed=args.seed, full_scale=args.full_scale)
    overrides = {}
    items = list(_load_config_file(args.config).items()) if args.config else []
    items += [_parse_override(t) for t in args.set or []]
    for key, value in items:
        if key not in EXPERIMENT_DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        field = key.split(".", 1)[1]
        if isinstance(getattr(base, field), tuple) and isinstance(value, list):
            value = tuple(value)
        overrides[field] = value
    config = replace(base, jobs=args.jobs, **overrides)
    result = run_experiment(config)
    stem = f"{args.scenario}_seed{args.seed}"
    records_path = run_dir / f"{stem}_records.csv"
    summary_path = run_dir / f"{stem}_summary.json"
    plot_path = run_dir / f"{stem}_plot.csv"
    result.write_records_csv(records_path)
    result.write_summary_json(summary_path)
    result.write_plot_csv(plot_path)
    manifest = _Manifest(
        "experiment", argv, {k: _jsonable(v) for k, v in asdict(config).items()}, args.seed
    )
    if config.csv_path:
        manifest.add_input(config.csv_path)
    for p in (records_path, summary_path, plot_path):
        manifest.add_output(p)
    manifest.write(run_dir / f"{stem}_manifest.json")
    print(f"{args.scenario}: {len(result.records)} records in {result.duration_seconds:.1f}s")
    print(f"records: {records_path}\nsummary: {summary_path}\nplot data: {plot_path}")
    return 0


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def cmd_config_show(args, argv) -> int:
    print(json.dumps({**TRAIN_DEFAULTS, **EXPERIMENT_DEFAULTS}, indent=2))
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sodesn",
        description="Distributed echo state networks for sensor fault detection",
        epilog="exit codes: 0 ok, 2 usage, 3 config, 4 data, 5 numeric",
    )
    parser.add_argument("--version", action="version", version=f"sodesn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a synthetic correlated sensor CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--sensors", type=int, default=8)
    p.add_argument("--steps", type=int, default=12000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--interval", type=float, default=15.0, help="sampling interval (minutes)")
    p.add_argument("--max-shift", type=int, default=2, help="max copy shift in samples")
    p.add_argument("--noise-fraction", type=float, default=0.10)
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train a fault-detection network from a CSV")
    p.add_argument("--data", required=True, help="training CSV (fault-free readings)")
    p.add_argument("--out", default=None, help="bundle path (default: <run-dir>/bundle.json)")
    p.add_argument("--config", default=None, help="JSON config file with dotted keys")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int, default=None, help="overrides config seed")
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("monitor", help="run fault monitoring with a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--feedback", choices=("replace", "passthrough"), default="replace")
    p.add_argument(
        "--inject-zero",
        action="append",
        metavar="SENSOR:STEP",
        help="inject a stuck-at-zero fault (repeatable)",
    )
    p.add_argument("--score-washout", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="seed for simulated link outcomes")
    p.add_argument("--out-prefix", default=None)
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("experiment", help="run a benchmark scenario")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--jobs", type=int, default=1, help="parallel configuration points")
    p.add_argument("--full-scale", action="store_true", help="original training volumes")
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("config", help="configuration utilities")
    config_sub = p.add_subparsers(dest="config_command", required=True)
    show = config_sub.add_parser("show", help="print all defaults as JSON")
    show.set_defaults(func=cmd_config_show)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"error: category=config: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: category=data: {exc}", file=sys.stderr)
        return 4
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"error: category=numeric: {exc}", file=sys.stderr)
        return 5
    except SodesnError as exc:  # pragma: no cover - defensive
        print(f"error: category={exc.category}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
