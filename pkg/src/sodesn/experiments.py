"""Declarative harness for the four benchmark scenarios.

Scenarios
---------
- ``learning_curve``: prediction quality as a function of training-set size
  (incremental cross validation, fresh reservoir per point).
- ``reservoir_sweep``: internal units per node from 3 to 39, same seeds
  across the sweep so differences are attributable to unit count only.
- ``baseline_compare``: distributed network vs one centralized ESN per
  predicted sensor across link qualities, paired on data, faults and
  seed-derived link streams.
- ``robustness``: large grid with an increasing number of stuck-at-zero
  sensors, scored on the surviving sensors under passthrough and replace
  feedback.

Every record is reproducible from (config, seed): all randomness derives
from integer-keyed seed sequences, configuration points are independent
jobs executed through a work queue (``jobs`` sets the parallelism), and
results are assembled in job order regardless of scheduling.  Result CSVs
contain no timestamps, so a rerun is byte-identical; wall-clock durations
go to the summary document only.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .baseline import esn_predict, init_esn, train_esn
from .data import (
    Fault,
    FaultSchedule,
    SeriesSet,
    apply_faults,
    default_washout,
    diurnal_base,
    fit_normalization,
    load_csv,
    split_incremental_cv,
    synthesize_correlated,
)
from .detection import calibrate_thresholds, run_monitor
from .errors import ConfigError
from .metrics import max_abs_error, nrmse
from .reservoir import NodeSpec, init_sodesn
from .topology import build_grid
from .training import NoiseSpec, predict_series, train_fault_detectors

__all__ = [
    "SCENARIOS",
    "ExperimentConfig",
    "ExperimentResult",
    "default_config",
    "run_experiment",
    "run_learning_curve",
    "run_reservoir_sweep",
    "run_baseline_compare",
    "run_robustness",
]

SCENARIOS = ("learning_curve", "reservoir_sweep", "baseline_compare", "robustness")

# Stream ids keying the deterministic per-purpose random sequences.
_DATA, _NET, _TRAIN, _EVAL, _FAULTS, _ESN, _NOISE, _CAL = range(8)


@dataclass
class ExperimentConfig:
    """All knobs of one experiment run; every field has an explicit value
    once resolved, and the seed is mandatory."""

    scenario: str
    seed: int
    rows: int = 2
    cols: int = 4
    units_per_node: int = 15
    density_local: float = 0.2
    density_cross: float = 0.1
    spectral_radius: float = 0.66
    link_quality: float = 0.9
    teacher_mode: str = "linear"
    noise_amplitude: float = 1.0
    sv_cutoff: float = 1e-10
    ridge: float = 0.0
    train_points: int = 10_000
    test_points: int = 2_000
    eval_washout: int = 200
    folds: int = 3
    train_sizes: tuple = (300, 1_000, 3_000, 10_000)
    unit_sweep: tuple = (3, 15, 27, 39)
    link_qualities: tuple = (0.10, 0.50, 0.90, 0.98)
    fault_counts: tuple = (0, 16, 50, 60)
    feedback_modes: tuple = ("passthrough", "replace")
    oracle_faults: bool = True
    esn_units: int = 120
    csv_path: str | None = None
    synth_max_shift: int = 2
    synth_noise: float = 0.10
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}"
            )
        if self.seed is None:
            raise ConfigError("experiments require an explicit seed")


def default_config(scenario: str, seed: int, full_scale: bool = False) -> ExperimentConfig:
    """Desk-scale defaults per scenario; ``full_scale`` restores the original
    training volumes (30k points, 16665-point test windows, 10 folds)."""
    cfg = ExperimentConfig(scenario=scenario, seed=seed)
    if scenario == "baseline_compare":
        cfg = replace(cfg, folds=5)
    if scenario == "robustness":
        cfg = replace(cfg, rows=10, cols=10, train_points=8_000, test_points=2_500)
    if full_scale:
        cfg = replace(
            cfg,
            train_points=30_000,
            test_points=16_665,
            folds=10,
            train_sizes=(300, 1_000, 3_000, 10_000, 30_000),
        )
    return cfg


@dataclass
class ExperimentResult:
    scenario: str
    seed: int
    config: ExperimentConfig
    columns: tuple
    records: list
    duration_seconds: float

    def aggregate(self, group_keys, value: str = "nrmse", where=None) -> dict:
        """Mean of ``value`` grouped by ``group_keys`` (dict key -> mean)."""
        sums: dict = {}
        counts: dict = {}
        for rec in self.records:
            if where is not None and not where(rec):
                continue
            key = tuple(rec[k] for k in group_keys)
            sums[key] = sums.get(key, 0.0) + rec[value]
            counts[key] = counts.get(key, 0) + 1
        return {k: sums[k] / counts[k] for k in sums}

    def write_records_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for rec in self.records:
                writer.writerow([_cell(rec[c]) for c in self.columns])

    def write_summary_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "scenario": self.scenario,
                    "seed": self.seed,
                    "config": asdict(self.config),
                    "n_records": len(self.records),
                    "duration_seconds": self.duration_seconds,
                    "aggregates": self._summary_aggregates(),
                },
                fh,
                indent=2,
            )
            fh.write("\n")

    def _summary_aggregates(self) -> list:
        keys = _PLOT_KEYS[self.scenario]
        agg = self.aggregate(keys)
        return [
            {**dict(zip(keys, k)), "mean_nrmse": v} for k, v in sorted(agg.items())
        ]

    def write_plot_csv(self, path) -> None:
        """x/y columns matching the figures: NRMSE against the scenario's
        swept quantity."""
        keys = _PLOT_KEYS[self.scenario]
        agg = self.aggregate(keys)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(keys) + ["mean_nrmse"])
            for key, value in sorted(agg.items()):
                writer.writerow([_cell(v) for v in key] + [_cell(value)])


_PLOT_KEYS = {
    "learning_curve": ("train_size",),
    "reservoir_sweep": ("units_per_node",),
    "baseline_compare": ("link_quality", "model"),
    "robustness": ("failed_count", "mode"),
}


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    return value


def _rng(config: ExperimentConfig, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, *key]))


def _seed_seq(config: ExperimentConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed, *key])


def _noise_seed(config: ExperimentConfig, *key) -> int:
    return int(_seed_seq(config, _NOISE, *key).generate_state(1)[0])


def _scenario_series(config: ExperimentConfig, n_steps: int, n_sensors: int, *key) -> SeriesSet:
    """Correlated sensor set: CSV when configured, otherwise shifted noisy
    copies of a synthetic diurnal base."""
    if config.csv_path is not None:
        series = load_csv(config.csv_path)
        if series.n_sensors < n_sensors:
            raise ConfigError(
                f"{config.csv_path} has {series.n_sensors} sensors, need {n_sensors}"
            )
        if series.n_steps < n_steps:
            raise ConfigError(
                f"{config.csv_path} has {series.n_steps} steps, need {n_steps}"
            )
        return SeriesSet(
            names=series.names[:n_sensors],
            samples=series.samples[:n_steps, :n_sensors],
            interval_minutes=series.interval_minutes,
            start=series.start,
        )
    rng = _rng(config, _DATA, *key)
    base = diurnal_base(n_steps + 2 * config.synth_max_shift, rng=rng)
    return synthesize_correlated(
        base,
        n_sensors,
        max_shift_steps=config.synth_max_shift,
        noise_fraction=config.synth_noise,
        rng=rng,
    )


def _train_sodesn(config, topology, units, train_series, *, net_key, train_key):
    """Normalize, build and train a fresh network on one training window."""
    norm = fit_normalization(train_series)
    spec = NodeSpec(inputs_per_node=1, internal_per_node=units, outputs_per_node=1)
    net = init_sodesn(
        topology,
        spec,
        density_local=config.density_local,
        density_cross=config.density_cross,
        rho_target=config.spectral_radius,
        rng=_rng(config, _NET, *net_key),
    )
    net.normalization = norm
    net.sensor_names = train_series.names
    net.teacher_mode = config.teacher_mode
    noise = NoiseSpec(
        amplitude=config.noise_amplitude, seed=_noise_seed(config, *train_key)
    )
    net = train_fault_detectors(
        net,
        norm.transform(train_series.samples),
        noise,
        washout=default_washout(train_series.n_steps),
        link_quality=config.link_quality,
        rng=_rng(config, _TRAIN, *train_key),
        sv_cutoff=config.sv_cutoff,
        ridge=config.ridge,
    )
    return net


def _eval_per_sensor(config, net, test_series, link_quality, *, eval_key) -> list:
    """Per-sensor test NRMSE with the evaluated sensor's input substituted by
    fresh noise, reproducing the training condition for that readout."""
    norm = net.normalization
    test_norm = norm.transform(test_series.samples)
    w = config.eval_washout
    if w >= test_series.n_steps:
        raise ConfigError("eval_washout leaves no scored test samples")
    rngs = _seed_seq(config, _EVAL, *eval_key).spawn(net.n_inputs)
    noise = NoiseSpec(
        amplitude=config.noise_amplitude, seed=_noise_seed(config, _EVAL, *eval_key)
    )
    rows = []
    for sensor in range(net.n_inputs):
        preds = predict_series(
            net,
            test_norm,
            substitute=(sensor, noise),
            link_quality=link_quality,
            rng=np.random.default_rng(rngs[sensor]),
        )
        col = preds[w:, net.output_index_of_sensor(sensor)]
        truth = test_norm[w:, sensor]
        scale = norm.scale[sensor]
        rows.append(
            {
                "sensor": test_series.names[sensor],
                "nrmse": nrmse(col, truth),
                "max_abs_error": scale * max_abs_error(col, truth),
            }
        )
    return rows


def _execute_jobs(config: ExperimentConfig, jobs: list, worker) -> list:
    if config.jobs <= 1:
        batches = [worker(config, job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            batches = list(pool.map(worker, [config] * len(jobs), jobs))
    records = []
    for batch in batches:  # job order, not completion order
        records.extend(batch)
    return records


# ----------------------------------------------------------------------
# learning curve
# ----------------------------------------------------------------------


def _learning_job(config: ExperimentConfig, job) -> list:
    size_idx, fold, train_series, test_series = job
    size = config.train_sizes[size_idx]
    topology = build_grid(config.rows, config.cols)
    net = _train_sodesn(
        config,
        topology,
        config.units_per_node,
        train_series,
        net_key=(size_idx, fold),
        train_key=(size_idx, fold),
    )
    rows = _eval_per_sensor(
        config, net, test_series, config.link_quality, eval_key=(size_idx, fold)
    )
    return [
        {"train_size": size, "fold": fold, "seed": config.seed, **r} for r in rows
    ]


def run_learning_curve(config: ExperimentConfig) -> ExperimentResult:
    """NRMSE as a function of training-set size; a fresh network is drawn
    for every (size, fold) point."""
    started = time.perf_counter()
    n_sensors = config.rows * config.cols
    max_train = max(config.train_sizes)
    stride = max(96, config.test_points // 2)
    total = max_train + config.test_points + (config.folds - 1) * stride
    series = _scenario_series(config, total, n_sensors)
    splits = split_incremental_cv(
        series, config.train_sizes, config.test_points, config.folds
    )
    jobs = [
        (config.train_sizes.index(s.train_size), s.fold, s.train, s.test) for s in splits
    ]
    records = _execute_jobs(config, jobs, _learning_job)
    return ExperimentResult(
        scenario=config.scenario,
        seed=config.seed,
        config=config,
        columns=("train_size", "fold", "seed", "sensor", "nrmse", "max_abs_error"),
        records=records,
        duration_seconds=time.perf_counter() - started,
    )


# ----------------------------------------------------------------------
# reservoir size sweep
# ----------------------------------------------------------------------


def _sweep_job(config: ExperimentConfig, job) -> list:
    units_idx, fold, train_series, test_series = job
    units = config.unit_sweep[units_idx]
    topology = build_grid(config.rows, config.cols)
    # Net/train/eval streams are keyed by fold only: identical seeds across
    # the sweep leave unit count as the only controlled variable.
    net = _train_sodesn(
        config, topology, units, train_series, net_key=(fold,), train_key=(fold,)
    )
    rows = _eval_per_sensor(
        config, net, test_series, config.link_quality, eval_key=(fold,)
    )
    return [
        {"units_per_node": units, "fold": fold, "seed": config.seed, **r} for r in rows
    ]


def run_reservoir_sweep(config: ExperimentConfig) -> ExperimentResult:
    """One trained and scored run per units-per-node value per fold."""
    started = time.perf_counter()
    n_sensors = config.rows * config.cols
    stride = max(96, config.test_points // 2)
    total = config.train_points + config.test_points + (config.folds - 1) * stride
    series = _scenario_series(config, total, n_sensors)
    splits = split_incremental_cv(
        series, [config.train_points], config.test_points, config.folds
    )
    jobs = [
        (u, s.fold, s.train, s.test)
        for u in range(len(config.unit_sweep))
        for s in splits
    ]
    records = _execute_jobs(config, jobs, _sweep_job)
    return ExperimentResult(
        scenario=config.scenario,
        seed=config.seed,
        config=config,
        columns=("units_per_node", "fold", "seed", "sensor", "nrmse", "max_abs_error"),
        records=records,
        duration_seconds=time.perf_counter() - started,
    )


# ----------------------------------------------------------------------
# centralized baseline comparison
# ----------------------------------------------------------------------


def _baseline_job(config: ExperimentConfig, job) -> list:
    q_idx, repeat, train_series, test_series = job
    quality = config.link_qualities[q_idx]
    topology = build_grid(config.rows, config.cols)
    records = []

    # Distributed model, trained and tested at this link quality.
    net = _train_sodesn(
        config,
        topology,
        config.units_per_node,
        train_series,
        net_key=(repeat,),  # same reservoir across qualities
        train_key=(q_idx, repeat),
    )
    for r in _eval_per_sensor(config, net, test_series, quality, eval_key=(q_idx, repeat)):
        records.append(
            {
                "link_quality": quality,
                "repeat": repeat,
                "model": "sodesn",
                "seed": config.seed,
                **r,
            }
        )

    # One centralized ESN per predicted sensor over the same data; inputs
    # cross one lossy uplink each, during both training and testing.
    norm = net.normalization
    train_norm = norm.transform(train_series.samples)
    test_norm = norm.transform(test_series.samples)
    w = config.eval_washout
    washout = default_washout(train_series.n_steps)
    n_sensors = train_series.n_sensors
    for target in range(n_sensors):
        others = [k for k in range(n_sensors) if k != target]
        esn = init_esn(
            config.esn_units,
            len(others),
            rho_target=config.spectral_radius,
            density=config.density_local,
            rng=_rng(config, _ESN, repeat, target),
        )
        esn = train_esn(
            train_norm[:, others],
            train_norm[:, target],
            washout=washout,
            link_quality=quality,
            rng=_rng(config, _ESN, _TRAIN, q_idx, repeat, target),
            sv_cutoff=config.sv_cutoff,
            ridge=config.ridge,
            esn=esn,
        )
        preds = esn_predict(
            esn,
            test_norm[:, others],
            link_quality=quality,
            rng=_rng(config, _ESN, _EVAL, q_idx, repeat, target),
        )
        records.append(
            {
                "link_quality": quality,
                "repeat": repeat,
                "model": "esn",
                "seed": config.seed,
                "sensor": test_series.names[target],
                "nrmse": nrmse(preds[w:], test_norm[w:, target]),
                "max_abs_error": norm.scale[target]
                * max_abs_error(preds[w:], test_norm[w:, target]),
            }
        )
    return records


def run_baseline_compare(config: ExperimentConfig) -> ExperimentResult:
    """Paired distributed-vs-centralized scores per link quality.  Both
    models see the same data and derive their link randomness from the same
    per-point seed."""
    started = time.perf_counter()
    n_sensors = config.rows * config.cols
    total = config.train_points + config.test_points
    jobs = []
    for repeat in range(config.folds):
        series = _scenario_series(config, total, n_sensors, repeat)
        train = series.window(0, config.train_points)
        test = series.window(config.train_points, total)
        for q_idx in range(len(config.link_qualities)):
            jobs.append((q_idx, repeat, train, test))
    records = _execute_jobs(config, jobs, _baseline_job)
    return ExperimentResult(
        scenario=config.scenario,
        seed=config.seed,
        config=config,
        columns=(
            "link_quality",
            "repeat",
            "model",
            "seed",
            "sensor",
            "nrmse",
            "max_abs_error",
        ),
        records=records,
        duration_seconds=time.perf_counter() - started,
    )


# ----------------------------------------------------------------------
# multi-fault robustness
# ----------------------------------------------------------------------


def run_robustness(config: ExperimentConfig) -> ExperimentResult:
    """Sweep stuck-at-zero fault counts on one trained network.

    All points share the network (faults hit a deployed system), and the
    passthrough/replace pair for a given count shares the fault selection
    and the link-outcome stream.  Faulty sensors read zero engineering
    units from step 0 of the test window.
    """
    started = time.perf_counter()
    n_sensors = config.rows * config.cols
    total = config.train_points + config.test_points
    series = _scenario_series(config, total, n_sensors)
    train = series.window(0, config.train_points)
    test = series.window(config.train_points, total)
    topology = build_grid(config.rows, config.cols)
    net = _train_sodesn(
        config, topology, config.units_per_node, train, net_key=(0,), train_key=(0,)
    )
    policy = None
    if not config.oracle_faults:
        policy = calibrate_thresholds(
            net,
            train.window(max(train.n_steps - 4 * config.test_points, 0), train.n_steps),
            mode="windowed",
            safety_factor=1.2,
            window=96,
            link_quality=config.link_quality,
            rng=_rng(config, _CAL),
            washout=config.eval_washout,
        )

    records = []
    for c_idx, count in enumerate(config.fault_counts):
        if count > n_sensors:
            raise ConfigError(f"cannot fail {count} of {n_sensors} sensors")
        chosen = sorted(
            _rng(config, _FAULTS, c_idx).choice(n_sensors, size=count, replace=False).tolist()
        )
        schedule = FaultSchedule(tuple(Fault(sensor=s, start=0) for s in chosen))
        faulted = test if count == 0 else apply_faults(test, schedule)
        faulted_set = set(chosen)
        for mode in config.feedback_modes:
            report = run_monitor(
                net,
                faulted,
                policy=policy,
                feedback=mode,
                link_quality=config.link_quality,
                rng=_rng(config, _EVAL, c_idx),  # shared between modes
                truth=test,
                oracle_flags=schedule if config.oracle_faults else None,
                score_washout=config.eval_washout,
            )
            for k, name in enumerate(report.sensor_names):
                records.append(
                    {
                        "failed_count": count,
                        "mode": mode,
                        "seed": config.seed,
                        "sensor": name,
                        "faulted": k in faulted_set,
                        "nrmse": float(report.nrmse_per_sensor[k]),
                        "max_abs_error": float(report.max_abs_error_per_sensor[k]),
                    }
                )
    return ExperimentResult(
        scenario=config.scenario,
        seed=config.seed,
        config=config,
        columns=(
            "failed_count",
            "mode",
            "seed",
            "sensor",
            "faulted",
            "nrmse",
            "max_abs_error",
        ),
        records=records,
        duration_seconds=time.perf_counter() - started,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    runner = {
        "learning_curve": run_learning_curve,
        "reservoir_sweep": run_reservoir_sweep,
        "baseline_compare": run_baseline_compare,
        "robustness": run_robustness,
    }[config.scenario]
    return runner(config)
