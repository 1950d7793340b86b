"""Threshold-based fault detection and the flag-and-replace monitor loop.

A trained network predicts every sensor's current reading from the rest of
the network.  Deviations between prediction and actual reading are compared
against per-sensor thresholds calibrated on fault-free validation data; a
sensor whose deviation statistic exceeds its threshold is flagged.  Flags
are sticky for the duration of a run.  In replace mode a flagged sensor's
input is substituted by its own prediction before each step, so its raw
readings stop influencing the network entirely.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .data import FaultSchedule, SeriesSet
from .metrics import max_abs_error, nrmse, windowed_nrmse
from .reservoir import Sodesn, step
from .topology import sample_link_outcomes
from .training import predict_series
from .validation import check_probability, ensure_rng

__all__ = [
    "ThresholdPolicy",
    "DeviationTracker",
    "FaultReport",
    "calibrate_thresholds",
    "detect_step",
    "run_monitor",
]


@dataclass(frozen=True)
class ThresholdPolicy:
    """Per-sensor fault thresholds.

    ``mode`` is "absolute" (instantaneous |prediction - reading| in
    engineering units) or "windowed" (NRMSE between prediction and reading
    over a trailing window).  ``window`` applies to windowed mode only.
    """

    mode: str
    thresholds: np.ndarray
    window: int = 96

    def __post_init__(self):
        if self.mode not in ("absolute", "windowed"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        th = np.asarray(self.thresholds, dtype=float)
        object.__setattr__(self, "thresholds", th)
        if np.any(th < 0):
            raise ValueError("thresholds must be non-negative")
        if self.mode == "windowed" and self.window < 2:
            raise ValueError("window must be >= 2")


class DeviationTracker:
    """Trailing-window NRMSE between predictions and raw readings.

    Returns NaN for every sensor until the window has filled, and for
    windows whose reading variance is zero (the statistic is undefined
    there; undefined never raises a flag).
    """

    def __init__(self, n_sensors: int, window: int):
        self.window = int(window)
        self._pred = np.zeros((self.window, n_sensors))
        self._read = np.zeros((self.window, n_sensors))
        self._count = 0
        self._pos = 0

    def update(self, predictions: np.ndarray, readings: np.ndarray) -> np.ndarray:
        self._pred[self._pos] = predictions
        self._read[self._pos] = readings
        self._pos = (self._pos + 1) % self.window
        self._count += 1
        n = self._pred.shape[1]
        if self._count < self.window:
            return np.full(n, np.nan)
        err = self._read - self._pred
        mse = np.mean(err * err, axis=0)
        var = np.var(self._read, axis=0)
        out = np.full(n, np.nan)
        ok = var > 0.0
        out[ok] = np.sqrt(mse[ok] / var[ok])
        return out


@dataclass
class FaultReport:
    """Full monitoring trace plus per-sensor summary.

    Per step and sensor: prediction (engineering units), deviation statistic
    (absolute error or windowed NRMSE, NaN while undefined) and the sticky
    fault flag.  Summary metrics are recomputed from the trace: NRMSE and
    max absolute error against ground truth over the scored steps, and the
    first step each sensor was flagged (None if never).
    """

    sensor_names: tuple
    predictions: np.ndarray
    deviations: np.ndarray
    flagged: np.ndarray
    truth: np.ndarray
    readings: np.ndarray
    feedback: str
    score_washout: int
    nrmse_per_sensor: np.ndarray
    max_abs_error_per_sensor: np.ndarray
    first_flag_step: tuple

    @property
    def n_steps(self) -> int:
        return self.predictions.shape[0]

    def mean_nrmse(self, sensors=None) -> float:
        values = self.nrmse_per_sensor
        if sensors is not None:
            values = values[list(sensors)]
        return float(np.nanmean(values))

    def summary_dict(self) -> dict:
        return {
            "feedback": self.feedback,
            "n_steps": int(self.n_steps),
            "score_washout": int(self.score_washout),
            "sensors": [
                {
                    "sensor": name,
                    "nrmse": float(self.nrmse_per_sensor[k]),
                    "max_abs_error": float(self.max_abs_error_per_sensor[k]),
                    "first_flag_step": self.first_flag_step[k],
                }
                for k, name in enumerate(self.sensor_names)
            ],
            "mean_nrmse": self.mean_nrmse(),
            "flagged_sensors": [
                name
                for k, name in enumerate(self.sensor_names)
                if self.first_flag_step[k] is not None
            ],
        }

    def write_trace_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "sensor", "truth", "prediction", "deviation", "flagged"])
            for n in range(self.n_steps):
                for k, name in enumerate(self.sensor_names):
                    dev = self.deviations[n, k]
                    writer.writerow(
                        [
                            n,
                            name,
                            repr(float(self.truth[n, k])),
                            repr(float(self.predictions[n, k])),
                            "" if np.isnan(dev) else repr(float(dev)),
                            int(self.flagged[n, k]),
                        ]
                    )

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


def calibrate_thresholds(
    net: Sodesn,
    validation: SeriesSet,
    mode: str = "windowed",
    safety_factor: float = 1.2,
    window: int = 96,
    link_quality: float = 1.0,
    rng=None,
    washout: int = 0,
) -> ThresholdPolicy:
    """Derive per-sensor thresholds from a fault-free validation run.

    Absolute mode: ``safety_factor`` times the maximum absolute deviation of
    the prediction from the reading.  Windowed mode: ``safety_factor`` times
    the maximum windowed NRMSE observed on the validation set (undefined
    windows are skipped).  ``washout`` drops leading steps where the
    reservoir is still settling from its zero start state.
    """
    if safety_factor < 1.0:
        raise ValueError("safety_factor must be >= 1")
    readings, truth_eng = _engineering_readings(net, validation)
    n_scored = readings.shape[0] - washout
    if mode == "windowed" and n_scored < window:
        raise ValueError(
            f"validation leaves {n_scored} scored steps, shorter than window {window}"
        )
    if mode not in ("absolute", "windowed"):
        raise ValueError(f"unknown threshold mode {mode!r}")
    preds_norm = predict_series(
        net, net.normalization.transform(readings), link_quality=link_quality, rng=rng
    )
    preds_eng = _predictions_to_engineering(net, preds_norm)
    preds_eng = preds_eng[washout:]
    truth_eng = truth_eng[washout:]
    n_sensors = readings.shape[1]
    thresholds = np.empty(n_sensors)
    if mode == "absolute":
        thresholds[:] = safety_factor * np.max(np.abs(preds_eng - truth_eng), axis=0)
    else:
        for k in range(n_sensors):
            stats = windowed_nrmse(preds_eng[:, k], truth_eng[:, k], window)
            finite = stats[~np.isnan(stats)]
            thresholds[k] = safety_factor * (finite.max() if finite.size else 0.0)
    if np.any(thresholds == 0.0):
        warnings.warn(
            "calibration produced zero thresholds (perfect or degenerate predictor)",
            stacklevel=2,
        )
    return ThresholdPolicy(mode=mode, thresholds=thresholds, window=window)


def _engineering_readings(net: Sodesn, series) -> tuple:
    """Accept an engineering-unit SeriesSet (or array) and return readings
    plus a same-shaped truth default."""
    if net.normalization is None:
        raise ValueError("network carries no normalization; train it first")
    if isinstance(series, SeriesSet):
        if series.normalization is not None:
            raise ValueError("monitoring expects engineering-unit series")
        arr = series.samples
    else:
        arr = np.asarray(series, dtype=float)
    if arr.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} sensors, got {arr.shape[1]}")
    return arr, arr


def _predictions_to_engineering(net: Sodesn, preds_norm: np.ndarray) -> np.ndarray:
    # Output unit k predicts sensor k's reading (one output per input).
    out_idx = [net.output_index_of_sensor(s) for s in range(net.n_inputs)]
    return net.normalization.inverse(preds_norm[:, out_idx])


def _monitor_step(net, state, readings_eng, links, flags, substitute_flagged, out_idx):
    u_norm = net.normalization.transform(readings_eng)
    if substitute_flagged and flags.any():
        # Feed back the freshest available prediction (previous step's output).
        u_norm[flags] = state.y[out_idx[flags]]
    new_state = step(net, state, u_norm, links)
    pred_norm = new_state.y[out_idx]
    pred_eng = net.normalization.inverse(pred_norm)
    return new_state, pred_eng


def detect_step(
    net: Sodesn,
    state,
    readings,
    links,
    policy: ThresholdPolicy,
    flags,
    tracker: DeviationTracker | None = None,
):
    """One monitoring step with flag-and-replace feedback.

    Sensors already flagged have their input replaced by their current
    prediction before the step; afterwards the deviation statistic is
    updated and any newly exceeded threshold raises that sensor's flag.
    Returns ``(new_state, predictions, new_flags)`` with predictions in
    engineering units.
    """
    readings = np.asarray(readings, dtype=float).ravel()
    flags = np.asarray(flags, dtype=bool).copy()
    if readings.shape[0] != net.n_inputs or flags.shape[0] != net.n_inputs:
        raise ValueError("readings/flags length does not match sensor count")
    if policy.mode == "windowed" and tracker is None:
        raise ValueError("windowed mode needs a DeviationTracker shared across steps")
    out_idx = np.asarray(
        [net.output_index_of_sensor(s) for s in range(net.n_inputs)], dtype=np.intp
    )
    new_state, pred_eng = _monitor_step(
        net, state, readings, links, flags, substitute_flagged=True, out_idx=out_idx
    )
    if policy.mode == "absolute":
        stat = np.abs(pred_eng - readings)
    else:
        stat = tracker.update(pred_eng, readings)
    exceeded = np.zeros_like(flags)
    valid = ~np.isnan(stat)
    exceeded[valid] = stat[valid] > policy.thresholds[valid]
    return new_state, pred_eng, flags | exceeded


def run_monitor(
    net: Sodesn,
    series,
    policy: ThresholdPolicy | None = None,
    feedback: str = "replace",
    link_quality: float = 1.0,
    rng=None,
    truth=None,
    oracle_flags: FaultSchedule | None = None,
    score_washout: int = 0,
) -> FaultReport:
    """Run the full monitoring loop over a series.

    ``series`` holds the readings actually fed to the network (engineering
    units, possibly faulted); ``truth`` is the fault-free ground truth for
    scoring (defaults to ``series``).  In passthrough mode faulty readings
    keep entering the network; in replace mode flagged sensors are
    substituted by their predictions.  Flags come from ``policy`` thresholds
    and/or an ``oracle_flags`` schedule of known faults.
    """
    if feedback not in ("replace", "passthrough"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    if policy is None and oracle_flags is None:
        raise ValueError("need a threshold policy, an oracle fault schedule, or both")
    check_probability("link_quality", link_quality)
    rng = ensure_rng(rng)
    readings_all, _ = _engineering_readings(net, series)
    if truth is None:
        truth_all = readings_all
    else:
        truth_all = truth.samples if isinstance(truth, SeriesSet) else np.asarray(truth, float)
    if truth_all.shape != readings_all.shape:
        raise ValueError("truth shape does not match series shape")
    names = (
        series.names
        if isinstance(series, SeriesSet)
        else tuple(f"s{k:02d}" for k in range(readings_all.shape[1]))
    )
    n_steps, n_sensors = readings_all.shape
    if not 0 <= score_washout < n_steps:
        raise ValueError(f"score_washout {score_washout} outside series of {n_steps} steps")

    out_idx = np.asarray(
        [net.output_index_of_sensor(s) for s in range(n_sensors)], dtype=np.intp
    )
    oracle_by_start: dict = {}
    if oracle_flags is not None:
        for fault in oracle_flags:
            oracle_by_start.setdefault(fault.start, []).append(fault.sensor)

    tracker = (
        DeviationTracker(n_sensors, policy.window)
        if policy is not None and policy.mode == "windowed"
        else None
    )
    flags = np.zeros(n_sensors, dtype=bool)
    predictions = np.empty((n_steps, n_sensors))
    deviations = np.empty((n_steps, n_sensors))
    flag_trace = np.empty((n_steps, n_sensors), dtype=bool)
    state = net.zero_state()
    for n in range(n_steps):
        for sensor in oracle_by_start.get(n, ()):
            flags[sensor] = True
        links = sample_link_outcomes(net.topology, link_quality, rng)
        state, pred_eng = _monitor_step(
            net,
            state,
            readings_all[n],
            links,
            flags,
            substitute_flagged=(feedback == "replace"),
            out_idx=out_idx,
        )
        if policy is None or policy.mode == "absolute":
            stat = np.abs(pred_eng - readings_all[n])
        else:
            stat = tracker.update(pred_eng, readings_all[n])
        if policy is not None:
            valid = ~np.isnan(stat)
            newly = np.zeros(n_sensors, dtype=bool)
            newly[valid] = stat[valid] > policy.thresholds[valid]
            flags |= newly
        predictions[n] = pred_eng
        deviations[n] = stat
        flag_trace[n] = flags

    scored_pred = predictions[score_washout:]
    scored_truth = truth_all[score_washout:]
    nrmse_vals = np.empty(n_sensors)
    mae_vals = np.empty(n_sensors)
    for k in range(n_sensors):
        try:
            nrmse_vals[k] = nrmse(scored_pred[:, k], scored_truth[:, k])
        except ValueError:
            nrmse_vals[k] = np.nan
        mae_vals[k] = max_abs_error(scored_pred[:, k], scored_truth[:, k])
    first_flag = tuple(
        int(np.argmax(flag_trace[:, k])) if flag_trace[:, k].any() else None
        for k in range(n_sensors)
    )
    return FaultReport(
        sensor_names=names,
        predictions=predictions,
        deviations=deviations,
        flagged=flag_trace,
        truth=truth_all,
        readings=readings_all,
        feedback=feedback,
        score_washout=score_washout,
        nrmse_per_sensor=nrmse_vals,
        max_abs_error_per_sensor=mae_vals,
        first_flag_step=first_flag,
    )
