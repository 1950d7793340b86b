"""Prediction-quality scores: NRMSE, maximum absolute error, windowed NRMSE.

NRMSE normalizes the root mean squared error by the population variance of
the reference series, so a predictor that always outputs the reference mean
scores exactly 1.0.  All functions are pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ScoreSummary", "nrmse", "max_abs_error", "windowed_nrmse"]


@dataclass(frozen=True)
class ScoreSummary:
    """Per-sensor score record used in reports.

    ``max_abs_error`` is in engineering units; ``n`` is the number of scored
    samples.
    """

    sensor: str
    nrmse: float
    max_abs_error: float
    n: int


def _nrmse_ratio(predictions: np.ndarray, truth: np.ndarray) -> float:
    # Shared between nrmse() and windowed_nrmse() so that a window spanning
    # the whole series reproduces nrmse() bit for bit.
    err = truth - predictions
    return float(np.sqrt(np.mean(err * err) / np.var(truth)))


def nrmse(predictions, truth) -> float:
    """Root mean squared error normalized by the variance of ``truth``.

    Uses the population variance (divide by n).  Raises ``ValueError`` for
    series shorter than 2 samples or a zero-variance reference.
    """
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truth")
    if t.shape[0] < 2:
        raise ValueError("nrmse needs at least 2 samples")
    if np.var(t) == 0.0:
        raise ValueError("truth series has zero variance; NRMSE is undefined")
    return _nrmse_ratio(p, t)


def max_abs_error(predictions, truth) -> float:
    """Largest absolute deviation between paired samples (engineering units)."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truth")
    if t.shape[0] == 0:
        raise ValueError("max_abs_error needs at least 1 sample")
    return float(np.max(np.abs(t - p)))


def windowed_nrmse(predictions, truth, window: int) -> np.ndarray:
    """NRMSE over every sliding window of length ``window``.

    Returns an array of length ``len(truth) - window + 1``.  Windows whose
    reference variance is zero yield NaN (the statistic is undefined there).
    """
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truth")
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if t.shape[0] < window:
        raise ValueError(f"series of length {t.shape[0]} is shorter than window {window}")
    n_windows = t.shape[0] - window + 1
    out = np.empty(n_windows)
    for i in range(n_windows):
        tw = t[i : i + window]
        if np.var(tw) == 0.0:
            out[i] = np.nan
        else:
            out[i] = _nrmse_ratio(p[i : i + window], tw)
    return out
