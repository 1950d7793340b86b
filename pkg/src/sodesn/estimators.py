"""Scikit-learn style wrappers around the distributed network and the
centralized baseline.

``SodesnFaultDetector.fit(X)`` takes a fault-free (T, K) matrix of sensor
readings in engineering units, builds a fresh reservoir over the configured
topology, trains one prediction readout per sensor and calibrates fault
thresholds on a held-out tail of the data.  ``predict`` returns per-sensor
predictions; ``monitor`` runs the flag-and-replace loop and returns a full
:class:`~sodesn.detection.FaultReport`.

Both estimators follow the usual conventions (params stored verbatim in
``__init__``, fitted state in trailing-underscore attributes, ``get_params``
/ ``set_params`` via :class:`~sklearn.base.BaseEstimator`), so they compose
with pipelines, cloning and grid search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

from .baseline import esn_predict, train_esn
from .data import Normalization, SeriesSet, default_washout, fit_normalization
from .detection import calibrate_thresholds, run_monitor
from .metrics import nrmse
from .reservoir import NodeSpec, init_sodesn
from .topology import build_grid, from_undirected_edges
from .training import NoiseSpec, train_fault_detectors

__all__ = ["SodesnFaultDetector", "EsnRegressor"]


def _seed_from(random_state) -> np.random.SeedSequence:
    if isinstance(random_state, np.random.SeedSequence):
        return random_state
    return np.random.SeedSequence(random_state)


class SodesnFaultDetector(BaseEstimator):
    """Distributed reservoir trained to predict each sensor from its
    neighborhood, with threshold-based fault flagging.

    Parameters
    ----------
    rows, cols : int
        Grid topology; one sensor per node, so fit data must have
        ``rows * cols`` columns.  Ignored when ``edges`` is given.
    edges : list of (int, int), optional
        Arbitrary undirected topology as an edge list.
    units_per_node : int
        Internal (tanh) units hosted on each node.
    density_local, density_cross : float
        Connection density inside a node and fraction of proxy units wired
        into the local reservoir.
    spectral_radius : float
        Target spectral radius of the assembled global matrix (echo state
        condition requires < 1).
    link_quality : float
        Per-step delivery probability of every directed link, used for both
        training and monitoring.
    washout : int or "auto"
        Training steps discarded before regression ("auto": min(1000, 10%)).
    noise_amplitude : float
        Half-width of the uniform white-noise substitute in normalized units.
    sv_cutoff, ridge : float
        Readout solver parameters (relative singular-value cutoff; optional
        ridge term, 0 = plain pseudoinverse).
    teacher_mode : {"linear", "atanh"}
        Linear readout with identity teacher, or the atanh-teacher variant
        with tanh applied at the readout.
    threshold_mode : {"windowed", "absolute"}
        Fault statistic: trailing-window NRMSE or instantaneous absolute
        deviation.
    window : int
        Trailing window length for windowed mode (96 = one day at 15 min).
    safety_factor : float
        Multiplier on the calibrated maximum deviation.
    calibration_fraction : float
        Tail fraction of the fit data held out for threshold calibration.
    random_state : int, optional
        Seed for reservoir draws, link outcomes and training noise.
    """

    def __init__(
        self,
        rows: int = 2,
        cols: int = 4,
        edges=None,
        units_per_node: int = 15,
        density_local: float = 0.2,
        density_cross: float = 0.1,
        spectral_radius: float = 0.66,
        link_quality: float = 0.9,
        washout="auto",
        noise_amplitude: float = 1.0,
        sv_cutoff: float = 1e-10,
        ridge: float = 0.0,
        teacher_mode: str = "linear",
        threshold_mode: str = "windowed",
        window: int = 96,
        safety_factor: float = 1.2,
        calibration_fraction: float = 0.25,
        random_state=None,
    ):
        self.rows = rows
        self.cols = cols
        self.edges = edges
        self.units_per_node = units_per_node
        self.density_local = density_local
        self.density_cross = density_cross
        self.spectral_radius = spectral_radius
        self.link_quality = link_quality
        self.washout = washout
        self.noise_amplitude = noise_amplitude
        self.sv_cutoff = sv_cutoff
        self.ridge = ridge
        self.teacher_mode = teacher_mode
        self.threshold_mode = threshold_mode
        self.window = window
        self.safety_factor = safety_factor
        self.calibration_fraction = calibration_fraction
        self.random_state = random_state

    def _topology(self):
        if self.edges is not None:
            n = max(max(a, b) for a, b in self.edges) + 1
            return from_undirected_edges(n, self.edges)
        return build_grid(self.rows, self.cols)

    def fit(self, X, y=None, sensor_names=None):
        """Train prediction readouts and calibrate thresholds on fault-free
        readings ``X`` of shape (T, K) in engineering units."""
        X = check_array(X, dtype=float, ensure_min_samples=4)
        topology = self._topology()
        if X.shape[1] != topology.node_count:
            raise ValueError(
                f"{X.shape[1]} sensor columns but topology has {topology.node_count}"
                " nodes (one sensor per node)"
            )
        if not 0.0 < self.calibration_fraction < 1.0:
            raise ValueError("calibration_fraction must lie in (0, 1)")
        names = (
            tuple(sensor_names)
            if sensor_names is not None
            else tuple(f"s{k:02d}" for k in range(X.shape[1]))
        )
        seed = _seed_from(self.random_state)
        init_rng, train_rng, cal_rng = [np.random.default_rng(s) for s in seed.spawn(3)]

        n_cal = max(int(round(self.calibration_fraction * X.shape[0])), 2)
        n_train = X.shape[0] - n_cal
        if n_train < 2:
            raise ValueError("not enough samples left for training after calibration split")
        norm = fit_normalization(SeriesSet(names=names, samples=X[:n_train]))

        spec = NodeSpec(
            inputs_per_node=1, internal_per_node=self.units_per_node, outputs_per_node=1
        )
        net = init_sodesn(
            topology,
            spec,
            density_local=self.density_local,
            density_cross=self.density_cross,
            rho_target=self.spectral_radius,
            rng=init_rng,
        )
        net.normalization = norm
        net.sensor_names = names
        washout = (
            default_washout(n_train) if self.washout == "auto" else int(self.washout)
        )
        noise = NoiseSpec(
            amplitude=self.noise_amplitude, seed=int(seed.generate_state(1)[0])
        )
        net = train_fault_detectors(
            net,
            norm.transform(X[:n_train]),
            noise,
            washout=washout,
            link_quality=self.link_quality,
            rng=train_rng,
            sv_cutoff=self.sv_cutoff,
            ridge=self.ridge,
        )
        calibration = SeriesSet(names=names, samples=X[n_train:])
        cal_washout = min(washout, max(calibration.n_steps - self.window - 1, 0))
        self.policy_ = calibrate_thresholds(
            net,
            calibration,
            mode=self.threshold_mode,
            safety_factor=self.safety_factor,
            window=self.window,
            link_quality=self.link_quality,
            rng=cal_rng,
            washout=cal_washout,
        )
        self.net_ = net
        self.noise_ = noise
        self.washout_ = washout
        self.sensor_names_ = names
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("call fit before using this estimator")

    def _monitor_rng(self):
        # Fresh deterministic stream per call: identical inputs give
        # identical outputs regardless of call order.
        return np.random.default_rng(_seed_from(self.random_state).spawn(4)[3])

    def predict(self, X) -> np.ndarray:
        """Per-sensor predictions (engineering units) for readings ``X``;
        raw readings pass through unmodified (no fault feedback)."""
        report = self.monitor(X, feedback="passthrough")
        return report.predictions

    def monitor(self, X, truth=None, feedback: str = "replace", oracle_faults=None,
                score_washout: int = 0):
        """Run the monitoring loop over readings ``X`` and return the
        :class:`FaultReport` (trace plus per-sensor summary)."""
        self._check_fitted()
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} sensors, got {X.shape[1]}")
        series = SeriesSet(names=self.sensor_names_, samples=X)
        return run_monitor(
            self.net_,
            series,
            policy=self.policy_,
            feedback=feedback,
            link_quality=self.link_quality,
            rng=self._monitor_rng(),
            truth=truth,
            oracle_flags=oracle_faults,
            score_washout=score_washout,
        )

    def score(self, X, y=None) -> float:
        """Negative mean per-sensor NRMSE of predictions against ``X``
        (higher is better, 0 is perfect)."""
        predictions = self.predict(X)
        X = np.asarray(X, dtype=float)
        scores = [nrmse(predictions[:, k], X[:, k]) for k in range(X.shape[1])]
        return -float(np.mean(scores))


class EsnRegressor(RegressorMixin, BaseEstimator):
    """Centralized ESN predicting one target series from other sensors.

    ``fit(X, y)`` takes input readings (T, K) and the target series (T,) in
    engineering units; inputs are collected over lossy uplinks with the
    configured ``link_quality`` during both training and prediction.
    """

    def __init__(
        self,
        n_internal: int = 120,
        spectral_radius: float = 0.66,
        density: float = 0.2,
        link_quality: float = 1.0,
        washout="auto",
        sv_cutoff: float = 1e-10,
        ridge: float = 0.0,
        random_state=None,
    ):
        self.n_internal = n_internal
        self.spectral_radius = spectral_radius
        self.density = density
        self.link_quality = link_quality
        self.washout = washout
        self.sv_cutoff = sv_cutoff
        self.ridge = ridge
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=float, ensure_min_samples=4)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y must have the same number of steps")
        seed = _seed_from(self.random_state)
        train_rng = np.random.default_rng(seed.spawn(2)[0])
        names = tuple(f"x{k}" for k in range(X.shape[1]))
        self.input_norm_ = fit_normalization(SeriesSet(names=names, samples=X))
        ymin, ymax = y.min(), y.max()
        if ymax == ymin:
            raise ValueError("target series is constant")
        self.target_norm_ = Normalization(
            offset=np.array([(ymin + ymax) / 2.0]), scale=np.array([(ymax - ymin) / 2.0])
        )
        washout = default_washout(X.shape[0]) if self.washout == "auto" else int(self.washout)
        self.esn_ = train_esn(
            self.input_norm_.transform(X),
            self.target_norm_.transform(y[:, np.newaxis]).ravel(),
            n_internal=self.n_internal,
            rho_target=self.spectral_radius,
            density=self.density,
            washout=washout,
            link_quality=self.link_quality,
            rng=train_rng,
            sv_cutoff=self.sv_cutoff,
            ridge=self.ridge,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "esn_"):
            raise NotFittedError("call fit before predict")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} inputs, got {X.shape[1]}")
        rng = np.random.default_rng(_seed_from(self.random_state).spawn(2)[1])
        preds = esn_predict(
            self.esn_, self.input_norm_.transform(X), link_quality=self.link_quality, rng=rng
        )
        return self.target_norm_.inverse(preds[:, np.newaxis]).ravel()
