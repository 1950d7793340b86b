"""Distributed echo state networks for sensor fault detection.

A single recurrent reservoir is spread over the nodes of a simulated
wireless sensor network so that every connection respects the network's
neighborhood structure.  Readouts are trained offline to predict each
sensor's current reading from the rest of the network; deviations between
prediction and reading drive distributed fault detection, with flagged
sensors optionally replaced by their own predictions.

The high-level entry points are the scikit-learn style estimators
:class:`~sodesn.estimators.SodesnFaultDetector` and
:class:`~sodesn.estimators.EsnRegressor`; the functional layer underneath
(topology, reservoir, training, detection, baseline, data, metrics,
experiments) is public as well.
"""

__version__ = "0.1.0"

from .baseline import Esn, esn_predict, init_esn, train_esn
from .bundle import load_bundle, save_bundle
from .data import (
    Fault,
    FaultSchedule,
    Normalization,
    SeriesSet,
    apply_faults,
    diurnal_base,
    load_csv,
    normalize,
    save_csv,
    split_incremental_cv,
    synthesize_correlated,
)
from .detection import (
    FaultReport,
    ThresholdPolicy,
    calibrate_thresholds,
    detect_step,
    run_monitor,
)
from .estimators import EsnRegressor, SodesnFaultDetector
from .experiments import (
    SCENARIOS,
    ExperimentConfig,
    ExperimentResult,
    default_config,
    run_experiment,
)
from .metrics import ScoreSummary, max_abs_error, nrmse, windowed_nrmse
from .reservoir import (
    NetworkState,
    NodeSpec,
    Sodesn,
    assemble_global_w,
    init_sodesn,
    spectral_radius,
    step,
)
from .topology import (
    LinkOutcomes,
    Topology,
    build_grid,
    load_edge_list,
    sample_link_outcomes,
    save_edge_list,
)
from .training import (
    NoiseSpec,
    SampleMatrices,
    harvest_states,
    predict_series,
    project_node_samples,
    solve_readout,
    train_fault_detectors,
)

__all__ = [
    "__version__",
    "Esn",
    "EsnRegressor",
    "ExperimentConfig",
    "ExperimentResult",
    "Fault",
    "FaultReport",
    "FaultSchedule",
    "LinkOutcomes",
    "NetworkState",
    "NodeSpec",
    "NoiseSpec",
    "Normalization",
    "SampleMatrices",
    "SCENARIOS",
    "ScoreSummary",
    "SeriesSet",
    "Sodesn",
    "SodesnFaultDetector",
    "ThresholdPolicy",
    "Topology",
    "apply_faults",
    "assemble_global_w",
    "build_grid",
    "calibrate_thresholds",
    "default_config",
    "detect_step",
    "diurnal_base",
    "esn_predict",
    "harvest_states",
    "init_esn",
    "init_sodesn",
    "load_bundle",
    "load_csv",
    "load_edge_list",
    "max_abs_error",
    "normalize",
    "nrmse",
    "predict_series",
    "project_node_samples",
    "run_experiment",
    "run_monitor",
    "sample_link_outcomes",
    "save_bundle",
    "save_csv",
    "save_edge_list",
    "solve_readout",
    "spectral_radius",
    "split_incremental_cv",
    "step",
    "synthesize_correlated",
    "train_esn",
    "train_fault_detectors",
    "windowed_nrmse",
]
