import numpy as np
import pytest

from sodesn.data import (
    Fault,
    FaultSchedule,
    SeriesSet,
    apply_faults,
    default_washout,
    diurnal_base,
    fit_normalization,
    load_csv,
    normalize,
    save_csv,
    split_incremental_cv,
    synthesize_correlated,
)
from sodesn.errors import DataError


def _write_csv(path, rows, header="timestamp,a,b"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")


def test_load_simple_csv(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        [
            "2024-01-01T00:00:00,1.5,2.5",
            "2024-01-01T00:15:00,1.6,2.4",
            "2024-01-01T00:30:00,1.7,2.3",
        ],
    )
    s = load_csv(path)
    assert s.names == ("a", "b")
    assert s.n_steps == 3
    assert s.interval_minutes == 15.0
    assert s.samples[2, 1] == 2.3


def test_load_csv_shape_example(tmp_path):
    path = tmp_path / "wide.csv"
    names = [f"s{k}" for k in range(8)]
    rows = []
    for i in range(1000):
        stamp = f"2024-01-01T{i // 60 % 24:02d}:{i % 60:02d}:00"
        rows.append(stamp + "," + ",".join(str(float(k)) for k in range(8)))
    # one-minute interval for compact timestamps
    path.write_text("timestamp," + ",".join(names) + "\n" + "\n".join(rows) + "\n")
    s = load_csv(path)
    assert s.samples.shape == (1000, 8)


def test_missing_cell_rejected_names_location(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        ["2024-01-01T00:00:00,1.0,2.0", "2024-01-01T00:15:00,,2.1"],
    )
    with pytest.raises(DataError, match=r"(?s)3.*'a'"):
        load_csv(path)


def test_missing_cell_forward_fill(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        ["2024-01-01T00:00:00,1.0,2.0", "2024-01-01T00:15:00,,2.1"],
    )
    s = load_csv(path, forward_fill=True)
    assert s.samples[1, 0] == 1.0


def test_ragged_row_rejected(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(path, ["2024-01-01T00:00:00,1.0,2.0", "2024-01-01T00:15:00,1.0"])
    with pytest.raises(DataError, match="cells"):
        load_csv(path)


def test_non_monotone_timestamps_rejected(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        ["2024-01-01T00:15:00,1.0,2.0", "2024-01-01T00:00:00,1.0,2.0"],
    )
    with pytest.raises(DataError, match="increasing"):
        load_csv(path)


def test_non_uniform_interval_rejected(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        [
            "2024-01-01T00:00:00,1.0,2.0",
            "2024-01-01T00:15:00,1.0,2.0",
            "2024-01-01T00:45:00,1.0,2.0",
        ],
    )
    with pytest.raises(DataError, match="interval"):
        load_csv(path)


def test_expected_columns_missing_and_reorder(tmp_path):
    path = tmp_path / "x.csv"
    _write_csv(
        path,
        ["2024-01-01T00:00:00,1.0,2.0", "2024-01-01T00:15:00,1.1,2.1"],
    )
    with pytest.raises(DataError, match="missing expected"):
        load_csv(path, expected_columns=["a", "c"])
    s = load_csv(path, expected_columns=["b", "a"])
    assert s.names == ("b", "a")
    assert s.samples[0].tolist() == [2.0, 1.0]


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    series = SeriesSet(
        names=("a", "b", "c"), samples=rng.normal(size=(50, 3)) * 17.3
    )
    p1 = tmp_path / "one.csv"
    p2 = tmp_path / "two.csv"
    save_csv(series, p1)
    loaded = load_csv(p1)
    assert np.array_equal(loaded.samples, series.samples)
    save_csv(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_normalize_examples():
    s = SeriesSet(names=("t",), samples=np.linspace(0.0, 30.0, 61)[:, None])
    n = normalize(s)
    assert n.normalization.offset[0] == pytest.approx(15.0)
    assert n.normalization.scale[0] == pytest.approx(15.0)
    assert n.samples.min() == pytest.approx(-1.0)
    assert n.samples.max() == pytest.approx(1.0)


def test_normalize_round_trip_within_1e12():
    rng = np.random.default_rng(1)
    samples = rng.uniform(-40, 60, size=(200, 4))
    s = SeriesSet(names=tuple("abcd"), samples=samples)
    n = normalize(s)
    back = n.normalization.inverse(n.samples)
    assert np.max(np.abs(back - samples)) < 1e-12


def test_constant_column_rejected():
    s = SeriesSet(names=("a", "b"), samples=np.column_stack([np.arange(5.0), np.ones(5)]))
    with pytest.raises(DataError, match="constant"):
        fit_normalization(s)


def test_normalize_with_training_params_applies_to_test():
    train = SeriesSet(names=("a",), samples=np.linspace(0, 10, 20)[:, None])
    test = SeriesSet(names=("a",), samples=np.linspace(5, 15, 20)[:, None])
    norm = fit_normalization(train)
    te = normalize(test, norm)
    assert te.samples.max() > 1.0  # test exceeds the training range; no refit


def test_synthesize_identity_when_no_shift_no_noise():
    base = np.sin(np.linspace(0, 20, 500))
    s = synthesize_correlated(base, 4, max_shift_steps=0, noise_fraction=0.0, rng=np.random.default_rng(0))
    assert s.samples.shape == (500, 4)
    for k in range(4):
        assert np.array_equal(s.samples[:, k], base)


def test_synthesize_cross_correlation_peak_within_shift():
    rng = np.random.default_rng(3)
    base = diurnal_base(3000, rng=rng)
    s = synthesize_correlated(base, 6, max_shift_steps=2, noise_fraction=0.10, rng=rng)
    trimmed = base[2:-2]
    for k in range(6):
        copy = s.samples[:, k]
        lags = range(-4, 5)
        corr = [
            np.corrcoef(copy[4 + lag : len(copy) - 4 + lag], trimmed[4:-4])[0, 1]
            for lag in lags
        ]
        best = list(lags)[int(np.argmax(corr))]
        assert abs(best) <= 2


def test_synthesize_count_100():
    base = diurnal_base(500, rng=np.random.default_rng(4))
    s = synthesize_correlated(base, 100, rng=np.random.default_rng(5))
    assert s.n_sensors == 100


def test_synthesize_reproducible_and_correlated():
    base = diurnal_base(2000, rng=np.random.default_rng(6))
    a = synthesize_correlated(base, 5, rng=np.random.default_rng(9))
    b = synthesize_correlated(base, 5, rng=np.random.default_rng(9))
    assert np.array_equal(a.samples, b.samples)
    corr = np.corrcoef(a.samples.T)
    off_diag = corr[~np.eye(5, dtype=bool)]
    assert off_diag.min() > 0.8


def test_synthesize_base_too_short():
    with pytest.raises(ValueError, match="too short"):
        synthesize_correlated(np.arange(4.0), 2, max_shift_steps=2)


def test_apply_faults_examples():
    s = SeriesSet(names=tuple(f"s{k}" for k in range(6)), samples=np.ones((200, 6)) * 7.0)
    unchanged = apply_faults(s, FaultSchedule(()))
    assert np.array_equal(unchanged.samples, s.samples)

    faulted = apply_faults(s, FaultSchedule((Fault(sensor=5, start=100),)))
    assert np.all(faulted.samples[100:, 5] == 0.0)
    assert np.all(faulted.samples[:100, 5] == 7.0)
    assert np.all(s.samples[:, 5] == 7.0)  # ground truth retained


def test_apply_faults_60_of_100():
    s = SeriesSet(names=tuple(f"s{k:02d}" for k in range(100)), samples=np.ones((50, 100)))
    schedule = FaultSchedule(tuple(Fault(sensor=k, start=0) for k in range(60)))
    faulted = apply_faults(s, schedule)
    zero_cols = np.sum(np.all(faulted.samples == 0.0, axis=0))
    assert zero_cols == 60


def test_apply_faults_validation():
    s = SeriesSet(names=("a",), samples=np.ones((10, 1)))
    with pytest.raises(ValueError):
        apply_faults(s, FaultSchedule((Fault(sensor=3, start=0),)))
    with pytest.raises(ValueError):
        apply_faults(s, FaultSchedule((Fault(sensor=0, start=99),)))
    with pytest.raises(ValueError):
        apply_faults(s, FaultSchedule((Fault(sensor=0, start=0, kind="drift"),)))


def test_split_incremental_cv_schedule_shape():
    # Full published schedule: sizes up to 30000, test windows of 16665.
    s = SeriesSet(names=("a",), samples=np.zeros((60_000, 1)))
    sizes = [300, 1_000, 3_000, 10_000, 30_000]
    splits = split_incremental_cv(s, sizes, 16_665, 10)
    assert len(splits) == 50
    for sp in splits:
        assert sp.train.n_steps == sp.train_size
        assert sp.test.n_steps == 16_665


def test_split_single_fold_is_leading_train_trailing_test():
    s = SeriesSet(names=("a",), samples=np.arange(100.0)[:, None])
    (split,) = split_incremental_cv(s, [60], 40, 1)
    assert split.train.samples[0, 0] == 0.0
    assert split.test.samples[0, 0] == 60.0


def test_split_windows_never_overlap_and_share_test_across_sizes():
    s = SeriesSet(names=("a",), samples=np.arange(500.0)[:, None])
    splits = split_incremental_cv(s, [50, 100], 80, 3)
    for sp in splits:
        assert sp.train.samples[-1, 0] < sp.test.samples[0, 0]
    by_fold = {}
    for sp in splits:
        by_fold.setdefault(sp.fold, []).append(sp.test.samples[0, 0])
    for starts in by_fold.values():
        assert len(set(starts)) == 1  # same test window for every size


def test_split_infeasible_raises():
    s = SeriesSet(names=("a",), samples=np.zeros((100, 1)))
    with pytest.raises(ValueError):
        split_incremental_cv(s, [80], 40, 2)


def test_default_washout():
    assert default_washout(300) == 30
    assert default_washout(50_000) == 1000
