import numpy as np
import pytest

from sodesn.metrics import max_abs_error, nrmse, windowed_nrmse


def test_perfect_predictor_is_zero():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    assert nrmse(t, t) == 0.0


def test_mean_predictor_is_exactly_one():
    # With population variance, sum((t - mean)^2) == n * var(t) identically.
    t = np.array([3.0, -1.0, 4.0, 1.0, 5.0])
    p = np.full_like(t, t.mean())
    assert nrmse(p, t) == pytest.approx(1.0, abs=1e-15)


def test_hand_computed_three_point_case():
    # t=[1,2,3], p=[1,2,5]: err^2 sum = 4, population var = 2/3,
    # NRMSE = sqrt(4 / (3 * 2/3)) = sqrt(2).
    value = nrmse([1.0, 2.0, 5.0], [1.0, 2.0, 3.0])
    assert value == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_scale_and_shift_invariance():
    rng = np.random.default_rng(0)
    t = rng.normal(size=200)
    p = t + rng.normal(scale=0.3, size=200)
    base = nrmse(p, t)
    assert nrmse(3.7 * p, 3.7 * t) == pytest.approx(base, rel=1e-12)
    assert nrmse(p + 11.0, t + 11.0) == pytest.approx(base, rel=1e-9)


def test_zero_variance_truth_raises():
    with pytest.raises(ValueError, match="zero variance"):
        nrmse([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])


def test_length_mismatch_and_short_series():
    with pytest.raises(ValueError):
        nrmse([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        nrmse([1.0], [1.0])


def test_max_abs_error_identical_and_single_deviation():
    t = np.array([20.0, 21.0, 19.5])
    assert max_abs_error(t, t) == 0.0
    p = t.copy()
    p[1] -= 14.2
    assert max_abs_error(p, t) == pytest.approx(14.2)


def test_max_abs_error_order_invariant():
    rng = np.random.default_rng(1)
    t = rng.normal(size=50)
    p = t + rng.normal(size=50)
    perm = rng.permutation(50)
    assert max_abs_error(p, t) == max_abs_error(p[perm], t[perm])


def test_max_abs_error_empty_raises():
    with pytest.raises(ValueError):
        max_abs_error([], [])


def test_windowed_constant_offset_on_ramp_is_constant():
    # A ramp has the same variance in every window, so a constant error
    # offset yields a constant windowed NRMSE.
    t = np.arange(200, dtype=float)
    p = t + 2.0
    values = windowed_nrmse(p, t, window=25)
    assert np.allclose(values, values[0])


def test_windowed_full_length_equals_nrmse_exactly():
    rng = np.random.default_rng(2)
    t = rng.normal(size=64)
    p = t + rng.normal(scale=0.1, size=64)
    assert windowed_nrmse(p, t, window=64)[0] == nrmse(p, t)


def test_windowed_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    t = rng.normal(size=200)
    p = t + rng.normal(scale=0.5, size=200)
    window = 50
    values = windowed_nrmse(p, t, window)
    assert values.shape == (151,)
    for i in range(151):
        tw, pw = t[i : i + window], p[i : i + window]
        expected = np.sqrt(np.sum((tw - pw) ** 2) / (window * np.var(tw)))
        assert values[i] == pytest.approx(expected, rel=1e-12)


def test_windowed_zero_variance_window_is_nan():
    t = np.concatenate([np.zeros(10), np.arange(10.0)])
    p = t + 1.0
    values = windowed_nrmse(p, t, window=5)
    assert np.isnan(values[0])
    assert not np.isnan(values[-1])


def test_windowed_input_validation():
    with pytest.raises(ValueError):
        windowed_nrmse([1.0, 2.0], [1.0, 2.0], window=1)
    with pytest.raises(ValueError):
        windowed_nrmse([1.0, 2.0], [1.0, 2.0], window=3)
