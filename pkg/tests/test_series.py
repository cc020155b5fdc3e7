import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilm_threshold.errors import ConfigurationError, InputError
from nilm_threshold.series import (
    PowerSeries,
    SamplingSpec,
    StatusSeries,
    WindowKind,
    WindowPair,
    resample_mean,
    resample_status,
    status_windows,
    window_starts,
    windowize,
)

S6 = SamplingSpec(6)
S60 = SamplingSpec(60)


def series(values, period=6, label="aggregate"):
    return PowerSeries(np.asarray(values, dtype=float), SamplingSpec(period), label)


def test_resample_constant_blocks():
    out = resample_mean(series([6] * 6 + [0] * 6), SamplingSpec(36))
    assert out.values.tolist() == [6.0, 0.0]


def test_resample_pairs():
    out = resample_mean(series([1, 2, 3, 4]), SamplingSpec(12))
    assert out.values.tolist() == [1.5, 3.5]


def test_resample_identity():
    s = series([3, 1, 4, 1, 5])
    assert np.array_equal(resample_mean(s, S6).values, s.values)


def test_resample_drops_partial_tail():
    assert resample_mean(series([1, 1, 1, 1, 9]), SamplingSpec(12)).values.tolist() == [1.0, 1.0]


def test_resample_rejects_non_multiple():
    with pytest.raises(ConfigurationError):
        resample_mean(series([1, 2, 3]), SamplingSpec(10))


def test_resample_too_short():
    with pytest.raises(InputError):
        resample_mean(series([1, 2]), S60)


@given(st.lists(st.floats(0, 5000, allow_nan=False), min_size=10, max_size=200), st.integers(1, 10))
def test_resample_preserves_energy_of_kept_blocks(values, k):
    s = series(values)
    if len(values) < k:
        return
    out = resample_mean(s, SamplingSpec(6 * k))
    kept = s.values[: len(out) * k]
    assert out.values.sum() * k == pytest.approx(kept.sum(), rel=1e-12, abs=1e-9)


def test_resample_status_majority_ties_on():
    st_ = StatusSeries(np.array([1, 0, 0, 0, 1, 1, 0, 0]), S6)
    assert resample_status(st_, SamplingSpec(24)).values.tolist() == [0, 1]
    st2 = StatusSeries(np.array([1, 0]), S6)
    assert resample_status(st2, SamplingSpec(12)).values.tolist() == [1]


def test_power_series_validation():
    with pytest.raises(InputError):
        series([1, -1])
    with pytest.raises(InputError):
        series([1, np.nan])
    with pytest.raises(InputError):
        series([])
    with pytest.raises(ConfigurationError):
        SamplingSpec(0)


def test_power_series_is_read_only():
    s = series([1, 2])
    with pytest.raises(ValueError):
        s.values[0] = 5


def test_status_series_must_be_binary():
    with pytest.raises(InputError):
        StatusSeries(np.array([0, 2]), S6)


def test_two_windows_overlap_by_thirty():
    agg = series(np.arange(990), 60)
    pairs = windowize(agg, agg)
    assert len(pairs) == 2
    assert pairs[1].start == 480
    assert pairs[0].input[480] == pairs[1].input[0]
    overlap = set(range(0, 510)) & set(range(480, 990))
    assert len(overlap) == 30


def test_single_window_target_is_centered():
    agg = series(np.arange(510), 60)
    (pair,) = windowize(agg, agg)
    assert pair.target[0] == 15 and pair.target[-1] == 494


def test_ramp_target_first_value():
    ramp = series(np.arange(990), 60)
    assert windowize(ramp, ramp)[0].target[0] == 15.0


def test_consecutive_targets_tile_without_gap():
    ramp = series(np.arange(3000), 60)
    pairs = windowize(ramp, ramp)
    joined = np.concatenate([p.target for p in pairs])
    assert np.array_equal(joined, np.arange(15, 15 + 480 * len(pairs)))


def test_windowize_rejects_short_and_mismatch():
    with pytest.raises(InputError):
        windowize(series(np.ones(509), 60), series(np.ones(509), 60))
    with pytest.raises(InputError):
        windowize(series(np.ones(600), 60), series(np.ones(601), 60))
    with pytest.raises(InputError):
        windowize(series(np.ones(600), 60), series(np.ones(600), 6))


@given(st.integers(510, 5000), st.integers(1, 600))
def test_window_starts_fit(n, stride):
    starts = window_starts(n, stride)
    assert starts[0] == 0
    assert starts[-1] + 510 <= n
    assert starts[-1] + stride + 510 > n
    assert np.all(np.diff(starts) == stride)


def test_window_pair_shape_checks():
    with pytest.raises(InputError):
        WindowPair(np.zeros(500), np.zeros(480))
    with pytest.raises(InputError):
        WindowPair(np.zeros(510), np.full(480, 0.5), kind=WindowKind.CLASSIFICATION)


def test_status_windows_matches_targets():
    rng = np.random.default_rng(1)
    status = StatusSeries((rng.random(2000) > 0.5).astype(np.int8), S60)
    power = series(status.values * 100.0, 60, "fridge")
    pairs = windowize(power, power)
    rows = status_windows(status, [p.start for p in pairs])
    for row, pair in zip(rows, pairs):
        assert np.array_equal(row * 100.0, pair.target)
