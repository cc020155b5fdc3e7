import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilm_threshold.errors import ConfigurationError, InputError
from nilm_threshold.reconstruction import (
    OnOffLevels,
    compute_levels,
    intrinsic_error,
    reconstruct_binary,
    reconstruction_record,
)
from nilm_threshold.series import PowerSeries, SamplingSpec, StatusSeries
from oracles import best_two_level_grid


def test_levels_examples():
    assert compute_levels([0, 0, 100, 100], [0, 0, 1, 1]) == OnOffLevels(100, 0)
    assert compute_levels([10, 20, 300], [0, 0, 1]) == OnOffLevels(300, 15)
    assert compute_levels([10, 20], [0, 0]).p_on == 0


def test_literal_mode_divides_by_total():
    levels = compute_levels([10, 20, 300, 0], [0, 0, 1, 0], mode="literal")
    assert levels == OnOffLevels(75, 7.5)
    with pytest.raises(ConfigurationError):
        compute_levels([1], [1], mode="median")


def test_inverted_levels_warn():
    with pytest.warns(RuntimeWarning):
        compute_levels([100, 0], [0, 1])


def test_reconstruct_examples():
    assert reconstruct_binary([1, 0, 1], OnOffLevels(100, 5)).tolist() == [100, 5, 100]
    assert reconstruct_binary([1, 1], OnOffLevels(7, 0)).tolist() == [7, 7]
    assert reconstruct_binary([0, 0], OnOffLevels(0, 0)).tolist() == [0, 0]
    s = StatusSeries(np.array([1, 0]), SamplingSpec(60))
    out = reconstruct_binary(s, OnOffLevels(3, 1), label="bp")
    assert isinstance(out, PowerSeries) and out.label == "bp" and out.values.tolist() == [3, 1]


def test_intrinsic_error_examples():
    assert intrinsic_error([0, 100, 0, 100], [0, 1, 0, 1]) == 0
    assert intrinsic_error([0, 10, 0, 10], [0, 1, 0, 1]) == 0
    assert intrinsic_error([0, 8, 12], [0, 1, 1]) == pytest.approx(4 / 3)


def test_length_mismatch():
    with pytest.raises(InputError):
        intrinsic_error([1, 2], [1])


@given(st.lists(st.tuples(st.floats(0, 2000, allow_nan=False), st.integers(0, 1)), min_size=2, max_size=60))
def test_conditional_levels_beat_grid(pairs):
    p = np.array([a for a, _ in pairs])
    s = np.array([b for _, b in pairs])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        levels = compute_levels(p, s)
    sse = float(np.sum((p - reconstruct_binary(s, levels)) ** 2))
    _, _, grid_sse = best_two_level_grid(p, s)
    assert sse <= grid_sse + 1e-6 * max(1.0, grid_sse)


def test_record():
    rec = reconstruction_record("fridge", "MP", OnOffLevels(90, 1), 3.5)
    assert rec == {"appliance": "fridge", "method": "MP", "p_on": 90, "p_off": 1, "intrinsic_error_watts": 3.5}
