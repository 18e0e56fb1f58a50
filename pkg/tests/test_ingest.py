import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from telemine.core import RawLog
from telemine.errors import ChannelMismatch, EmptyLog, NoChannelsRetained
from telemine.ingest import (align_dataset, apply_standardizer, fit_standardizer, impute_array,
                             resample_to_grid, select_channels)

from conftest import make_log


def _raw(times, values, labels=None, types=None, channels=("x",)):
    values = np.asarray(values, dtype=float).reshape(len(times), -1)
    labels = [0] * len(times) if labels is None else labels
    types = types or [None] * len(times)
    return RawLog("r", times, channels, values, labels, types)


def brute_resample(times, values, rate):
    """Grid point k gets the closest raw row with |t - k/rate| < half a step."""
    t0 = times[0]
    n = int(np.floor((times[-1] - t0) * rate + 1e-9)) + 1
    out = []
    for k in range(n):
        g = t0 + k / rate
        best, best_d = None, None
        for i, t in enumerate(times):
            dist = abs(t - g) * rate
            if dist < 0.5 - 1e-9 and (best_d is None or dist < best_d):
                best, best_d = i, dist
        out.append(np.nan if best is None else values[best])
    return np.array(out)


def test_on_grid_copy():
    g = resample_to_grid(_raw([0.0, 0.1, 0.2], [1.0, 2.0, 3.0]), 10.0)
    assert g.n_samples == 3
    assert np.array_equal(g.data[:, 0], [1.0, 2.0, 3.0])


def test_off_grid_samples_leave_gaps():
    # grid 0.0, 0.1, 0.2; 0.25 is exactly half a step from 0.2 and does not count
    g = resample_to_grid(_raw([0.0, 0.25], [1.0, 2.0]), 10.0)
    assert g.n_samples == 3
    assert g.data[0, 0] == 1.0
    assert np.isnan(g.data[1, 0]) and np.isnan(g.data[2, 0])


@given(st.lists(st.floats(0.001, 0.35), min_size=1, max_size=25),
       st.sampled_from([5.0, 10.0, 20.0]))
def test_resample_matches_brute_force(gaps, rate):
    times = np.concatenate(([0.0], np.cumsum(gaps)))
    values = np.arange(len(times), dtype=float)
    g = resample_to_grid(_raw(times, values), rate)
    expected = brute_resample(times, values, rate)
    assert g.n_samples == len(expected)
    assert np.array_equal(np.isnan(g.data[:, 0]), np.isnan(expected))
    ok = ~np.isnan(expected)
    assert np.array_equal(g.data[ok, 0], expected[ok])


@given(st.lists(st.floats(0.01, 0.3), min_size=1, max_size=25), st.data())
def test_resample_preserves_label_positivity(gaps, data):
    times = np.concatenate(([0.0], np.cumsum(gaps)))
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(times), max_size=len(times)))
    g = resample_to_grid(_raw(times, np.zeros(len(times)), labels), 10.0)
    assert g.labels.any() == any(labels)


def test_anomalous_row_marks_its_cell():
    times = [0.0, 0.1, 0.21, 0.3]
    g = resample_to_grid(_raw(times, np.zeros(4), [0, 0, 1, 0], [None, None, "drift", None]))
    assert list(g.labels) == [0, 0, 1, 0]
    assert g.anomaly_types[2] == "drift"


def test_too_few_rows():
    with pytest.raises(EmptyLog):
        resample_to_grid(_raw([0.0], [1.0]))


def test_coverage_boundary_is_inclusive():
    presence = [{"a", "b"}] * 6 + [{"b"}] * 4
    assert select_channels(presence, 0.60) == ["a", "b"]
    presence = [{"a", "b"}] * 5 + [{"b"}] * 5
    assert select_channels(presence, 0.60) == ["b"]


def test_no_channels_retained():
    with pytest.raises(NoChannelsRetained):
        select_channels([{"a"}, {"b"}, {"c"}], 0.6)


def test_coverage_against_enumeration(rng):
    names = ["w", "x", "y", "z"]
    for _ in range(20):
        mat = rng.uniform(size=(5, 4)) < 0.6
        presence = [{n for n, p in zip(names, row) if p} for row in mat]
        expected = sorted(n for j, n in enumerate(names) if mat[:, j].sum() >= 3)  # 0.6 * 5
        if expected:
            assert select_channels(presence, 0.6) == expected


def test_impute_examples():
    nan = np.nan
    assert np.array_equal(impute_array(np.array([[1.0], [nan], [3.0]]))[:, 0], [1, 2, 3])
    assert np.array_equal(impute_array(np.array([[nan], [nan], [5.0], [nan]]))[:, 0], [5] * 4)
    assert np.array_equal(impute_array(np.full((4, 1), nan))[:, 0], [0] * 4)


_with_gaps = arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 3)),
                    elements=st.one_of(st.floats(-1e6, 1e6), st.just(np.nan)))


@given(_with_gaps)
def test_impute_idempotent_and_preserving(x):
    once = impute_array(x)
    assert np.all(np.isfinite(once))
    assert np.array_equal(impute_array(once), once)
    ok = np.isfinite(x)
    assert np.array_equal(once[ok], x[ok])


def test_standardizer_examples():
    stats = fit_standardizer([np.array([[1.0], [2.0], [3.0]])], ["x"])
    assert stats.mean[0] == 2.0
    assert stats.std[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-15)
    z = apply_standardizer(make_log([3.0], channels=["x"]), stats)
    assert z.data[0, 0] == pytest.approx(1.224744871391589, abs=1e-12)

    const = fit_standardizer([np.full((5, 1), 4.0)], ["x"])
    assert const.std[0] == 1e-8
    assert apply_standardizer(make_log([4.0, 4.0], channels=["x"]), const).data[0, 0] == 0.0


def test_standardizer_channel_mismatch():
    stats = fit_standardizer([np.zeros((3, 1))], ["x"])
    with pytest.raises(ChannelMismatch):
        apply_standardizer(make_log(np.zeros((3, 1)), channels=["y"]), stats)


@given(arrays(np.float64, st.tuples(st.integers(2, 60), st.integers(1, 4)),
              elements=st.floats(-1e3, 1e3)))
def test_standardized_train_moments(x):
    stats = fit_standardizer([x[: len(x) // 2], x[len(x) // 2:]], [f"c{j}" for j in range(x.shape[1])])
    z = (x - stats.mean) / stats.std
    live = x.std(axis=0) > 1e-3
    assert np.all(np.abs(z.mean(axis=0)[live]) < 1e-6)
    assert np.all(np.abs(z[:, x.max(axis=0) == x.min(axis=0)]) == 0.0)
    assert np.all(np.abs(z.std(axis=0)[live] - 1.0) < 1e-6)


def test_align_dataset_manifest(rng):
    long_t = np.arange(200) / 10.0
    raws = [
        RawLog("a", long_t, ["p", "q"], rng.normal(size=(200, 2)), [0] * 200, [None] * 200),
        RawLog("b", long_t, ["p"], rng.normal(size=(200, 1)), [0] * 200, [None] * 200),
        RawLog("c", long_t[:50], ["p", "q"], rng.normal(size=(50, 2)), [0] * 50, [None] * 50),
    ]
    manifest, logs = align_dataset(raws, 10.0, 0.6, min_samples=108)
    assert [e.usable for e in manifest.entries] == [True, True, False]
    # q is present in 1 of 2 usable logs: below 60%
    assert manifest.channels == ["p"]
    assert [g.channels for g in logs] == [("p",), ("p",)]
    assert all(np.all(np.isfinite(g.data)) for g in logs)
