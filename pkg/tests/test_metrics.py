import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xdiff.errors import NumericalError
from xdiff.fom import SnapshotPair
from xdiff.hosvd import compression_factor, saved_memory
from xdiff.metrics import (
    BenchmarkReport, median_time, slice_relative_errors, time_avg_relative_error,
    timing_comparison,
)


def test_identical_and_doubled():
    rng = np.random.default_rng(0)
    u, v = rng.random((4, 5, 6)), rng.random((4, 5, 6))
    assert time_avg_relative_error((u, v), (u, v)) == (0.0, 0.0)
    e = time_avg_relative_error((u, v), (2 * u, 2 * v))
    assert e == pytest.approx((1.0, 1.0), rel=1e-14)


def test_accepts_snapshot_pair():
    u = np.ones((3, 3, 4))
    pair = SnapshotPair(u=u, v=u, times=np.arange(4.0), theta=0.0, config_digest="")
    assert time_avg_relative_error(pair, (u * 1.5, u)) == pytest.approx((0.5, 0.0))


def test_slice_errors_match_definition():
    rng = np.random.default_rng(1)
    ref, app = rng.random((3, 4, 600)), rng.random((3, 4, 600))
    expected = [np.linalg.norm(ref[..., k] - app[..., k]) / np.linalg.norm(ref[..., k])
                for k in range(600)]
    np.testing.assert_allclose(slice_relative_errors(ref, app), expected, rtol=1e-13)


def test_zero_reference_slice():
    ref = np.ones((2, 2, 3))
    ref[..., 1] = 0
    with pytest.raises(NumericalError, match="slice 1"):
        slice_relative_errors(ref, ref)
    with pytest.raises(ValueError):
        slice_relative_errors(ref, ref[..., :2])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10))
def test_scale_detection(seed, c):
    ref = np.random.default_rng(seed).random((3, 2, 5)) + 0.1
    (e, _) = time_avg_relative_error((ref, ref), (c * ref, ref))
    assert e == pytest.approx(abs(c - 1), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("ranks", [(2, 3, 2), (4, 5, 6)])
def test_timing_comparison_shape(ranks):
    t = np.random.default_rng(2).standard_normal((4, 5, 6))
    result = timing_comparison(t, ranks, (0, 1, 2))
    assert len(result.t_hosvd) == len(result.st_hosvd) == 3
    assert all(x > 0 for x in result.t_hosvd + result.st_hosvd)
    assert result.t_total == pytest.approx(sum(result.t_hosvd))
    assert "total" in result.to_text()


def test_median_time():
    calls = []
    result, seconds = median_time(lambda: calls.append(1) or len(calls))
    assert result == 3 and seconds >= 0
    with pytest.raises(ValueError):
        median_time(lambda: None, 0)


def make_report(**kw):
    args = dict(errors={"u": 0.1, "v": 0.08}, ranks={"u": (11, 10, 9), "v": (10, 10, 8)},
                saved_memory={"u": saved_memory((101, 101, 5001), (11, 10, 9)),
                              "v": saved_memory((101, 101, 5001), (10, 10, 8))},
                fom_seconds=40.0, rom_seconds=2.0, theta=0.65)
    args.update(kw)
    return BenchmarkReport(**args)


def test_report_values_and_output():
    r = make_report()
    assert r.speed_up == 20.0
    c = compression_factor((101, 101, 5001), (11, 10, 9))
    assert abs(r.saved_memory["u"] - 100 * (1 - 1 / c)) < 1e-12
    kv = dict(line.split("=", 1) for line in r.to_keyvalue().splitlines())
    assert float(kv["speed_up"]) == 20.0 and kv["ranks_u"] == "11,10,9"
    assert "speed-up" in r.to_text()


@pytest.mark.parametrize("kw", [{"fom_seconds": 0.0}, {"rom_seconds": -1.0},
                                {"saved_memory": {"u": 100.0}}])
def test_report_invariants(kw):
    with pytest.raises(ValueError):
        make_report(**kw)
