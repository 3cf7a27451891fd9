import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xdiff.errors import NumericalError
from xdiff.hosvd import (
    TuckerModel, compression_factor, head_rank, processing_order, ranks_from_tolerance,
    reconstruct, saved_memory, st_hosvd, t_hosvd, tail_rank,
)
from xdiff.tensor import mode_product, singular_values, unfold


def rank_one(dims, seed=0):
    rng = np.random.default_rng(seed)
    vecs = [rng.standard_normal(n) for n in dims]
    t = vecs[0]
    for v in vecs[1:]:
        t = np.multiply.outer(t, v)
    return t


def decaying(dims, seed=0):
    """Tensor whose unfoldings have singular values decaying like 2**-i."""
    rng = np.random.default_rng(seed)
    weights = np.ones(())
    for n in dims:
        weights = np.multiply.outer(weights, 2.0 ** -np.arange(n))
    t = rng.standard_normal(dims) * weights
    for k, n in enumerate(dims):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        t = mode_product(t, q, k)
    return t


def scan_rank(sv, tau):
    total = np.sum(sv)
    for r in range(1, len(sv) + 1):
        if math.sqrt(np.sum(sv[r:])) / math.sqrt(total) < tau:
            return r
    return len(sv)


def test_rank_one_ranks():
    t = rank_one((4, 5, 6))
    assert ranks_from_tolerance(t, 0.3) == [1, 1, 1]
    assert ranks_from_tolerance(t, 1e-6) == [1, 1, 1]


def test_tiny_tolerance_keeps_full_spectrum():
    t = np.random.default_rng(1).standard_normal((3, 4, 5))
    assert ranks_from_tolerance(t, 1e-12) == [3, 4, 5]


def test_rank_matches_brute_force_scan():
    t = decaying((10, 12, 14))
    expected = [scan_rank(singular_values(unfold(t, k)), 1e-2) for k in range(3)]
    assert ranks_from_tolerance(t, 1e-2) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(1e-6, 0.99))
def test_tail_rank_is_smallest_passing(values, tau):
    sv = np.sort(np.asarray(values))[::-1]
    if sv.sum() == 0:
        assert tail_rank(sv, tau) == 1
        return
    r = tail_rank(sv, tau)
    assert np.sum(sv[r:]) < tau**2 * np.sum(sv)
    if r > 1:
        assert not np.sum(sv[r - 1:]) < tau**2 * np.sum(sv)


def test_energy_criterion_is_squared():
    sv = np.array([1.0, 0.1, 0.01])
    assert tail_rank(sv, 0.05, "energy") == 2
    assert tail_rank(sv, 0.05, "sum") == 3
    assert head_rank(sv, 0.05) == 2
    assert head_rank(sv, 0.05, "energy") == 1
    with pytest.raises(ValueError):
        tail_rank(sv, 0.1, "max")


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.5])
def test_tolerance_range(tau):
    with pytest.raises(ValueError):
        ranks_from_tolerance(np.ones((2, 2)), tau)


@pytest.mark.parametrize("fn", [t_hosvd, st_hosvd])
def test_full_rank_is_exact(fn):
    t = np.random.default_rng(2).standard_normal((4, 5, 6))
    m = fn(t, t.shape)
    assert np.linalg.norm(reconstruct(m) - t) / np.linalg.norm(t) < 1e-10


@pytest.mark.parametrize("fn", [t_hosvd, st_hosvd])
def test_rank_one_is_exact(fn):
    t = rank_one((5, 6, 7), 3)
    m = fn(t, (1, 1, 1))
    assert np.linalg.norm(reconstruct(m) - t) / np.linalg.norm(t) < 1e-10


def test_rank_one_subspaces_agree():
    t = rank_one((5, 6, 7), 4)
    a, b = t_hosvd(t, (1, 1, 1)), st_hosvd(t, (1, 1, 1), (0, 1, 2))
    for fa, fb in zip(a.factors, b.factors):
        assert abs(abs((fa.T @ fb).item()) - 1) < 1e-10


@pytest.mark.parametrize("fn, dims, ranks", [
    (t_hosvd, (8, 9, 10), (4, 4, 4)), (st_hosvd, (30, 30, 30), (5, 5, 5)),
])
def test_error_bounds_examples(fn, dims, ranks):
    t = np.random.default_rng(5).standard_normal(dims)
    m = fn(t, ranks)
    err2 = np.linalg.norm(reconstruct(m) - t) ** 2
    lo, hi = m.error_bounds()
    assert lo - 1e-10 <= err2 <= hi + 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(4, 12), min_size=3, max_size=4), st.data())
def test_bounds_and_orthonormality(seed, dims, data):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(dims)
    ranks = [data.draw(st.integers(1, n)) for n in dims]
    order = data.draw(st.permutations(range(len(dims))))
    for m in (t_hosvd(t, ranks), st_hosvd(t, ranks, order)):
        err2 = np.linalg.norm(reconstruct(m) - t) ** 2
        lo, hi = m.error_bounds()
        assert lo - 1e-10 * (1 + lo) <= err2 <= hi + 1e-10 * (1 + hi)
        for f in m.factors:
            assert np.abs(f.T @ f - np.eye(f.shape[1])).max() < 1e-10
        assert np.linalg.norm(m.core) <= np.linalg.norm(t) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.permutations(range(3)))
def test_st_full_rank_any_order(seed, order):
    t = np.random.default_rng(seed).standard_normal((4, 6, 5))
    m = st_hosvd(t, t.shape, order)
    assert np.linalg.norm(reconstruct(m) - t) / np.linalg.norm(t) < 1e-10


def test_pythagoras_for_t_hosvd():
    t = np.random.default_rng(6).standard_normal((7, 8, 9))
    m = t_hosvd(t, (3, 4, 5))
    err2 = np.linalg.norm(reconstruct(m) - t) ** 2
    expected = np.linalg.norm(t) ** 2 - np.linalg.norm(m.core) ** 2
    assert err2 == pytest.approx(expected, rel=1e-8)


def test_monotone_in_each_rank():
    t = np.random.default_rng(7).standard_normal((6, 7, 8))
    for k in range(3):
        errs = []
        for r in range(1, t.shape[k] + 1):
            ranks = [3, 3, 3]
            ranks[k] = r
            errs.append(np.linalg.norm(reconstruct(t_hosvd(t, ranks)) - t))
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_reconstruct_is_multilinear():
    t = np.random.default_rng(8).standard_normal((5, 5, 5))
    m = t_hosvd(t, (2, 3, 4))
    scaled = TuckerModel(core=2.5 * m.core, factors=m.factors)
    np.testing.assert_allclose(reconstruct(scaled), 2.5 * reconstruct(m), rtol=1e-13)


def test_invalid_arguments():
    t = np.ones((3, 4, 5))
    with pytest.raises(ValueError):
        t_hosvd(t, (4, 1, 1))
    with pytest.raises(ValueError):
        st_hosvd(t, (1, 1))
    with pytest.raises(ValueError):
        st_hosvd(t, (1, 1, 1), (0, 0, 1))
    with pytest.raises(ValueError):
        TuckerModel(core=np.ones((2, 2)), factors=(np.ones((3, 2)), np.eye(2)))


def test_processing_orders():
    assert processing_order((5, 3, 9)) == [0, 1, 2]
    assert processing_order((5, 3, 9), "ascending") == [1, 0, 2]
    with pytest.raises(ValueError):
        processing_order((5, 3, 9), "descending")


def test_rank_beyond_shrunk_unfolding():
    # after truncating modes 0 and 1 to 1, mode 2 has a single column left
    t = np.random.default_rng(9).standard_normal((4, 4, 3))
    m = st_hosvd(t, (1, 1, 3))
    assert m.ranks == (1, 1, 3)
    f = m.factors[2]
    np.testing.assert_allclose(f.T @ f, np.eye(3), atol=1e-12)


def test_compression_examples():
    assert compression_factor((4, 5, 6), (4, 5, 6)) == 1.0
    assert saved_memory((4, 5, 6), (4, 5, 6)) == 0.0
    assert compression_factor((101, 101, 5001), (11, 10, 9)) == pytest.approx(1580.3, abs=0.05)
    assert saved_memory((101, 101, 5001), (11, 10, 9)) == pytest.approx(99.94, abs=0.005)
    assert saved_memory((31, 31, 31, 1001), (14, 7, 7, 6)) > 99
    with pytest.raises(ValueError):
        compression_factor((3, 3), (4, 1))


def test_core_norm_guard(monkeypatch):
    import xdiff.hosvd as h
    monkeypatch.setattr(h, "multi_mode_product", lambda t, f, transpose: 2 * t)
    with pytest.raises(NumericalError):
        h.t_hosvd(np.ones((2, 2, 2)), (2, 2, 2))
