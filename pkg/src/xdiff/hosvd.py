"""Truncated and sequentially truncated HOSVD (Tucker compression).

Rank selection follows the tail criterion on plain singular value sums::

    sqrt(sum_{i > r} s_i) / sqrt(sum_i s_i) < tau

``criterion="energy"`` switches to the usual sum-of-squares version.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError
from .tensor import fold, multi_mode_product, singular_values, truncated_svd, tucker_to_full, unfold

CRITERIA = ("sum", "energy")
ORTHO_TOL = 1e-10


def _weights(sv: np.ndarray, criterion: str) -> np.ndarray:
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    sv = np.clip(np.asarray(sv, dtype=np.float64), 0.0, None)
    return sv if criterion == "sum" else sv**2


def tail_rank(sv: Sequence[float], tau: float, criterion: str = "sum") -> int:
    """Smallest ``r >= 1`` whose discarded tail satisfies the tolerance."""
    if not 0 < tau < 1:
        raise ValueError(f"tolerance must lie in (0, 1), got {tau}")
    w = _weights(sv, criterion)
    total = w.sum()
    if total == 0:
        return 1
    # tails[r] = sum of w[r:], i.e. everything beyond the first r values
    tails = np.append(np.cumsum(w[::-1])[::-1], 0.0)
    ok = np.flatnonzero(tails[1:] < tau**2 * total)
    return int(ok[0]) + 1


def head_rank(sv: Sequence[float], tau: float, criterion: str = "sum") -> int:
    """Smallest ``r >= 1`` whose retained share reaches ``1 - tau``."""
    if not 0 < tau < 1:
        raise ValueError(f"tolerance must lie in (0, 1), got {tau}")
    w = _weights(sv, criterion)
    total = w.sum()
    if total == 0:
        return 1
    heads = np.cumsum(w)
    ok = np.flatnonzero(heads >= (1.0 - tau) * total)
    return int(ok[0]) + 1 if ok.size else w.size


def ranks_from_tolerance(t: np.ndarray, tau1: float, criterion: str = "sum") -> list[int]:
    """Per-mode target ranks from the singular values of each unfolding."""
    if not 0 < tau1 < 1:
        raise ValueError(f"tau1 must lie in (0, 1), got {tau1}")
    return [tail_rank(singular_values(unfold(t, k)), tau1, criterion) for k in range(t.ndim)]


@dataclass(frozen=True)
class TuckerModel:
    """Core tensor and orthonormal factors of a truncated Tucker model.

    ``discarded[k]`` holds the singular values dropped when mode ``k`` was
    truncated; they define the a-priori error bounds.
    """

    core: np.ndarray
    factors: tuple[np.ndarray, ...]
    discarded: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) != self.core.ndim:
            raise ValueError(f"need {self.core.ndim} factors, got {len(self.factors)}")
        for k, f in enumerate(self.factors):
            n, r = f.shape
            if r != self.core.shape[k] or r > n:
                raise ValueError(f"factor {k} of shape {f.shape} does not match core {self.core.shape}")
            if np.abs(f.T @ f - np.eye(r)).max() > ORTHO_TOL:
                raise ValueError(f"factor {k} does not have orthonormal columns")

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    @property
    def original_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def error_bounds(self) -> tuple[float, float]:
        """``(min_k |tail_k|^2, sum_k |tail_k|^2)`` bracketing the squared error."""
        sq = [float(np.sum(d**2)) for d in self.discarded]
        return min(sq), sum(sq)


def _check_ranks(dims, ranks) -> list[int]:
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(dims):
        raise ValueError(f"need {len(dims)} ranks, got {len(ranks)}")
    for k, (n, r) in enumerate(zip(dims, ranks)):
        if not 1 <= r <= n:
            raise ValueError(f"rank {r} out of range for mode {k} of size {n}")
    return ranks


def _check_core(t: np.ndarray, core: np.ndarray):
    if np.linalg.norm(core) > np.linalg.norm(t) * (1 + 1e-12) + 1e-300:
        raise NumericalError("core norm exceeds tensor norm")


def t_hosvd(t: np.ndarray, ranks: Sequence[int], timings: list | None = None) -> TuckerModel:
    """Truncated HOSVD: every factor comes from an unfolding of ``t`` itself."""
    t = np.asarray(t, dtype=np.float64)
    ranks = _check_ranks(t.shape, ranks)
    factors, discarded = [], []
    for k, r in enumerate(ranks):
        m = unfold(t, k)
        start = time.perf_counter()
        trip = truncated_svd(m, min(r, min(m.shape)))
        if timings is not None:
            timings.append(time.perf_counter() - start)
        left, disc = trip.left, trip.discarded
        if left.shape[1] < r:
            # more columns requested than the unfolding has: complete the basis
            left = _complete_basis(left, r)
        factors.append(left)
        discarded.append(disc)
    core = multi_mode_product(t, factors, transpose=True)
    _check_core(t, core)
    return TuckerModel(core=np.asarray(core), factors=tuple(factors), discarded=tuple(discarded))


def _complete_basis(q: np.ndarray, r: int) -> np.ndarray:
    n, k = q.shape
    rng = np.random.Generator(np.random.PCG64(k))
    extra = rng.standard_normal((n, r - k))
    extra -= q @ (q.T @ extra)
    full, _ = np.linalg.qr(np.hstack([q, extra]))
    full[:, :k] = q
    return full


def processing_order(dims: Sequence[int], order=None) -> list[int]:
    """Resolve an ST-HOSVD processing order.

    ``None`` means modes in natural order; ``"ascending"`` sorts modes by
    size, smallest first; otherwise ``order`` must be a permutation.
    """
    d = len(dims)
    if order is None:
        return list(range(d))
    if isinstance(order, str):
        if order != "ascending":
            raise ValueError(f"unknown processing order {order!r}")
        return sorted(range(d), key=lambda k: (dims[k], k))
    order = [int(p) for p in order]
    if sorted(order) != list(range(d)):
        raise ValueError(f"{order} is not a permutation of the {d} modes")
    return order


def st_hosvd(t: np.ndarray, ranks: Sequence[int], order=None,
             timings: list | None = None) -> TuckerModel:
    """Sequentially truncated HOSVD.

    Each stage unfolds the current (already shrunk) core along the next mode
    in ``order``, keeps the leading singular triplets, and replaces the
    unfolding with ``diag(s) @ right.T`` before refolding.
    """
    t = np.asarray(t, dtype=np.float64)
    ranks = _check_ranks(t.shape, ranks)
    order = processing_order(t.shape, order)
    core = t
    factors: list = [None] * t.ndim
    discarded: list = [None] * t.ndim
    for p in order:
        m = unfold(core, p)
        r = ranks[p]
        start = time.perf_counter()
        if r <= min(m.shape):
            trip = truncated_svd(m, r)
            reduced = trip.singular_values[:, None] * trip.right.T
            left = trip.left
        else:
            # earlier truncations left fewer columns than the target rank
            trip = truncated_svd(m, min(m.shape))
            left = _complete_basis(trip.left, r)
            reduced = left.T @ m
        if timings is not None:
            timings.append(time.perf_counter() - start)
        dims = list(core.shape)
        dims[p] = r
        core = fold(reduced, p, dims)
        factors[p] = left
        discarded[p] = trip.discarded
    core = np.asarray(core)
    _check_core(t, core)
    return TuckerModel(core=core, factors=tuple(factors), discarded=tuple(discarded))


def reconstruct(m: TuckerModel) -> np.ndarray:
    return tucker_to_full(m.core, m.factors)


def compression_factor(original_dims: Sequence[int], ranks: Sequence[int]) -> float:
    """Storage of the full Tucker form over storage of the truncated one."""
    n = np.asarray(original_dims, dtype=np.float64)
    r = np.asarray(ranks, dtype=np.float64)
    if n.shape != r.shape or np.any(r > n) or np.any(r < 1):
        raise ValueError(f"ranks {tuple(ranks)} incompatible with dims {tuple(original_dims)}")
    return float((np.prod(n) + np.sum(n**2)) / (np.prod(r) + np.sum(n * r)))


def saved_memory(original_dims: Sequence[int], ranks: Sequence[int]) -> float:
    """Percentage of storage saved, ``100 * (1 - 1 / C_F)``."""
    return 100.0 * (1.0 - 1.0 / compression_factor(original_dims, ranks))
