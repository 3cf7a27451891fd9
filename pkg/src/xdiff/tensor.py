"""Dense tensors and the Tucker-algebra primitives.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Their linear
layout is first-index-fastest (Fortran order): entry ``(i_1, ..., i_d)``
sits at ``i_1 + n_1 * (i_2 + n_2 * (i_3 + ...))``. Modes are 0-based axes.

The mode-``k`` unfolding has ``dims[k]`` rows; its columns enumerate the
remaining indices in ascending mode order with the first one varying
fastest, which is exactly the linear layout with axis ``k`` removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError


def from_flat(data, dims: Sequence[int]) -> np.ndarray:
    """Build a tensor from its flat first-index-fastest data."""
    dims = tuple(int(n) for n in dims)
    if not dims or any(n < 1 for n in dims):
        raise ValueError(f"dims must be non-empty and positive, got {dims}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 1 or data.size != int(np.prod(dims)):
        raise ValueError(f"{data.size} values cannot fill dims {dims}")
    return data.reshape(dims, order="F")


def to_flat(t: np.ndarray) -> np.ndarray:
    """Flat data of ``t`` in the fixed linear layout (a view when possible)."""
    return np.asarray(t, dtype=np.float64).ravel(order="F")


def _check_mode(t: np.ndarray, mode: int) -> int:
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for an order-{t.ndim} tensor")
    return mode


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``dims[mode] x prod(other dims)``."""
    t = np.asarray(t)
    _check_mode(t, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    dims = tuple(int(n) for n in dims)
    m = np.asarray(m)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for dims {dims}")
    rest = dims[:mode] + dims[mode + 1:]
    expected = (dims[mode], int(np.prod(rest)))
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(f"matrix of shape {m.shape} cannot fold to {dims} along mode {mode}")
    t = np.reshape(m, (dims[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def mode_product(t: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Multiply ``t`` by the matrix ``a`` along ``mode``.

    ``unfold(result, mode) == a @ unfold(t, mode)``.
    """
    t = np.asarray(t)
    a = np.asarray(a)
    _check_mode(t, mode)
    if a.ndim != 2 or a.shape[1] != t.shape[mode]:
        raise ValueError(
            f"matrix of shape {a.shape} does not match mode {mode} of size {t.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(a, t, axes=(1, mode)), 0, mode)


def multi_mode_product(t: np.ndarray, matrices: Sequence[np.ndarray | None],
                       transpose: bool = False) -> np.ndarray:
    """Apply one matrix per mode; ``None`` leaves that mode untouched."""
    out = np.asarray(t)
    if len(matrices) != out.ndim:
        raise ValueError(f"need {out.ndim} matrices, got {len(matrices)}")
    for mode, a in enumerate(matrices):
        if a is not None:
            out = mode_product(out, a.T if transpose else a, mode)
    return out


def tucker_to_full(core: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Expand a Tucker representation into a Fortran-contiguous dense tensor.

    The last mode is applied in a single matrix product so the output is
    written once, in layout order.
    """
    core = np.asarray(core)
    if len(factors) != core.ndim:
        raise ValueError(f"need {core.ndim} factors, got {len(factors)}")
    for mode, (f, r) in enumerate(zip(factors, core.shape)):
        if f.ndim != 2 or f.shape[1] != r:
            raise ValueError(f"factor {mode} of shape {f.shape} does not match core size {r}")
    partial = core
    for mode, f in enumerate(factors[:-1]):
        partial = mode_product(partial, f, mode)
    last = factors[-1]
    lead = partial.shape[:-1]
    wt = np.ascontiguousarray(np.reshape(partial, (-1, partial.shape[-1]), order="F").T)
    full = (last @ wt).T
    return np.reshape(full, lead + (last.shape[0],), order="F")


@dataclass(frozen=True)
class SvdTriplet:
    """Leading singular triplets of a matrix.

    ``left`` is ``n x r`` and ``right`` is ``m x r``, both with orthonormal
    columns. ``discarded`` holds the singular values beyond rank ``r``.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    discarded: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.size

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def _svd(m: np.ndarray, compute_uv: bool = True):
    try:
        return np.linalg.svd(m, full_matrices=False, compute_uv=compute_uv)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix") from exc


def singular_values(m: np.ndarray) -> np.ndarray:
    """All singular values of ``m`` in non-increasing order."""
    return _svd(np.asarray(m, dtype=np.float64), compute_uv=False)


def truncated_svd(m: np.ndarray, rank: int) -> SvdTriplet:
    """Best rank-``rank`` approximation of ``m`` from a full thin SVD.

    Columns are sign-normalized so the largest-magnitude entry of each left
    singular vector is positive; the matching right vector is flipped too.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    if not 1 <= rank <= min(m.shape):
        raise ValueError(f"rank {rank} out of range for a {m.shape[0]}x{m.shape[1]} matrix")
    u, s, vt = _svd(m)
    u = u[:, :rank]
    vt = vt[:rank]
    signs = np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(rank)])
    signs[signs == 0] = 1.0
    return SvdTriplet(
        left=u * signs,
        singular_values=s[:rank].copy(),
        right=(vt * signs[:, None]).T,
        discarded=s[rank:].copy(),
    )
