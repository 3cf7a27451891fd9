"""Finite-difference Neumann Laplacians, their spectra, and tensor grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[0, extents[0]] x ... x [0, extents[-1]]``."""

    extents: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        if len(self.extents) != len(self.counts):
            raise ValueError("extents and counts must have the same length")
        if len(self.counts) not in (2, 3):
            raise ValueError(f"only 2D and 3D grids are supported, got {len(self.counts)} axes")
        if any(n < 3 for n in self.counts):
            raise ValueError(f"every axis needs at least 3 nodes, got {self.counts}")
        if any(not e > 0 for e in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.counts))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))


def grid_nodes(g: Grid) -> list[np.ndarray]:
    """Node coordinates ``(i - 1) * h_k`` along each axis."""
    return [np.arange(n) * h for n, h in zip(g.counts, g.spacings)]


def laplacian_1d(n: int, length: float) -> np.ndarray:
    """Second-difference matrix with homogeneous Neumann boundary rows.

    Interior rows are ``(1, -2, 1) / h**2``; the boundary rows ``(-2, 2)`` and
    ``(2, -2)`` come from mirroring the ghost node. The matrix is not
    symmetric.
    """
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got {n}")
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    h = length / (n - 1)
    t = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    t[idx, idx - 1] = 1.0
    t[idx, idx] = -2.0
    t[idx, idx + 1] = 1.0
    t[0, :2] = (-2.0, 2.0)
    t[-1, -2:] = (2.0, -2.0)
    return t / h**2


@dataclass(frozen=True)
class SpectralFactors:
    """``t = vectors @ diag(eigenvalues) @ vectors_inv``."""

    vectors: np.ndarray
    vectors_inv: np.ndarray
    eigenvalues: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors_inv


RESIDUAL_TOL = 1e-10


def eig_decompose(t: np.ndarray, residual_tol: float = RESIDUAL_TOL) -> SpectralFactors:
    """Real eigendecomposition of a diagonalizable, possibly nonsymmetric matrix.

    Eigenvalues come back in ascending order. Each eigenvector is scaled to
    unit length with its largest-magnitude entry positive.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {t.shape}")
    scale = np.linalg.norm(t)
    try:
        lam, vec = np.linalg.eig(t)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed for a {t.shape[0]}x{t.shape[0]} matrix") from exc
    if np.any(np.abs(lam.imag) > 1e-8 * max(scale, 1.0)):
        raise NumericalError("operator not real-diagonalizable")
    if np.iscomplexobj(vec):
        if np.any(np.abs(vec.imag) > 1e-8):
            raise NumericalError("operator not real-diagonalizable")
        vec = vec.real
    lam = lam.real
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vec = vec[:, order]
    vec = vec / np.linalg.norm(vec, axis=0)
    signs = np.sign(vec[np.argmax(np.abs(vec), axis=0), np.arange(vec.shape[1])])
    vec = vec * signs
    try:
        vec_inv = np.linalg.inv(vec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigenvector matrix is singular") from exc
    factors = SpectralFactors(vectors=vec, vectors_inv=vec_inv, eigenvalues=lam)
    denom = scale if scale > 0 else 1.0
    residual = np.linalg.norm(factors.reconstruct() - t) / denom
    if residual > residual_tol:
        raise NumericalError(f"eigendecomposition residual {residual:.2e} exceeds {residual_tol:.0e}")
    return factors


def laplacian_nd(counts: Sequence[int], extents: Sequence[float]) -> np.ndarray:
    """Dense Kronecker-assembled Laplacian acting on layout-order vectors.

    Only meant for small grids; used as a brute-force reference.
    """
    mats = [laplacian_1d(n, e) for n, e in zip(counts, extents)]
    eyes = [np.eye(n) for n in counts]
    size = int(np.prod(counts))
    a = np.zeros((size, size))
    for k in range(len(counts)):
        term = np.ones((1, 1))
        # first index fastest: the last axis is the outermost Kronecker factor
        for j in reversed(range(len(counts))):
            term = np.kron(term, mats[j] if j == k else eyes[j])
        a += term
    return a
