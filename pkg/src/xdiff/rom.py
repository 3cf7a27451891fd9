"""Two-level nonintrusive tensor ROM with Gaussian RBF interpolation.

Level I compresses every training snapshot tensor with ST-HOSVD and keeps
only its factor matrices. Level II stacks those factors mode by mode and
truncates their SVD to get parameter-independent global bases. Each
snapshot is projected onto the global bases, and the entries of the
resulting cores are interpolated in the parameter with Gaussian RBFs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .hosvd import head_rank, ranks_from_tolerance, saved_memory, st_hosvd
from .tensor import multi_mode_product, truncated_svd, tucker_to_full

SPECIES = ("u", "v")
KERNELS = ("width", "scaled")


def kernel_width(thetas: Sequence[float]) -> float:
    """``(max - min) / n_p`` over the training parameters."""
    thetas = np.asarray(thetas, dtype=np.float64)
    return float((thetas.max() - thetas.min()) / thetas.size)


def gaussian(omega, rho: float, kernel: str = "width"):
    """Gaussian RBF of the distance ``omega``.

    ``"width"`` is ``exp(-omega**2 / (2 rho))``; ``"scaled"`` is the other
    reading of the same formula, ``exp(-omega**2 * rho / 2)``.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if kernel == "width":
        return np.exp(-(omega**2) / (2.0 * rho))
    if kernel == "scaled":
        return np.exp(-(omega**2) * rho / 2.0)
    raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")


def interpolation_matrix(thetas: Sequence[float], rho: float, kernel: str = "width") -> np.ndarray:
    thetas = np.asarray(thetas, dtype=np.float64)
    return gaussian(np.abs(thetas[:, None] - thetas[None, :]), rho, kernel)


def level1_bases(snapshots: Iterable[np.ndarray], tau1: float, criterion: str = "sum",
                 order=None) -> list[list[np.ndarray]]:
    """ST-HOSVD factor matrices of each snapshot at tolerance-driven ranks."""
    bases = []
    dims = None
    for x in snapshots:
        if dims is None:
            dims = x.shape
        elif x.shape != dims:
            raise ValueError(f"snapshot dims {x.shape} differ from {dims}")
        ranks = ranks_from_tolerance(x, tau1, criterion)
        bases.append(list(st_hosvd(x, ranks, order).factors))
    return bases


def level2_global_basis(factor_lists: Sequence[Sequence[np.ndarray]], tau2: float,
                        criterion: str = "sum") -> list[np.ndarray]:
    """Global per-mode bases from the stacked level-I factors."""
    if not 0 < tau2 < 1:
        raise ValueError(f"tau2 must lie in (0, 1), got {tau2}")
    if not factor_lists:
        raise ValueError("need at least one factor list")
    order = len(factor_lists[0])
    basis = []
    for k in range(order):
        stacked = np.hstack([fl[k] for fl in factor_lists])
        full = truncated_svd(stacked, min(stacked.shape))
        r = head_rank(full.singular_values, tau2, criterion)
        basis.append(full.left[:, :r].copy())
    return basis


def project_cores(snapshots: Iterable[np.ndarray], global_factors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Cores of each snapshot in the global bases."""
    cores = []
    for x in snapshots:
        if x.ndim != len(global_factors):
            raise ValueError(f"order-{x.ndim} snapshot needs {x.ndim} factors")
        for k, f in enumerate(global_factors):
            if f.shape[0] != x.shape[k]:
                raise ValueError(f"factor {k} has {f.shape[0]} rows, snapshot mode has {x.shape[k]}")
        cores.append(np.ascontiguousarray(multi_mode_product(x, global_factors, transpose=True)))
    return cores


def fit_rbf(cores: Sequence[np.ndarray], thetas: Sequence[float], rho: float,
            kernel: str = "width") -> np.ndarray:
    """RBF coefficients, stacked along a trailing axis of length ``n_p``.

    Solves ``B @ gamma = cores`` once for all core entries, with ``B`` the
    symmetric kernel matrix factorized by Cholesky.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    if len(cores) != thetas.size:
        raise ValueError(f"{len(cores)} cores for {thetas.size} parameters")
    if np.unique(thetas).size != thetas.size:
        raise ValueError("training parameters must be distinct")
    if not rho > 0 and thetas.size > 1:
        raise ValueError(f"rho must be positive, got {rho}")
    shape = cores[0].shape
    if any(c.shape != shape for c in cores):
        raise ValueError("cores must share one shape")
    b = interpolation_matrix(thetas, rho, kernel) if thetas.size > 1 else np.ones((1, 1))
    rhs = np.stack([np.ravel(c) for c in cores])
    try:
        factor = scipy.linalg.cho_factor(b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("degenerate parameter spacing; adjust rho or samples") from exc
    if np.linalg.cond(b) > 1e12:
        raise NumericalError("degenerate parameter spacing; adjust rho or samples")
    gamma = scipy.linalg.cho_solve(factor, rhs)
    return np.moveaxis(gamma.reshape((thetas.size,) + shape), 0, -1).copy()


def evaluate_core(gamma: np.ndarray, thetas: Sequence[float], rho: float, theta: float,
                  kernel: str = "width") -> np.ndarray:
    weights = gaussian(np.abs(theta - np.asarray(thetas, dtype=np.float64)), rho, kernel)
    return gamma @ weights


@dataclass(frozen=True)
class SpeciesModel:
    factors: tuple[np.ndarray, ...]
    gamma: np.ndarray

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


@dataclass(frozen=True)
class RomModel:
    species: dict[str, SpeciesModel]
    thetas: np.ndarray
    rho: float
    tau1: float
    tau2: float
    config_digest: str = ""
    kernel: str = "width"
    criterion: str = "sum"

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=np.float64)
        object.__setattr__(self, "thetas", thetas)
        if thetas.size < 2 or np.any(np.diff(thetas) <= 0):
            raise ValueError("need at least two strictly increasing training parameters")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        for name, sp in self.species.items():
            if sp.gamma.shape != sp.ranks + (thetas.size,):
                raise ValueError(f"species {name}: gamma shape {sp.gamma.shape} does not match ranks")
            for f in sp.factors:
                if np.abs(f.T @ f - np.eye(f.shape[1])).max() > 1e-10:
                    raise ValueError(f"species {name}: global factor not orthonormal")

    @property
    def ranks(self) -> dict[str, tuple[int, ...]]:
        return {name: sp.ranks for name, sp in self.species.items()}

    @property
    def dims(self) -> tuple[int, ...]:
        return next(iter(self.species.values())).dims

    def saved_memory(self) -> dict[str, float]:
        return {name: saved_memory(sp.dims, sp.ranks) for name, sp in self.species.items()}

    def core(self, name: str, theta: float) -> np.ndarray:
        sp = self.species[name]
        return evaluate_core(sp.gamma, self.thetas, self.rho, theta, self.kernel)


@dataclass
class Prediction:
    u: np.ndarray
    v: np.ndarray
    theta: float
    extrapolated: bool
    seconds: float

    def __iter__(self):
        return iter((self.u, self.v))


def predict(model: RomModel, theta: float) -> Prediction:
    """ROM solution tensors of both species at ``theta``."""
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    start = time.perf_counter()
    out = {}
    for name, sp in model.species.items():
        out[name] = tucker_to_full(model.core(name, theta), sp.factors)
    seconds = time.perf_counter() - start
    extrapolated = bool(theta < model.thetas[0] or theta > model.thetas[-1])
    return Prediction(u=out["u"], v=out["v"], theta=theta, extrapolated=extrapolated, seconds=seconds)


@dataclass
class BuildTimings:
    level1: float = 0.0
    level2: float = 0.0
    projection: float = 0.0
    rbf: float = 0.0
    level1_ranks: dict = field(default_factory=dict)


def build_rom(snapshots: Sequence, tau1: float, tau2: float, criterion: str = "sum",
              order=None, kernel: str = "width", timings: BuildTimings | None = None) -> RomModel:
    """Build a :class:`RomModel` from a sequence of snapshot pairs.

    ``snapshots`` is indexed twice (level I, then core projection), so it
    may load each pair lazily; only one pair is held at a time.
    """
    n_p = len(snapshots)
    if n_p < 2:
        raise ValueError("need at least two training snapshots")
    if timings is None:
        timings = BuildTimings()
    thetas, digests = [], set()
    per_species: dict[str, list] = {name: [] for name in SPECIES}
    start = time.perf_counter()
    for i in range(n_p):
        pair = snapshots[i]
        thetas.append(float(pair.theta))
        digests.add(pair.config_digest)
        for name in SPECIES:
            x = getattr(pair, name)
            ranks = ranks_from_tolerance(x, tau1, criterion)
            timings.level1_ranks.setdefault(name, []).append(tuple(ranks))
            per_species[name].append(list(st_hosvd(x, ranks, order).factors))
        del pair
    timings.level1 = time.perf_counter() - start
    if len(digests) > 1:
        raise ValueError("training snapshots come from different configurations")
    thetas_arr = np.asarray(thetas)
    if np.unique(thetas_arr).size != n_p:
        raise ValueError("training parameters must be distinct")
    perm = np.argsort(thetas_arr, kind="stable")

    start = time.perf_counter()
    global_factors = {
        name: level2_global_basis([per_species[name][i] for i in perm], tau2, criterion)
        for name in SPECIES
    }
    timings.level2 = time.perf_counter() - start

    cores: dict[str, list] = {name: [None] * n_p for name in SPECIES}
    start = time.perf_counter()
    for i in range(n_p):
        pair = snapshots[i]
        for name in SPECIES:
            cores[name][i] = project_cores([getattr(pair, name)], global_factors[name])[0]
        del pair
    timings.projection = time.perf_counter() - start
    sorted_thetas = thetas_arr[perm]
    rho = kernel_width(sorted_thetas)
    start = time.perf_counter()
    species = {
        name: SpeciesModel(
            factors=tuple(global_factors[name]),
            gamma=fit_rbf([cores[name][i] for i in perm], sorted_thetas, rho, kernel),
        )
        for name in SPECIES
    }
    timings.rbf = time.perf_counter() - start
    return RomModel(
        species=species,
        thetas=sorted_thetas,
        rho=rho,
        tau1=tau1,
        tau2=tau2,
        config_digest=digests.pop(),
        kernel=kernel,
        criterion=criterion,
    )
