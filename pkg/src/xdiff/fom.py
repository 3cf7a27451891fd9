"""Full-order IMEX-Euler solver for two-species cross-diffusion systems.

Each step treats diffusion implicitly and reaction explicitly. The implicit
solve is diagonalized by the eigenvectors of the 1D Laplacians: the right
hand side is moved into the eigenbasis, every spectral entry is updated by
an explicit 2x2 inverse, and the result is moved back. In 3D the operator
acting on the x and z axes is the Kronecker sum of the two 1D Laplacians;
its eigenvectors are applied axis by axis and never formed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .discretize import Grid, SpectralFactors, eig_decompose, laplacian_1d
from .errors import ConfigError, NumericalError
from .models import ReactionModel, initial_condition, reaction_eval
from .tensor import mode_product

DIFFUSION_PARAMETERS = ("d_u", "d_v", "d_uv", "d_vu")
REACTION_PARAMETERS = ("alpha", "beta", "gamma")
STUDY_PARAMETERS = DIFFUSION_PARAMETERS + REACTION_PARAMETERS

# relative tolerance on t_final / dt being a whole number of steps
STEP_COUNT_RTOL = 1e-9


@dataclass(frozen=True)
class SimulationConfig:
    """Problem definition for one family of runs.

    The coefficient named by ``study_parameter`` is the parameter of study:
    its stored value is a placeholder (may be NaN) that :meth:`with_theta`
    replaces.
    """

    grid: Grid
    reaction: ReactionModel
    d_u: float
    d_v: float
    d_uv: float
    d_vu: float
    dt: float
    t_final: float
    study_parameter: str
    seed: int = 0

    def __post_init__(self):
        if self.study_parameter not in STUDY_PARAMETERS:
            raise ConfigError(
                f"study_parameter must be one of {STUDY_PARAMETERS}, got {self.study_parameter!r}"
            )
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        ratio = self.t_final / self.dt
        if abs(ratio - round(ratio)) > STEP_COUNT_RTOL * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError(
                f"t_final / dt = {ratio!r} is not a whole number of steps"
            )
        for name in ("d_u", "d_v"):
            value = getattr(self, name)
            if name == self.study_parameter and math.isnan(value):
                continue
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.d_u, self.d_v, self.d_uv, self.d_vu)

    def with_theta(self, theta: float) -> SimulationConfig:
        theta = float(theta)
        name = self.study_parameter
        if name in DIFFUSION_PARAMETERS:
            return dataclasses.replace(self, **{name: theta})
        try:
            reaction = dataclasses.replace(self.reaction, **{name: theta})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return dataclasses.replace(self, reaction=reaction)

    def to_dict(self) -> dict:
        d = {
            "grid": {"extents": list(self.grid.extents), "counts": list(self.grid.counts)},
            "reaction": {
                "kind": self.reaction.kind.value,
                "alpha": self.reaction.alpha,
                "beta": self.reaction.beta,
                "gamma": self.reaction.gamma,
            },
            "diffusion": dict(zip(DIFFUSION_PARAMETERS, self.coefficients)),
            "time": {"dt": self.dt, "t_final": self.t_final},
            "study": {"parameter": self.study_parameter, "seed": self.seed},
        }
        return d

    def digest(self) -> str:
        """SHA-256 of the configuration with the study value blanked out."""
        d = self.to_dict()
        name = self.study_parameter
        section = "diffusion" if name in DIFFUSION_PARAMETERS else "reaction"
        d[section][name] = None
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class StepPrecomp:
    """Everything one IMEX step needs, computed once per (config, theta).

    ``factors[k]`` diagonalizes the operator acting on axis ``k``. Following
    the matrix form ``T_1 U + U T_2^T``, axis 1 stores the decomposition of
    ``T_2^T`` (the eigenvectors ``Y``), so it is applied from the right.
    """

    factors: tuple[SpectralFactors, ...]
    eigen_sums: np.ndarray
    l11: np.ndarray
    l12: np.ndarray
    l21: np.ndarray
    l22: np.ndarray
    dt: float
    coefficients: tuple[float, float, float, float]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.eigen_sums.shape

    @property
    def combined_eigenvalues(self) -> np.ndarray | None:
        """Spectrum of the x-z Kronecker sum as an ``n1 x n3`` array (3D only)."""
        if len(self.factors) != 3:
            return None
        return self.factors[0].eigenvalues[:, None] + self.factors[2].eigenvalues[None, :]


def _laplacians(grid: Grid) -> list[np.ndarray]:
    return [laplacian_1d(n, e) for n, e in zip(grid.counts, grid.extents)]


def precompute(cfg: SimulationConfig, theta: float) -> StepPrecomp:
    cfg = cfg.with_theta(theta)
    mats = _laplacians(cfg.grid)
    factors = []
    for axis, t in enumerate(mats):
        factors.append(eig_decompose(t.T if axis == 1 else t))
    lams = [f.eigenvalues for f in factors]
    s = lams[0][:, None] + lams[1][None, :]
    if len(lams) == 3:
        s = s[:, :, None] + lams[2][None, None, :]
    d_u, d_v, d_uv, d_vu = cfg.coefficients
    dt = cfg.dt
    s11 = 1.0 - d_u * dt * s
    s12 = -d_vu * dt * s
    s21 = -d_uv * dt * s
    s22 = 1.0 - d_v * dt * s
    det = s11 * s22 - s12 * s21
    bad = np.abs(det) <= 1e-12 * np.maximum(1.0, np.abs(s11 * s22))
    if bad.any():
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericalError(
            f"singular 2x2 spectral block at index {where}; try a smaller dt"
        )
    return StepPrecomp(
        factors=tuple(factors),
        eigen_sums=s,
        l11=s22 / det,
        l12=-s12 / det,
        l21=-s21 / det,
        l22=s11 / det,
        dt=dt,
        coefficients=cfg.coefficients,
    )


def _to_spectral(r: np.ndarray, pre: StepPrecomp) -> np.ndarray:
    # r is stacked (species, n1, n2[, n3])
    x, y = pre.factors[0], pre.factors[1]
    if r.ndim == 3:
        return x.vectors_inv @ r @ y.vectors
    z = pre.factors[2]
    a = r @ z.vectors_inv.T
    a = y.vectors.T @ a
    n = a.shape
    return (x.vectors_inv @ a.reshape(n[0], n[1], -1)).reshape(n)


def _from_spectral(h: np.ndarray, pre: StepPrecomp) -> np.ndarray:
    x, y = pre.factors[0], pre.factors[1]
    if h.ndim == 3:
        return x.vectors @ h @ y.vectors_inv
    z = pre.factors[2]
    a = h @ z.vectors.T
    a = y.vectors_inv.T @ a
    n = a.shape
    return (x.vectors @ a.reshape(n[0], n[1], -1)).reshape(n)


def _step(state: np.ndarray, pre: StepPrecomp, model: ReactionModel) -> np.ndarray:
    # overflow shows up as a non-finite result, checked below
    with np.errstate(over="ignore", invalid="ignore"):
        f, g = reaction_eval(model, state[0], state[1])
    rhs = np.empty_like(state)
    np.multiply(f, pre.dt, out=rhs[0])
    np.multiply(g, pre.dt, out=rhs[1])
    rhs += state
    q = _to_spectral(rhs, pre)
    h = np.empty_like(q)
    h[0] = pre.l11 * q[0] + pre.l12 * q[1]
    h[1] = pre.l21 * q[0] + pre.l22 * q[1]
    with np.errstate(over="ignore", invalid="ignore"):
        out = _from_spectral(h, pre)
    if not math.isfinite(float(out.sum())):
        raise NumericalError("non-finite state (blow-up); reduce dt")
    return out


def imex_step(state, pre: StepPrecomp, model: ReactionModel):
    """Advance ``(U, V)`` by one IMEX-Euler step."""
    u, v = (np.asarray(a, dtype=np.float64) for a in state)
    if u.shape != pre.shape or v.shape != pre.shape:
        raise ValueError(f"state shapes {u.shape}, {v.shape} do not match grid {pre.shape}")
    out = _step(np.stack([u, v]), pre, model)
    return out[0], out[1]


def apply_laplacian(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete Laplacian of a grid function via 1D operators on each axis."""
    return sum(mode_product(w, t, k) for k, t in enumerate(_laplacians(grid)))


def sylvester_residual(cfg: SimulationConfig, theta: float, prev, nxt) -> float:
    """Relative residual of ``nxt`` in the implicit system built from ``prev``.

    Evaluates the step equations directly with the 1D Laplacians, i.e. the
    coupled Sylvester system, and returns the larger of the two species'
    ``||lhs - rhs|| / ||rhs||``.
    """
    cfg = cfg.with_theta(theta)
    d_u, d_v, d_uv, d_vu = cfg.coefficients
    u0, v0 = prev
    u1, v1 = nxt
    f, g = reaction_eval(cfg.reaction, u0, v0)
    lu = apply_laplacian(u1, cfg.grid)
    lv = apply_laplacian(v1, cfg.grid)
    res_u = np.linalg.norm(u1 - cfg.dt * (d_u * lu + d_vu * lv) - (u0 + cfg.dt * f))
    res_v = np.linalg.norm(v1 - cfg.dt * (d_uv * lu + d_v * lv) - (v0 + cfg.dt * g))
    res = (res_u / np.linalg.norm(u0 + cfg.dt * f), res_v / np.linalg.norm(v0 + cfg.dt * g))
    return float(max(res))


@dataclass(frozen=True)
class SnapshotPair:
    """Space-time snapshots of both species for one parameter value.

    ``u`` and ``v`` have shape ``grid.counts + (n_t,)`` and are stored in
    Fortran order so each time slice is contiguous.
    """

    u: np.ndarray
    v: np.ndarray
    times: np.ndarray
    theta: float
    config_digest: str
    seconds: float = 0.0

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ValueError(f"u and v shapes differ: {self.u.shape} vs {self.v.shape}")
        if self.u.shape[-1] != len(self.times):
            raise ValueError("last dimension must match the number of stored times")


def run_fom(cfg: SimulationConfig, theta: float, seed: int | None = None,
            callback=None) -> SnapshotPair:
    """Integrate from the seeded initial condition to ``t_final``.

    Stores ``n_steps + 1`` slices, the initial state first. ``callback``, if
    given, is called as ``callback(k, prev, nxt)`` after every step.
    """
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(seed))
    run_cfg = cfg.with_theta(theta)
    pre = precompute(cfg, theta)
    model = run_cfg.reaction
    n_t = cfg.n_steps + 1
    shape = cfg.grid.counts + (n_t,)
    u = np.empty(shape, order="F")
    v = np.empty(shape, order="F")
    u0, v0 = initial_condition(model, cfg.grid, cfg.seed)
    state = np.stack([u0, v0])
    u[..., 0] = u0
    v[..., 0] = v0
    start = time.perf_counter()
    for k in range(1, n_t):
        nxt = _step(state, pre, model)
        u[..., k] = nxt[0]
        v[..., k] = nxt[1]
        if callback is not None:
            callback(k, state, nxt)
        state = nxt
    seconds = time.perf_counter() - start
    return SnapshotPair(
        u=u,
        v=v,
        times=cfg.dt * np.arange(n_t),
        theta=float(theta),
        config_digest=cfg.digest(),
        seconds=seconds,
    )


__all__ = [
    "SimulationConfig",
    "SnapshotPair",
    "StepPrecomp",
    "apply_laplacian",
    "imex_step",
    "precompute",
    "run_fom",
    "sylvester_residual",
]
