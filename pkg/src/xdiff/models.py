"""Schnakenberg and Brusselator kinetics, equilibria and initial data.

Initial perturbations are drawn from numpy's PCG64 generator seeded with the
configured integer. Draws fill the field in linear-layout (first index
fastest) order, ``u`` first and then ``v``, so the same seed gives the same
fields on every platform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .discretize import Grid


class Kinetics(str, enum.Enum):
    SCHNAKENBERG = "schnakenberg"
    BRUSSELATOR = "brusselator"


# (u, v) perturbation divisors for u_e + U(0,1)/s_u, v_e + U(0,1)/s_v
NOISE_DIVISORS = {
    Kinetics.SCHNAKENBERG: (100.0, 100.0),
    Kinetics.BRUSSELATOR: (3.0, 10.0),
}


@dataclass(frozen=True)
class ReactionModel:
    kind: Kinetics
    alpha: float
    beta: float
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kinetics(self.kind))
        if self.kind is Kinetics.SCHNAKENBERG and not self.gamma > 0:
            raise ValueError(f"Schnakenberg gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class Equilibrium:
    u_e: float
    v_e: float


def reaction_eval(model: ReactionModel, u, v):
    """Entrywise reaction terms ``(f(u, v), g(u, v))``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"u and v shapes differ: {u.shape} vs {v.shape}")
    u2v = u * u * v
    a, b = model.alpha, model.beta
    if model.kind is Kinetics.SCHNAKENBERG:
        c = model.gamma
        return c * (a - u + u2v), c * (b - u2v)
    return a - (b + 1.0) * u + u2v, b * u - u2v


def equilibrium(model: ReactionModel) -> Equilibrium:
    a, b = model.alpha, model.beta
    if model.kind is Kinetics.SCHNAKENBERG:
        if a + b == 0:
            raise ValueError("Schnakenberg equilibrium undefined for alpha + beta = 0")
        return Equilibrium(a + b, b / (a + b) ** 2)
    if a == 0:
        raise ValueError("Brusselator equilibrium undefined for alpha = 0")
    return Equilibrium(a, b / a)


def initial_condition(model: ReactionModel, grid: Grid, seed: int):
    """Uniform random perturbation of the equilibrium on every grid node."""
    eq = equilibrium(model)
    s_u, s_v = NOISE_DIVISORS[model.kind]
    rng = np.random.Generator(np.random.PCG64(seed))
    n = grid.size
    du = rng.random(n)
    dv = rng.random(n)
    u0 = (eq.u_e + du / s_u).reshape(grid.counts, order="F")
    v0 = (eq.v_e + dv / s_v).reshape(grid.counts, order="F")
    return u0, v0
