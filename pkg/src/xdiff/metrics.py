"""Relative errors, instrumented HOSVD timings and benchmark reports."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError
from .hosvd import processing_order, st_hosvd, t_hosvd

REPEATS = 3
_CHUNK = 256


def slice_relative_errors(ref: np.ndarray, approx: np.ndarray) -> np.ndarray:
    """``||ref_k - approx_k||_F / ||ref_k||_F`` for every slice ``k`` of the last axis."""
    ref = np.asarray(ref, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if ref.shape != approx.shape:
        raise ValueError(f"shapes differ: {ref.shape} vs {approx.shape}")
    n_t = ref.shape[-1]
    r = ref.reshape(-1, n_t, order="F")
    a = approx.reshape(-1, n_t, order="F")
    num = np.empty(n_t)
    den = np.empty(n_t)
    # chunk over time to bound the temporary
    for lo in range(0, n_t, _CHUNK):
        hi = min(lo + _CHUNK, n_t)
        num[lo:hi] = np.linalg.norm(r[:, lo:hi] - a[:, lo:hi], axis=0)
        den[lo:hi] = np.linalg.norm(r[:, lo:hi], axis=0)
    zero = np.flatnonzero(den == 0)
    if zero.size:
        raise NumericalError(f"reference slice {int(zero[0])} has zero norm; cannot normalize")
    return num / den


def time_avg_relative_error(ref, approx) -> tuple[float, float]:
    """Per-species mean over all stored time slices of the relative error.

    ``ref`` is a :class:`~xdiff.fom.SnapshotPair` or a ``(u, v)`` pair;
    ``approx`` is a ``(u, v)`` pair (a :class:`~xdiff.rom.Prediction` works).
    """
    ref_u, ref_v = (ref.u, ref.v) if hasattr(ref, "config_digest") else ref
    app_u, app_v = approx
    return (float(slice_relative_errors(ref_u, app_u).mean()),
            float(slice_relative_errors(ref_v, app_v).mean()))


def median_time(fn: Callable, repeats: int = REPEATS):
    """Call ``fn`` ``repeats`` times; return the last result and the median seconds."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    times = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return result, statistics.median(times)


@dataclass(frozen=True)
class TimingComparison:
    """Per-stage SVD seconds of both variants, indexed by processing stage."""

    order: tuple[int, ...]
    ranks: tuple[int, ...]
    t_hosvd: tuple[float, ...]
    st_hosvd: tuple[float, ...]

    @property
    def t_total(self) -> float:
        return sum(self.t_hosvd)

    @property
    def st_total(self) -> float:
        return sum(self.st_hosvd)

    def to_text(self) -> str:
        lines = [f"{'stage':>5} {'mode':>4} {'T-HOSVD [s]':>12} {'ST-HOSVD [s]':>13}"]
        for i, (p, a, b) in enumerate(zip(self.order, self.t_hosvd, self.st_hosvd)):
            lines.append(f"{i + 1:>5} {p + 1:>4} {a:>12.4e} {b:>13.4e}")
        lines.append(f"{'total':>10} {self.t_total:>12.4e} {self.st_total:>13.4e}")
        return "\n".join(lines)


def timing_comparison(t: np.ndarray, ranks: Sequence[int], order=None,
                      repeats: int = REPEATS) -> TimingComparison:
    """SVD wall time per mode for T-HOSVD and per stage for ST-HOSVD.

    T-HOSVD timings are listed in the same mode order as ST-HOSVD's stages.
    Each entry is the median over ``repeats`` runs.
    """
    order = processing_order(t.shape, order)
    t_runs, st_runs = [], []
    for _ in range(repeats):
        stages: list[float] = []
        t_hosvd(t, ranks, timings=stages)
        t_runs.append([stages[p] for p in order])
        stages = []
        st_hosvd(t, ranks, order, timings=stages)
        st_runs.append(stages)
    med = lambda runs: tuple(float(np.median(col)) for col in zip(*runs))  # noqa: E731
    return TimingComparison(order=tuple(order), ranks=tuple(int(r) for r in ranks),
                            t_hosvd=med(t_runs), st_hosvd=med(st_runs))


@dataclass(frozen=True)
class BenchmarkReport:
    errors: dict[str, float]
    ranks: dict[str, tuple[int, ...]]
    saved_memory: dict[str, float]
    fom_seconds: float
    rom_seconds: float
    offline: dict[str, float] = field(default_factory=dict)
    theta: float = float("nan")

    def __post_init__(self):
        if not (self.fom_seconds > 0 and self.rom_seconds > 0):
            raise ValueError("wall-clock times must be positive")
        for name, s in self.saved_memory.items():
            if not 0 <= s < 100:
                raise ValueError(f"saved memory for {name} out of [0, 100): {s}")

    @property
    def speed_up(self) -> float:
        return self.fom_seconds / self.rom_seconds

    def to_text(self) -> str:
        lines = [f"theta = {self.theta:g}", "",
                 f"{'species':<8} {'rel. error':>11} {'saved [%]':>10}  global ranks"]
        for name in self.errors:
            lines.append(f"{name:<8} {self.errors[name]:>11.3e} {self.saved_memory[name]:>10.3f}  "
                         f"{self.ranks[name]}")
        lines += ["", f"FOM  {self.fom_seconds:10.4f} s",
                  f"ROM  {self.rom_seconds:10.4f} s",
                  f"speed-up {self.speed_up:8.1f}"]
        if self.offline:
            lines.append("")
            lines.append("offline phase")
            lines += [f"  {k:<12} {v:10.4f} s" for k, v in self.offline.items()]
        return "\n".join(lines)

    def to_keyvalue(self) -> str:
        kv = {"theta": self.theta, "fom_seconds": self.fom_seconds,
              "rom_seconds": self.rom_seconds, "speed_up": self.speed_up}
        for name in self.errors:
            kv[f"error_{name}"] = self.errors[name]
            kv[f"saved_memory_{name}"] = self.saved_memory[name]
            kv[f"ranks_{name}"] = ",".join(str(r) for r in self.ranks[name])
        for k, v in self.offline.items():
            kv[f"offline_{k}"] = v
        return "".join(f"{k}={v!r}\n" if not isinstance(v, str) else f"{k}={v}\n"
                       for k, v in kv.items())
