"""Wall-clock comparison: ambient-dimension scatter distance vs reduced pipeline.

Both paths start from the same raw feature columns and end at the same scalar.
The naive path builds d x d scatters and runs the distance there; the projected
path first applies the exact joint reduction to dimension N + N*. Timing uses
the monotonic clock, discards warmup repetitions, and runs strictly serially.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .distances import DistanceKind, dist_sq
from .errors import ParameterError
from .nystrom import isometric_project
from .spd import regularize, symmetrize

WARMUP_REPS = 2


def _scatter_of(columns: np.ndarray):
    mu = columns.mean(axis=1, keepdims=True)
    centered = columns - mu
    return symmetrize(centered @ centered.T / columns.shape[1])


def ambient_distance_eval(phi_s: np.ndarray, phi_t: np.ndarray, kind: DistanceKind, eps: float) -> float:
    """Distance between the two regularized scatters built in ambient dimension."""
    sig_s = regularize(_scatter_of(phi_s), eps)
    sig_t = regularize(_scatter_of(phi_t), eps)
    return dist_sq(kind, sig_s, sig_t)


def projected_distance_eval(phi_s: np.ndarray, phi_t: np.ndarray, kind: DistanceKind, eps: float) -> float:
    """Same quantity through the exact reduction to dimension N + N*."""
    red_s, red_t, _ = isometric_project(phi_s, phi_t)
    sig_s = regularize(_scatter_of(red_s), eps)
    sig_t = regularize(_scatter_of(red_t), eps)
    return dist_sq(kind, sig_s, sig_t)


@dataclass(frozen=True)
class BenchResult:
    kind: DistanceKind
    d: int
    n: int
    nstar: int
    reps: int
    naive_mean: float
    naive_std: float
    projected_mean: float
    projected_std: float
    naive_value: float
    projected_value: float

    @property
    def speedup(self) -> float:
        return self.naive_mean / self.projected_mean


def _time_fn(fn, reps: int) -> tuple[float, float, float]:
    for _ in range(WARMUP_REPS):
        value = fn()
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        value = fn()
        samples.append(time.perf_counter() - start)
    return float(np.mean(samples)), float(np.std(samples)), value


def run_bench(
    d: int,
    n: int,
    nstar: int,
    reps: int,
    kind: DistanceKind,
    eps: float = 1e-6,
    seed: int = 0,
) -> BenchResult:
    """Time both evaluation paths on one random instance of the given sizes."""
    if reps < 3:
        raise ParameterError(f"reps must be at least 3, got {reps}")
    if d < 1 or n < 1 or nstar < 1:
        raise ParameterError("d, n and nstar must all be at least 1")
    rng = np.random.default_rng(seed)
    phi_s = rng.normal(size=(d, n))
    phi_t = rng.normal(size=(d, nstar))
    naive_mean, naive_std, naive_value = _time_fn(
        lambda: ambient_distance_eval(phi_s, phi_t, kind, eps), reps
    )
    proj_mean, proj_std, proj_value = _time_fn(
        lambda: projected_distance_eval(phi_s, phi_t, kind, eps), reps
    )
    return BenchResult(
        kind=kind, d=d, n=n, nstar=nstar, reps=reps,
        naive_mean=naive_mean, naive_std=naive_std,
        projected_mean=proj_mean, projected_std=proj_std,
        naive_value=naive_value, projected_value=proj_value,
    )
