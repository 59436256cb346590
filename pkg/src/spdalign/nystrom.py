"""Kernel feature maps and the exact isometric self-projection of feature columns.

With pivots equal to the data and a linear kernel, the feature map collapses to
Pi(X) = (X^T X)^{1/2}: a reduction from ambient dimension d to d' = (number of
columns) that preserves all pairwise inner products exactly, hence every
rotation-invariant distance between the scatter matrices built on either side.
The matching row-orthonormal projector Zbar = (X^T X)^{-1/2} X^T is what
gradients are pushed back through; it may be treated as a constant when
differentiating the reduced pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, SingularityError
from .spd import EIGENVALUE_FLOOR, symmetrize

# Diagonal jitter applied to the pivot kernel matrix before inversion.
KERNEL_JITTER = 1e-12

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def linear_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gram block of plain inner products: (columns of x)^T (columns of y)."""
    return x.T @ y


@dataclass(frozen=True)
class Projection:
    """Row-orthonormal reduction map Zbar of shape (reduced_dim, ambient_dim)."""

    projector: np.ndarray

    @property
    def reduced_dim(self) -> int:
        return self.projector.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.projector.shape[1]


def nystrom_map(pivots: np.ndarray, data: np.ndarray, kernel: Kernel = linear_kernel) -> np.ndarray:
    """Feature map K_ZZ^{-1/2} K_ZX of ``data`` against ``pivots``.

    With pivots == data the Gram matrix of the result reproduces the kernel
    matrix exactly (up to the 1e-12 jitter used to keep K_ZZ invertible).
    """
    pivots = np.asarray(pivots, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    if pivots.ndim != 2 or data.ndim != 2:
        raise DimensionError("pivots and data must be 2-d column matrices")
    if pivots.shape[0] != data.shape[0]:
        raise DimensionError(
            f"pivot dimension {pivots.shape[0]} does not match data dimension {data.shape[0]}"
        )
    kzz = symmetrize(kernel(pivots, pivots)).entries
    kzz[np.diag_indices_from(kzz)] += KERNEL_JITTER
    values, vectors = np.linalg.eigh(kzz)
    if values[0] <= 0.0:
        raise SingularityError(
            f"pivot kernel matrix is numerically singular beyond jitter "
            f"(smallest eigenvalue {values[0]:.6e})"
        )
    inv_root = (vectors / np.sqrt(values)) @ vectors.T
    return inv_root @ kernel(pivots, data)


def isometric_project(
    phi_s: np.ndarray, phi_t: np.ndarray
) -> tuple[np.ndarray, np.ndarray, Projection]:
    """Joint exact reduction of source and target columns.

    Stacks X = [phi_s, phi_t], computes Y = (X^T X)^{1/2} and returns Y split
    back into the source part (first N columns), the target part, and the
    projector Zbar = (X^T X)^{-1/2} X^T. Pairwise inner products of the reduced
    columns equal those of the originals.

    Rank-deficient X is tolerated: the square root clamps negative rounding
    residue at zero, while the inverse square root inside Zbar floors
    eigenvalues at 1e-12 so the projector stays finite.
    """
    phi_s = np.asarray(phi_s, dtype=np.float64)
    phi_t = np.asarray(phi_t, dtype=np.float64)
    if phi_s.ndim != 2 or phi_t.ndim != 2:
        raise DimensionError("feature blocks must be 2-d column matrices")
    if phi_s.shape[0] != phi_t.shape[0]:
        raise DimensionError(
            f"stream dimensions differ: {phi_s.shape[0]} vs {phi_t.shape[0]}"
        )
    n_source = phi_s.shape[1]
    x = np.concatenate([phi_s, phi_t], axis=1)
    if x.shape[1] < 1:
        raise DimensionError("need at least one column across the two streams")
    gram = symmetrize(x.T @ x).entries
    values, vectors = np.linalg.eigh(gram)
    root = symmetrize((vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T).entries
    inv_root = (vectors / np.sqrt(np.maximum(values, EIGENVALUE_FLOOR))) @ vectors.T
    projector = inv_root @ x.T
    return root[:, :n_source], root[:, n_source:], Projection(projector=projector)


def backproject_grad(p: Projection, grad_reduced: np.ndarray) -> np.ndarray:
    """Push a reduced-space feature gradient back to ambient space: Zbar^T grad."""
    grad_reduced = np.asarray(grad_reduced, dtype=np.float64)
    if grad_reduced.ndim != 2 or grad_reduced.shape[0] != p.reduced_dim:
        raise DimensionError(
            f"gradient rows {grad_reduced.shape} do not match reduced dimension {p.reduced_dim}"
        )
    return p.projector.T @ grad_reduced
