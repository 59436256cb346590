"""Squared distances between SPD matrices and their analytic gradients.

Three kinds are supported:

* Frobenius:  ||A - B||_F^2
* JBLD:       logdet((A + B) / 2) - logdet(A B) / 2
* AIRM:       ||log(A^{-1/2} B A^{-1/2})||_F^2

The AIRM value is evaluated through Cholesky factors and a singular value
decomposition of L_A^{-1} L_B rather than by forming the congruence sandwich:
the sandwich loses all relative accuracy on its small eigenvalues once the
operand spectra span many orders of magnitude (as they do for epsilon-padded
scatter matrices), while the triangular-solve route perturbs singular values
only multiplicatively.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, SingularityError
from .spd import SymMatrix, logdet, spd_fn, symmetrize


class DistanceKind(enum.Enum):
    FROBENIUS = "frobenius"
    JBLD = "jbld"
    AIRM = "airm"

    @classmethod
    def parse(cls, name: str) -> "DistanceKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown distance kind {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


def _check_pair(a: SymMatrix, b: SymMatrix):
    if a.side != b.side:
        raise DimensionError(f"side mismatch: {a.side} vs {b.side}")


def _cholesky(s: SymMatrix) -> np.ndarray:
    try:
        return np.linalg.cholesky(s.entries)
    except np.linalg.LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(s.entries)[0])
        raise SingularityError(
            f"matrix must be strictly positive definite; smallest eigenvalue is {smallest:.6e}"
        ) from exc


def dist_sq(kind: DistanceKind, a: SymMatrix, b: SymMatrix) -> float:
    """Squared distance d^2(a, b) for the given kind. Nonnegative."""
    _check_pair(a, b)
    if kind is DistanceKind.FROBENIUS:
        diff = a.entries - b.entries
        return float(np.sum(diff * diff))
    if kind is DistanceKind.JBLD:
        mid = symmetrize((a.entries + b.entries) / 2.0)
        value = logdet(mid) - 0.5 * logdet(a) - 0.5 * logdet(b)
        # Mathematically >= 0 for SPD operands; clamp rounding residue at zero.
        return max(value, 0.0)
    if kind is DistanceKind.AIRM:
        la = _cholesky(a)
        lb = _cholesky(b)
        w = solve_triangular(la, lb, lower=True, check_finite=False)
        sigma = np.linalg.svd(w, compute_uv=False)
        if sigma[-1] <= 0.0:
            raise SingularityError("AIRM operand pair is numerically singular")
        # eigenvalues of A^{-1/2} B A^{-1/2} are sigma^2, so ||log(.)||_F^2
        # is sum of (2 log sigma)^2.
        logs = np.log(sigma)
        return float(4.0 * np.sum(logs * logs))
    raise ValueError(f"unhandled distance kind {kind!r}")


def grad_dist_sq(kind: DistanceKind, a: SymMatrix, b: SymMatrix) -> tuple[SymMatrix, SymMatrix]:
    """Gradients (d d^2 / d a, d d^2 / d b), each an exactly symmetric matrix.

    Frobenius: 2(a - b) and -2(a - b).
    JBLD:      (a + b)^{-1} - a^{-1}/2, and the same with b in the second slot.
    AIRM:      -2 a^{-1/2} log(a^{-1/2} b a^{-1/2}) a^{-1/2}, and its argument
               swap (the distance is symmetric in a and b).
    """
    _check_pair(a, b)
    if kind is DistanceKind.FROBENIUS:
        diff = a.entries - b.entries
        return symmetrize(2.0 * diff), symmetrize(-2.0 * diff)
    if kind is DistanceKind.JBLD:
        sum_inv = spd_fn(symmetrize(a.entries + b.entries), "inv").entries
        ga = sum_inv - 0.5 * spd_fn(a, "inv").entries
        gb = sum_inv - 0.5 * spd_fn(b, "inv").entries
        return symmetrize(ga), symmetrize(gb)
    if kind is DistanceKind.AIRM:
        return _airm_grad_one_side(a, b), _airm_grad_one_side(b, a)
    raise ValueError(f"unhandled distance kind {kind!r}")


def _airm_grad_one_side(x: SymMatrix, y: SymMatrix) -> SymMatrix:
    xi = spd_fn(x, "invsqrt").entries
    inner = spd_fn(symmetrize(xi @ y.entries @ xi), "log").entries
    return symmetrize(-2.0 * xi @ inner @ xi)
