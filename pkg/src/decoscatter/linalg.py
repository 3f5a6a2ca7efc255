"""
Dense complex operator algebra on the preferred basis.

Operators are plain ``numpy`` arrays of shape ``(d, d)`` and dtype
``complex128``; :func:`as_operator` is the single entry point that coerces
and checks them. Only density matrices get their own type, because they
carry a validation tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

DEFAULT_TOLERANCE = 1e-9


class DimensionError(ValueError):
    """Raised when operators of different dimension are combined."""


class DensityMatrixError(ValueError):
    """Raised when a matrix fails density-matrix validation.

    All three residuals are carried regardless of which check failed, so a
    caller can report the full picture.
    """

    def __init__(self, hermiticity_residual, trace_residual, min_eigenvalue,
                 tolerance, violations):
        self.hermiticity_residual = hermiticity_residual
        self.trace_residual = trace_residual
        self.min_eigenvalue = min_eigenvalue
        self.tolerance = tolerance
        self.violations = tuple(violations)
        super().__init__(
            "invalid density matrix ({}): hermiticity residual {:.3e}, "
            "trace residual {:.3e}, smallest eigenvalue {:.3e}, "
            "tolerance {:.1e}".format(", ".join(self.violations),
                                      hermiticity_residual, trace_residual,
                                      min_eigenvalue, tolerance))


def as_operator(a, name="operator"):
    """Return `a` as a finite square complex128 array.

    Parameters
    ----------
    a : array_like
        Candidate matrix.
    name : str
        Used in error messages.

    Raises
    ------
    ValueError
        If `a` is not a non-empty square matrix or has non-finite entries.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, "
                         f"got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs "
                             f"{b.shape[0]}")


def dag(a):
    """Conjugate transpose."""
    return np.conj(np.transpose(a))


def commutator(a, b):
    """Return ``a @ b - b @ a``."""
    a = as_operator(a, "a")
    b = as_operator(b, "b")
    _check_same_dim(a, b)
    return a @ b - b @ a


def hermiticity_residual(a):
    """Largest entrywise deviation ``max |a_ij - conj(a_ji)|``."""
    a = np.asarray(a)
    return float(np.max(np.abs(a - dag(a))))


def is_hermitian(a, tolerance=DEFAULT_TOLERANCE):
    return hermiticity_residual(a) <= tolerance


def matrix_exp(a, scale=1.0):
    """Matrix exponential ``exp(scale * a)``.

    Uses scaling and squaring with a Pade approximant (``scipy.linalg.expm``).
    A zero `scale` returns the identity exactly, without touching `a`'s
    norm.
    """
    a = as_operator(a, "a")
    if not np.isfinite(scale):
        raise ValueError("scale must be finite")
    if scale == 0:
        return np.eye(a.shape[0], dtype=np.complex128)
    return la.expm(scale * a)


def frobenius_distance(a, b):
    """Frobenius norm of ``a - b``."""
    a = as_operator(a, "a")
    b = as_operator(b, "b")
    _check_same_dim(a, b)
    return float(np.linalg.norm(a - b))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix.

    Construct through :func:`validate_density_matrix`; the stored array is
    read-only.
    """

    op: np.ndarray
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def dim(self):
        return self.op.shape[0]


def density_residuals(op):
    """Return ``(hermiticity residual, trace residual, min eigenvalue)``.

    The eigenvalues are taken of the Hermitian part ``(op + op^dag) / 2``.
    """
    op = as_operator(op, "rho")
    herm = hermiticity_residual(op)
    trace_res = float(abs(np.trace(op) - 1.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (op + dag(op)))[0])
    return herm, trace_res, min_eig


def validate_density_matrix(op, tolerance=DEFAULT_TOLERANCE):
    """Check Hermiticity, unit trace and positivity of `op`.

    Returns
    -------
    DensityMatrix

    Raises
    ------
    DensityMatrixError
        Carrying all three residuals if any check fails.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    op = as_operator(op, "rho")
    herm, trace_res, min_eig = density_residuals(op)
    violations = []
    if herm > tolerance:
        violations.append("not hermitian")
    if trace_res > tolerance:
        violations.append("trace != 1")
    if min_eig < -tolerance:
        violations.append("negative eigenvalue")
    if violations:
        raise DensityMatrixError(herm, trace_res, min_eig, tolerance,
                                 violations)
    op = op.copy()
    op.flags.writeable = False
    return DensityMatrix(op, float(tolerance))
