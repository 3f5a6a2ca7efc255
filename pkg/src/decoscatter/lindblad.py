"""
Dephasing Lindblad generator ``L rho = -i[H, rho] - K [X, [X, rho]]``.

Two evolution routes are provided. The superoperator route exponentiates
the ``d^2 x d^2`` generator and works for any Hermitian ``H`` and ``X``.
The commuting route applies the closed-form factor

    exp(-i (E_a - E_b) t) * exp(-K (x_a - x_b)**2 t)

entrywise, valid in a basis where ``H`` and ``X`` are both diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .linalg import (
    DimensionError,
    as_operator,
    commutator,
    dag,
    hermiticity_residual,
    matrix_exp,
)

HERMITIAN_TOLERANCE = 1e-9


class NotHermitianError(ValueError):
    def __init__(self, name, residual):
        self.name = name
        self.residual = residual
        super().__init__(f"{name} is not hermitian (residual {residual:.3e})")


class NotCommutingError(ValueError):
    """H and X have no common eigenbasis within tolerance.

    This is an expected outcome for generic scenarios; callers fall back to
    the superoperator route.
    """

    def __init__(self, norm, tolerance):
        self.norm = norm
        self.tolerance = tolerance
        super().__init__(f"H and X do not commute: ||[H, X]|| = {norm:.3e} "
                         f"> {tolerance:.1e}")


# column stacking: vec(A M B) = kron(B.T, A) vec(M)
def vec(m):
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, dim):
    return np.asarray(v).reshape((dim, dim), order="F")


def _transpose_permutation(dim):
    """Permutation matrix P with ``vec(M.T) = P @ vec(M)``."""
    idx = np.arange(dim * dim).reshape((dim, dim), order="F")
    perm = idx.T.reshape(-1, order="F")
    return np.eye(dim * dim)[perm]


def _require_hermitian(a, name):
    res = hermiticity_residual(a)
    if res > HERMITIAN_TOLERANCE:
        raise NotHermitianError(name, res)


def _check_time(t):
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"evolution time must be finite and >= 0, got {t}")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Superoperator of the dephasing master equation.

    Attributes
    ----------
    dim : int
        Hilbert-space dimension ``d``.
    matrix : ndarray
        ``d^2 x d^2`` generator acting on column-stacked operators.
    k : float
        Decoherence strength.
    """

    dim: int
    matrix: np.ndarray
    k: float

    def apply(self, m):
        m = as_operator(m, "m")
        if m.shape[0] != self.dim:
            raise DimensionError(f"dimension mismatch: {m.shape[0]} vs "
                                 f"{self.dim}")
        return unvec(self.matrix @ vec(m), self.dim)

    def adjoint_matrix(self):
        """Generator of the Heisenberg evolution under the trace pairing.

        Defined by ``Tr((L A) B) = Tr(A (L^dag B))``; note the pairing is
        bilinear, not the Hilbert-Schmidt inner product.
        """
        p = _transpose_permutation(self.dim)
        return p @ self.matrix.T @ p

    def propagator(self, t):
        """``exp(L t)`` as a ``d^2 x d^2`` matrix."""
        _check_time(t)
        return matrix_exp(self.matrix, t)


def build_liouvillian(h, x, k):
    """Build the generator ``M -> -i[h, M] - k [x, [x, M]]``.

    Raises
    ------
    NotHermitianError
        If `h` or `x` is not Hermitian within 1e-9.
    ValueError
        If `k` is negative or the dimensions differ.
    """
    h = as_operator(h, "hamiltonian")
    x = as_operator(x, "lindblad_op")
    if h.shape != x.shape:
        raise DimensionError(f"dimension mismatch: {h.shape[0]} vs "
                             f"{x.shape[0]}")
    _require_hermitian(h, "hamiltonian")
    _require_hermitian(x, "lindblad_op")
    if not np.isfinite(k) or k < 0:
        raise ValueError(f"k must be finite and >= 0, got {k}")
    d = h.shape[0]
    eye = np.eye(d)
    x2 = x @ x
    unitary = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    dephasing = np.kron(eye, x2) - 2.0 * np.kron(x.T, x) + np.kron(x2.T, eye)
    matrix = unitary - k * dephasing
    matrix.flags.writeable = False
    return Liouvillian(d, matrix, float(k))


def _prepare(l, m0, t):
    m0 = as_operator(m0, "m0")
    if m0.shape[0] != l.dim:
        raise DimensionError(f"dimension mismatch: {m0.shape[0]} vs "
                             f"{l.dim}")
    _check_time(t)
    return m0


def evolve(l, m0, t):
    """Return ``exp(L t) m0``."""
    m0 = _prepare(l, m0, t)
    if t == 0:
        return m0.copy()
    return unvec(l.propagator(t) @ vec(m0), l.dim)


def adjoint_evolve(l, a0, t):
    """Return ``exp(L^dag t) a0`` (Heisenberg-picture evolution)."""
    a0 = _prepare(l, a0, t)
    if t == 0:
        return a0.copy()
    return unvec(la.expm(l.adjoint_matrix() * t) @ vec(a0), l.dim)


@dataclass(frozen=True, eq=False)
class CommutingSpectra:
    """Paired eigenvalues of H and X in a shared eigenbasis.

    ``transform`` holds the eigenvectors as columns, so an operator ``M``
    in the original basis reads ``transform^dag M transform`` in the shared
    one.
    """

    energies: np.ndarray
    xvals: np.ndarray
    transform: np.ndarray
    commutator_norm: float = 0.0

    def __post_init__(self):
        if self.energies.shape != self.xvals.shape or self.energies.ndim != 1:
            raise ValueError("energies and xvals must be 1-d of equal length")
        if not (np.all(np.isfinite(self.energies))
                and np.all(np.isfinite(self.xvals))):
            raise ValueError("spectra must be finite")

    @property
    def dim(self):
        return self.energies.shape[0]

    def to_eigenbasis(self, m):
        return dag(self.transform) @ m @ self.transform

    def from_eigenbasis(self, m):
        return self.transform @ m @ dag(self.transform)

    @classmethod
    def from_diagonals(cls, energies, xvals):
        energies = np.asarray(energies, dtype=float)
        xvals = np.asarray(xvals, dtype=float)
        return cls(energies, xvals, np.eye(energies.shape[0], dtype=complex))


def _offdiag_max(a):
    return float(np.max(np.abs(a - np.diag(np.diag(a)))))


def check_commuting(h, x, tolerance=None):
    """Find a common eigenbasis of Hermitian `h` and `x`.

    Parameters
    ----------
    tolerance : float, optional
        Largest accepted Frobenius norm of ``[h, x]``. Defaults to
        ``1e-10 * d``.

    Returns
    -------
    CommutingSpectra

    Raises
    ------
    NotCommutingError
        If ``||[h, x]||`` exceeds `tolerance`.
    """
    h = as_operator(h, "hamiltonian")
    x = as_operator(x, "lindblad_op")
    _require_hermitian(h, "hamiltonian")
    _require_hermitian(x, "lindblad_op")
    d = h.shape[0]
    if tolerance is None:
        tolerance = 1e-10 * d
    norm = float(np.linalg.norm(commutator(h, x)))
    if norm > tolerance:
        raise NotCommutingError(norm, tolerance)

    if _offdiag_max(h) <= tolerance and _offdiag_max(x) <= tolerance:
        return CommutingSpectra(np.diag(h).real.copy(), np.diag(x).real.copy(),
                                np.eye(d, dtype=complex), norm)

    # diagonalise x, then h inside each degenerate block of x
    xv, xvecs = np.linalg.eigh(0.5 * (x + dag(x)))
    gap = 1e-8 * (1.0 + np.max(np.abs(xv)))
    splits = np.nonzero(np.diff(xv) > gap)[0] + 1
    columns = []
    for block in np.split(np.arange(d), splits):
        v = xvecs[:, block]
        hb = dag(v) @ h @ v
        _, w = np.linalg.eigh(0.5 * (hb + dag(hb)))
        columns.append(v @ w)
    transform = np.hstack(columns)
    energies = np.real(np.diag(dag(transform) @ h @ transform))
    xvals = np.real(np.diag(dag(transform) @ x @ transform))
    return CommutingSpectra(energies, xvals, transform, norm)


def commuting_factors(spectra, k, t):
    """Entrywise propagation factors in the shared eigenbasis.

    Entry ``(a, b)`` is ``exp(-i (E_a - E_b) t - k (x_a - x_b)**2 t)``.
    """
    e = spectra.energies
    xv = spectra.xvals
    de = e[:, None] - e[None, :]
    dx = xv[:, None] - xv[None, :]
    return np.exp((-1j * de - k * dx**2) * t)


def evolve_commuting(spectra, k, m0, t):
    """Closed-form evolution of `m0`, given in the shared eigenbasis."""
    m0 = as_operator(m0, "m0")
    if m0.shape[0] != spectra.dim:
        raise DimensionError(f"dimension mismatch: {m0.shape[0]} vs "
                             f"{spectra.dim}")
    _check_time(t)
    if not np.isfinite(k) or k < 0:
        raise ValueError(f"k must be finite and >= 0, got {k}")
    if t == 0:
        return m0.copy()
    return commuting_factors(spectra, k, t) * m0
