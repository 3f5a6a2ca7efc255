"""
Density-fluctuation operators, the intermediate correlation function and
windowed transition rates.

The correlation function is evaluated through quantum regression,

    C(q, tau) = Tr[ n(q)^dag  exp(L tau)( n(q) rho0 ) ],

and the rate is ``coupling**2 * Re int_0^T C(q, tau) dtau``. Three routes
compute the rate: Simpson quadrature of ``C``, a closed form valid when H
and X commute, and the full two-time double integral (diagnostic).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence

import numpy as np

from .linalg import (
    DensityMatrix,
    DimensionError,
    as_operator,
    dag,
    hermiticity_residual,
    matrix_exp,
    validate_density_matrix,
)
from .lindblad import (
    HERMITIAN_TOLERANCE,
    NotCommutingError,
    NotHermitianError,
    build_liouvillian,
    check_commuting,
    unvec,
    vec,
)

DEFAULT_STEPS = 512

METHODS = ("quadrature", "analytic", "double-integral")


# ---------------------------------------------------------------------------
# n(q) builders
# ---------------------------------------------------------------------------

def build_nq_phase_lattice(phases, q):
    """Diagonal ``n(q)`` with entries ``exp(-i q x)`` for sites `phases`."""
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or phases.size == 0:
        raise ValueError("phases must be a non-empty 1-d sequence")
    if not (np.all(np.isfinite(phases)) and np.isfinite(q)):
        raise ValueError("phases and q must be finite")
    return np.diag(np.exp(-1j * q * phases))


def position_operator(dim, x_scale=1.0):
    """Truncated ``x_scale * (a + a^dag) / sqrt(2)`` on `dim` levels."""
    off = np.sqrt(np.arange(1, dim)) / np.sqrt(2.0)
    return x_scale * (np.diag(off, 1) + np.diag(off, -1)).astype(complex)


def build_nq_oscillator(d, q, x_scale=1.0, padding=None):
    """``exp(-i q x)`` for an oscillator position operator, truncated to `d`.

    The exponential is taken on ``d + padding`` levels and the top-left
    ``d x d`` block is kept.

    Returns
    -------
    op : ndarray
        The truncated block.
    deviation : float
        ``||op op^dag - I||_F``, zero for an exactly unitary block.
    """
    if d < 2:
        raise ValueError("oscillator model needs d >= 2")
    if padding is None:
        padding = d
    if padding < 0:
        raise ValueError("padding must be >= 0")
    if not (np.isfinite(q) and np.isfinite(x_scale)):
        raise ValueError("q and x_scale must be finite")
    xhat = position_operator(d + padding, x_scale)
    op = matrix_exp(xhat, -1j * q)[:d, :d]
    deviation = float(np.linalg.norm(op @ dag(op) - np.eye(d)))
    return op, deviation


@dataclass(frozen=True)
class PhaseLatticeModel:
    phases: tuple

    def operator(self, q, dim):
        if len(self.phases) != dim:
            raise DimensionError(f"phase lattice has {len(self.phases)} "
                                 f"sites, scenario dim is {dim}")
        return build_nq_phase_lattice(self.phases, q)


@dataclass(frozen=True)
class OscillatorModel:
    x_scale: float = 1.0
    padding: Optional[int] = None

    def operator(self, q, dim):
        return build_nq_oscillator(dim, q, self.x_scale, self.padding)[0]


@dataclass(frozen=True, eq=False)
class ExplicitModel:
    """Verbatim ``n(q)`` matrices.

    `matrix` is used for every q unless `per_q` holds an entry for it.
    """

    matrix: Optional[np.ndarray] = None
    per_q: Dict[float, np.ndarray] = field(default_factory=dict)

    def operator(self, q, dim):
        op = self.per_q.get(float(q), self.matrix)
        if op is None:
            raise KeyError(f"no explicit n(q) matrix for q = {q}")
        if op.shape[0] != dim:
            raise DimensionError(f"explicit n(q) has dim {op.shape[0]}, "
                                 f"scenario dim is {dim}")
        return op


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

def _grid(values, name, positive=False, nonnegative=False):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty list")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} entries must be > 0")
    if nonnegative and np.any(arr < 0):
        raise ValueError(f"{name} entries must be >= 0")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Complete description of a scattering problem.

    Arrays are coerced and checked on construction; a constructed Scenario
    is immutable. Evaluation caches (shared eigenbasis, Liouvillians per K)
    are filled lazily and never change results.
    """

    hamiltonian: np.ndarray
    lindblad_op: np.ndarray
    rho0: DensityMatrix
    nq_model: object
    k: float = 0.0
    coupling: float = 1.0
    q_grid: Sequence[float] = (0.0,)
    tau_sc_grid: Sequence[float] = (1.0,)
    k_grid: Sequence[float] = (0.0,)
    quadrature_steps: int = DEFAULT_STEPS
    force_superoperator: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        h = as_operator(self.hamiltonian, "hamiltonian").copy()
        x = as_operator(self.lindblad_op, "lindblad_op").copy()
        if x.shape != h.shape:
            raise DimensionError(f"lindblad_op has dim {x.shape[0]}, "
                                 f"hamiltonian has dim {h.shape[0]}")
        for name, op in (("hamiltonian", h), ("lindblad_op", x)):
            res = hermiticity_residual(op)
            if res > HERMITIAN_TOLERANCE:
                raise NotHermitianError(name, res)
            op.flags.writeable = False
        rho = self.rho0
        if not isinstance(rho, DensityMatrix):
            rho = validate_density_matrix(rho)
        if rho.dim != h.shape[0]:
            raise DimensionError(f"rho0 has dim {rho.dim}, hamiltonian has "
                                 f"dim {h.shape[0]}")
        if not np.isfinite(self.k) or self.k < 0:
            raise ValueError("k must be finite and >= 0")
        if not np.isfinite(self.coupling) or self.coupling <= 0:
            raise ValueError("coupling must be finite and > 0")
        steps = int(self.quadrature_steps)
        if steps < 4 or steps % 2:
            raise ValueError("quadrature_steps must be even and >= 4")
        set_ = object.__setattr__
        set_(self, "hamiltonian", h)
        set_(self, "lindblad_op", x)
        set_(self, "rho0", rho)
        set_(self, "k", float(self.k))
        set_(self, "coupling", float(self.coupling))
        set_(self, "quadrature_steps", steps)
        set_(self, "q_grid", _grid(self.q_grid, "q_grid"))
        set_(self, "tau_sc_grid",
             _grid(self.tau_sc_grid, "tau_sc_grid", positive=True))
        set_(self, "k_grid", _grid(self.k_grid, "k_grid", nonnegative=True))
        for q in self.q_grid:
            self.nq(q)

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def replace(self, **changes):
        return replace(self, **changes)

    def nq(self, q):
        key = ("nq", float(q))
        if key not in self._cache:
            op = as_operator(self.nq_model.operator(q, self.dim),
                             "n(q)").copy()
            op.flags.writeable = False
            self._cache[key] = op
        return self._cache[key]

    def spectra(self):
        """Shared eigenbasis of H and X; raises NotCommutingError."""
        if "spectra" not in self._cache:
            try:
                self._cache["spectra"] = check_commuting(self.hamiltonian,
                                                         self.lindblad_op)
            except NotCommutingError as exc:
                self._cache["spectra"] = exc
        found = self._cache["spectra"]
        if isinstance(found, NotCommutingError):
            raise found
        return found

    def is_commuting(self):
        try:
            self.spectra()
        except NotCommutingError:
            return False
        return True

    def uses_analytic_evolution(self):
        return not self.force_superoperator and self.is_commuting()

    def liouvillian(self, k):
        key = ("liouvillian", float(k))
        if key not in self._cache:
            self._cache[key] = build_liouvillian(self.hamiltonian,
                                                 self.lindblad_op, k)
        return self._cache[key]


# ---------------------------------------------------------------------------
# correlation function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationSeries:
    q: float
    k: float
    taus: np.ndarray
    values: np.ndarray


def _resolve_k(scenario, k):
    k = scenario.k if k is None else float(k)
    if not np.isfinite(k) or k < 0:
        raise ValueError(f"k must be finite and >= 0, got {k}")
    return k


def _check_taus(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or not np.all(np.isfinite(taus)):
        raise ValueError("taus must be a non-empty finite 1-d array")
    if np.any(taus < 0):
        raise ValueError("correlation times must be >= 0")
    return taus


def _is_uniform(taus):
    if taus.size < 3:
        return False
    steps = np.diff(taus)
    return taus[0] == 0 and np.allclose(steps, steps[0], rtol=1e-12, atol=0)


def _stepped(propagator, v0, nsteps):
    """Columns ``propagator**j @ v0`` for ``j = 0..nsteps``."""
    out = np.empty((v0.shape[0], nsteps + 1), dtype=complex)
    out[:, 0] = v0
    for j in range(nsteps):
        out[:, j + 1] = propagator @ out[:, j]
    return out


def correlation_values(scenario, q, taus, k=None):
    """``C(q, tau)`` at every entry of `taus` (vectorised)."""
    k = _resolve_k(scenario, k)
    taus = _check_taus(taus)
    n = scenario.nq(q)
    rho_n = n @ scenario.rho0.op
    if scenario.uses_analytic_evolution():
        sp = scenario.spectra()
        n_xi = sp.to_eigenbasis(n)
        m_xi = sp.to_eigenbasis(rho_n)
        # Tr[B M(t)] = sum_ab B_ba M_ab(0) f_ab(t)
        weights = (dag(n_xi).T * m_xi).ravel()
        e, xv = sp.energies, sp.xvals
        z = (-1j * (e[:, None] - e[None, :])
             - k * (xv[:, None] - xv[None, :]) ** 2).ravel()
        return np.exp(np.outer(taus, z)) @ weights

    l = scenario.liouvillian(k)
    b_row = vec(dag(n).T)
    v0 = vec(rho_n)
    if _is_uniform(taus):
        prop = l.propagator(taus[1] - taus[0])
        return b_row @ _stepped(prop, v0, taus.size - 1)
    return np.array([b_row @ (l.propagator(t) @ v0) for t in taus])


def correlation(scenario, q, tau, k=None):
    """Intermediate correlation ``C(q, tau)`` via quantum regression."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return complex(correlation_values(scenario, q, [tau], k)[0])


def correlation_series(scenario, q, taus, k=None):
    k = _resolve_k(scenario, k)
    taus = _check_taus(taus)
    if taus[0] != 0 or np.any(np.diff(taus) <= 0):
        raise ValueError("taus must start at 0 and increase strictly")
    return CorrelationSeries(float(q), k, taus,
                             correlation_values(scenario, q, taus, k))


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateResult:
    q: float
    k: float
    tau_sc: float
    windowed_integral: complex
    rate: float
    imag_residual: float
    method: str


def _result(scenario, q, k, tau_sc, integral, method):
    c2 = scenario.coupling ** 2
    integral = complex(integral)
    return RateResult(float(q), float(k), float(tau_sc), integral,
                      c2 * integral.real, c2 * integral.imag, method)


def simpson_weights(steps, h):
    """Composite Simpson weights for `steps` (even) intervals of width `h`."""
    if steps < 2 or steps % 2:
        raise ValueError("Simpson's rule needs an even number of intervals")
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _check_window(tau_sc, steps):
    if not np.isfinite(tau_sc) or tau_sc <= 0:
        raise ValueError("tau_sc must be finite and > 0")
    if steps < 4 or steps % 2:
        raise ValueError(f"steps must be even and >= 4, got {steps}")


def rate_quadrature(scenario, q, tau_sc, k=None, steps=None):
    """Windowed rate by composite Simpson quadrature of ``C(q, tau)``."""
    k = _resolve_k(scenario, k)
    steps = scenario.quadrature_steps if steps is None else int(steps)
    _check_window(tau_sc, steps)
    taus = np.linspace(0.0, tau_sc, steps + 1)
    values = correlation_values(scenario, q, taus, k)
    integral = simpson_weights(steps, tau_sc / steps) @ values
    return _result(scenario, q, k, tau_sc, integral, "quadrature")


def window_factor(z, tau_sc):
    """``int_0^T exp(-z t) dt`` elementwise, exact ``T`` for tiny ``|z|``."""
    z = np.asarray(z, dtype=complex)
    eps = 1e-12 * (1.0 + (np.max(np.abs(z)) if z.size else 0.0))
    small = np.abs(z) <= eps
    safe = np.where(small, 1.0, z)
    return np.where(small, tau_sc, -np.expm1(-safe * tau_sc) / safe)


def term_weight_matrix(scenario, q):
    """Weights ``w[a, b] = <a|n(q)^dag|b> <b|n(q) rho0|a>`` in the shared basis.

    Raises NotCommutingError when H and X share no eigenbasis.
    """
    sp = scenario.spectra()
    n_xi = sp.to_eigenbasis(scenario.nq(q))
    rho_xi = sp.to_eigenbasis(scenario.rho0.op)
    return dag(n_xi) * (n_xi @ rho_xi).T


def rate_analytic(scenario, q, tau_sc, k=None):
    """Closed-form windowed rate for commuting H and X.

    Each term of the double sum over the shared eigenbasis integrates to
    ``w_ab (1 - exp(-z T)) / z`` with
    ``z = i (E_b - E_a) + k (x_b - x_a)**2``.
    """
    k = _resolve_k(scenario, k)
    _check_window(tau_sc, 4)
    w = term_weight_matrix(scenario, q)
    sp = scenario.spectra()
    e, xv = sp.energies, sp.xvals
    z = 1j * (e[None, :] - e[:, None]) + k * (xv[None, :] - xv[:, None]) ** 2
    integral = np.sum(w * window_factor(z, tau_sc))
    return _result(scenario, q, k, tau_sc, integral, "analytic")


def rate_double_integral(scenario, q, tau_sc, k=None, steps=None):
    """``W(T) / T`` from the full two-time integral, without stationarity.

    The kernel ``G(t1, t2) = Tr[n(q, t1) rho n(-q, t2)]`` is built by
    regression from the earlier of the two times, with the state evolved
    forward to that time first. Both triangles of the Simpson grid are
    filled in ``steps`` batched propagator applications.
    """
    k = _resolve_k(scenario, k)
    steps = scenario.quadrature_steps if steps is None else int(steps)
    _check_window(tau_sc, steps)
    d = scenario.dim
    a = scenario.nq(q)
    b = dag(a)
    h = tau_sc / steps
    prop = scenario.liouvillian(k).propagator(h)

    rhos = _stepped(prop, vec(scenario.rho0.op), steps)
    starts_upper = np.empty_like(rhos)
    starts_lower = np.empty_like(rhos)
    for i in range(steps + 1):
        r = unvec(rhos[:, i], d)
        starts_upper[:, i] = vec(a @ r)
        starts_lower[:, i] = vec(r @ b)
    b_row = vec(b.T)
    a_row = vec(a.T)

    g = np.empty((steps + 1, steps + 1), dtype=complex)
    cur_u, cur_l = starts_upper, starts_lower
    for lag in range(steps + 1):
        idx = np.arange(steps + 1 - lag)
        # t2 = t1 + lag*h and t1 = t2 + lag*h
        g[idx, idx + lag] = b_row @ cur_u[:, idx]
        if lag:
            g[idx + lag, idx] = a_row @ cur_l[:, idx]
        if lag < steps:
            cur_u = prop @ cur_u[:, :steps - lag]
            cur_l = prop @ cur_l[:, :steps - lag]

    w = simpson_weights(steps, h)
    integral = (w @ g @ w) / tau_sc
    return _result(scenario, q, k, tau_sc, integral, "double-integral")


def compute_rate(scenario, q, tau_sc, k=None, method=None, steps=None):
    """Dispatch to one of the rate routes.

    With ``method=None`` the closed form is used when H and X commute (and
    the superoperator path is not forced), quadrature otherwise.
    """
    if method is None:
        method = "analytic" if scenario.uses_analytic_evolution() \
            else "quadrature"
    if method == "analytic":
        return rate_analytic(scenario, q, tau_sc, k)
    if method == "quadrature":
        return rate_quadrature(scenario, q, tau_sc, k, steps)
    if method == "double-integral":
        return rate_double_integral(scenario, q, tau_sc, k, steps)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# decoherence-free (Heisenberg picture) reference
# ---------------------------------------------------------------------------

def heisenberg_nq(h, nq, t):
    """Interaction-picture operator ``exp(iHt) nq exp(-iHt)``."""
    h = as_operator(h, "hamiltonian")
    nq = as_operator(nq, "nq")
    res = hermiticity_residual(h)
    if res > HERMITIAN_TOLERANCE:
        raise NotHermitianError("hamiltonian", res)
    u = matrix_exp(h, -1j * t)
    return dag(u) @ nq @ u


def conventional_correlation(h, nq, rho0, taus):
    """``Tr[rho0 n(-q, tau) n(q)]`` under unitary evolution only.

    Uses the eigendecomposition of H rather than the Lindblad engine, so it
    serves as an independent K = 0 reference.
    """
    h = as_operator(h, "hamiltonian")
    e, v = np.linalg.eigh(0.5 * (h + dag(h)))
    n_e = dag(v) @ as_operator(nq, "nq") @ v
    rho_e = dag(v) @ as_operator(rho0, "rho0") @ v
    b = dag(n_e)
    a_rho = n_e @ rho_e
    # Tr[b(t) a rho] = sum_ij b_ij (a rho)_ji exp(i (E_i - E_j) t)
    weights = (b * a_rho.T).ravel()
    freqs = (e[:, None] - e[None, :]).ravel()
    return np.exp(1j * np.outer(np.asarray(taus, dtype=float), freqs)) @ weights


def conventional_rate(scenario, q, tau_sc, steps=4096):
    """Decoherence-free rate from Heisenberg-picture quadrature."""
    _check_window(tau_sc, steps)
    taus = np.linspace(0.0, tau_sc, steps + 1)
    values = conventional_correlation(scenario.hamiltonian, scenario.nq(q),
                                      scenario.rho0.op, taus)
    integral = simpson_weights(steps, tau_sc / steps) @ values
    return _result(scenario, q, 0.0, tau_sc, integral, "quadrature")
