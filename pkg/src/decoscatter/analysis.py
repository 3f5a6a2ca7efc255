"""
Decoherence-induced rate reduction over parameter grids.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional, Tuple

import numpy as np
from scipy.stats import unitary_group

from .linalg import validate_density_matrix
from .scattering import (
    ExplicitModel,
    Scenario,
    compute_rate,
    conventional_rate,
    term_weight_matrix,
)

logger = logging.getLogger(__name__)

UNDEFINED_BASELINE = 1e-14


@dataclass(frozen=True)
class ReductionRow:
    q: float
    tau_sc: float
    k: float
    rate: Optional[float]
    ratio: Optional[float]
    method: str
    imag_residual: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class ReductionTable:
    """Rates over a (q, K, tau_sc) grid.

    `rows` is ordered by grid index (q outermost, then K, then tau_sc).
    `baseline_rate` maps ``(q, tau_sc)`` to the K = 0 rate. A ratio of None
    marks a vanishing baseline or a failed point.
    """

    rows: Tuple[ReductionRow, ...]
    baseline_rate: dict

    def groups(self):
        """Rows grouped by ``(q, tau_sc)``, each sorted by K."""
        out = {}
        for row in self.rows:
            out.setdefault((row.q, row.tau_sc), []).append(row)
        return {key: sorted(rows, key=lambda r: r.k)
                for key, rows in out.items()}


def _ratio(rate, baseline):
    if rate is None or baseline is None or abs(baseline) <= UNDEFINED_BASELINE:
        return None
    if rate == baseline:
        return 1.0
    return rate / baseline


def rate_grid(scenario, k_grid, method=None, steps=None, n_jobs=1):
    """Evaluate rates at every ``(q, k, tau_sc)``; returns a ReductionTable.

    Every K-row is compared with the K = 0 rate of its ``(q, tau_sc)``
    group, computed with the same method. Points that raise are recorded
    with their error message instead of aborting the grid.
    """
    ks = tuple(float(k) for k in k_grid)
    points = list(product(scenario.q_grid, ks, scenario.tau_sc_grid))
    baseline_points = list(product(scenario.q_grid, scenario.tau_sc_grid))

    def evaluate(point):
        q, k, tau = point
        try:
            return compute_rate(scenario, q, tau, k, method, steps)
        except (ValueError, KeyError, np.linalg.LinAlgError) as exc:
            logger.warning("rate failed at q=%g k=%g tau_sc=%g: %s",
                           q, k, tau, exc)
            return exc

    # baselines come from the grid itself when it already holds K = 0
    extra = [] if 0.0 in ks else [(q, 0.0, tau) for q, tau in baseline_points]
    all_points = points + extra
    if n_jobs == 1:
        results = [evaluate(p) for p in all_points]
    else:
        # map() preserves input order, so output is independent of scheduling
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(evaluate, all_points))

    by_point = dict(zip(all_points, results))
    baseline = {}
    for q, tau in baseline_points:
        res = by_point[(q, 0.0, tau)]
        baseline[(q, tau)] = None if isinstance(res, Exception) else res.rate

    rows = []
    for (q, k, tau), res in zip(points, results[:len(points)]):
        if isinstance(res, Exception):
            rows.append(ReductionRow(q, tau, k, None, None,
                                     method or "auto", None, str(res)))
            continue
        ratio = _ratio(res.rate, baseline[(q, tau)])
        rows.append(ReductionRow(q, tau, k, res.rate, ratio, res.method,
                                 res.imag_residual))
    return ReductionTable(tuple(rows), baseline)


def scan_k_grid(scenario):
    """The scenario's K grid with 0 prepended when missing."""
    ks = list(scenario.k_grid)
    if 0.0 not in ks:
        ks.insert(0, 0.0)
    return tuple(ks)


def reduction_scan(scenario, method=None, steps=None, n_jobs=1):
    """Rates and reduction ratios ``rate(K) / rate(0)`` over the grids."""
    return rate_grid(scenario, scan_k_grid(scenario), method, steps, n_jobs)


@dataclass(frozen=True)
class MonotoneViolation:
    q: float
    tau_sc: float
    k_low: float
    k_high: float
    rate_low: float
    rate_high: float


@dataclass(frozen=True)
class MonotoneReport:
    violations: Tuple[MonotoneViolation, ...]
    tolerance: float

    @property
    def ok(self):
        return not self.violations


def check_monotone(table, tolerance=1e-9):
    """Flag every adjacent K pair where the rate grows by more than `tolerance`."""
    violations = []
    for (q, tau), rows in table.groups().items():
        rows = [r for r in rows if r.rate is not None]
        for lo, hi in zip(rows, rows[1:]):
            if hi.rate > lo.rate + tolerance:
                violations.append(MonotoneViolation(q, tau, lo.k, hi.k,
                                                    lo.rate, hi.rate))
    return MonotoneReport(tuple(violations), tolerance)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Term weights of the closed-form rate, in the shared eigenbasis.

    ``entries[a, b] = <a|n(q)^dag|b> <b|n(q) rho0|a>``.
    """

    q: float
    entries: np.ndarray

    @property
    def min_real(self):
        return float(np.min(self.entries.real))

    @property
    def max_abs_imag(self):
        return float(np.max(np.abs(self.entries.imag)))

    @property
    def nonnegative(self):
        return self.min_real >= -1e-12


def term_weights(scenario, q):
    """Weights of every term in the double sum; NotCommutingError if undefined."""
    return WeightMatrix(float(q), term_weight_matrix(scenario, q))


@dataclass(frozen=True)
class KLimitReport:
    ks: Tuple[float, ...]
    differences: Tuple[float, ...]
    rate_zero: float
    conventional_rate: float
    monotone: bool
    below_tolerance: bool
    order: Optional[float]

    @property
    def conventional_gap(self):
        return abs(self.rate_zero - self.conventional_rate)


def k_limit_check(scenario, q, tau_sc, k_small_grid, method=None,
                  rel_tolerance=1e-8):
    """How ``|rate(K) - rate(0)|`` vanishes as K decreases to zero.

    `order` is the least-squares slope of ``log diff`` against ``log K``
    (1 for a linear approach), or None when fewer than two differences
    are positive.
    """
    ks = tuple(float(k) for k in k_small_grid)
    if not ks or any(k <= 0 for k in ks) or \
            any(b >= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k_small_grid must be positive and strictly "
                         "decreasing")
    rate0 = compute_rate(scenario, q, tau_sc, 0.0, method).rate
    diffs = tuple(abs(compute_rate(scenario, q, tau_sc, k, method).rate
                      - rate0) for k in ks)
    monotone = all(b <= a for a, b in zip(diffs, diffs[1:]))
    below = diffs[-1] <= rel_tolerance * abs(rate0)
    pos = [(k, dv) for k, dv in zip(ks, diffs) if dv > 0]
    order = None
    if len(pos) >= 2:
        lk, ld = np.log([p[0] for p in pos]), np.log([p[1] for p in pos])
        order = float(np.polyfit(lk, ld, 1)[0])
    conv = conventional_rate(scenario, q, tau_sc).rate
    return KLimitReport(ks, diffs, rate0, conv, monotone, below, order)


# ---------------------------------------------------------------------------
# random scenarios
# ---------------------------------------------------------------------------

def offdiagonal_mass(u):
    """Fraction of ``||u||_F^2`` held off the diagonal."""
    total = float(np.sum(np.abs(u) ** 2))
    return 1.0 - float(np.sum(np.abs(np.diag(u)) ** 2)) / total


def random_unitary(rng, d, min_offdiag_mass=0.1):
    while True:
        u = unitary_group.rvs(d, random_state=rng)
        if offdiagonal_mass(u) >= min_offdiag_mass:
            return u


def random_commuting_scenario(rng, dim=None, diagonal_rho=True,
                              spectral_range=2.0, rotate=False, **kwargs):
    """Random scenario with commuting H and X.

    Energies and X eigenvalues are uniform on ``[-spectral_range,
    spectral_range]``, dimension uniform on 2..8, n(q) a random unitary
    with off-diagonal mass >= 0.1. A diagonal rho0 is a uniform draw from
    the simplex; otherwise a random full-rank state is used. With
    `rotate`, everything is expressed in a random basis instead of the
    shared eigenbasis.

    Extra keyword arguments are passed on to :class:`Scenario`.
    """
    d = int(rng.integers(2, 9)) if dim is None else dim
    e = rng.uniform(-spectral_range, spectral_range, d)
    xv = rng.uniform(-spectral_range, spectral_range, d)
    nq = random_unitary(rng, d)
    if diagonal_rho:
        rho = np.diag(rng.dirichlet(np.ones(d))).astype(complex)
    else:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = g @ g.conj().T
        rho /= np.trace(rho)
    h, x = np.diag(e).astype(complex), np.diag(xv).astype(complex)
    if rotate:
        v = unitary_group.rvs(d, random_state=rng)
        h, x, nq, rho = (v @ m @ v.conj().T for m in (h, x, nq, rho))
        rho = 0.5 * (rho + rho.conj().T)
    return Scenario(h, x, validate_density_matrix(rho),
                    ExplicitModel(matrix=nq), **kwargs)


def random_hermitian(rng, d, scale=1.0):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (g + g.conj().T)


def random_density_matrix(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def max_frequency(scenario):
    """Largest ``|E_a - E_b|`` of the scenario's Hamiltonian."""
    e = np.linalg.eigvalsh(scenario.hamiltonian)
    return float(e[-1] - e[0])


def short_window(scenario, fraction=1.0):
    """Largest window for which every phase factor keeps a non-negative cosine.

    For ``tau_sc <= pi / (2 * max |E_a - E_b|)`` each term of the closed-form
    rate is a non-increasing function of K when its weight is non-negative.
    """
    w = max_frequency(scenario)
    return fraction * (math.pi / (2.0 * w) if w > 0 else math.inf)
