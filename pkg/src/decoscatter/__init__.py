"""Scattering transition rates of open quantum systems under dephasing."""

from .analysis import (
    KLimitReport,
    MonotoneReport,
    ReductionTable,
    WeightMatrix,
    check_monotone,
    k_limit_check,
    random_commuting_scenario,
    reduction_scan,
    term_weights,
)
from .linalg import (
    DensityMatrix,
    DensityMatrixError,
    DimensionError,
    commutator,
    frobenius_distance,
    matrix_exp,
    validate_density_matrix,
)
from .lindblad import (
    CommutingSpectra,
    Liouvillian,
    NotCommutingError,
    NotHermitianError,
    adjoint_evolve,
    build_liouvillian,
    check_commuting,
    evolve,
    evolve_commuting,
)
from .scattering import (
    CorrelationSeries,
    ExplicitModel,
    OscillatorModel,
    PhaseLatticeModel,
    RateResult,
    Scenario,
    build_nq_oscillator,
    build_nq_phase_lattice,
    compute_rate,
    correlation,
    correlation_series,
    heisenberg_nq,
    rate_analytic,
    rate_double_integral,
    rate_quadrature,
)
from .scenario_io import ScenarioError, emit_csv, load_scenario, parse_scenario

__version__ = "0.1.0"
