"""Distributed stochastic gradient tracking over directed graphs:
simulation engine, spectral machinery, and convergence-theory checks."""

from .engine import (
    ALGORITHMS,
    MonteCarloTrace,
    NetworkState,
    RunConfig,
    TraceRecord,
    monte_carlo_t,
    run,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    GateError,
    InvariantViolationError,
    SabsimError,
)
from .graph import (
    DirectedGraph,
    complete_digraph,
    cycle_digraph,
    is_strongly_connected,
    random_nearest_neighbor_digraph,
)
from .oracles import (
    GradientSample,
    LogisticOracle,
    QuadraticOracle,
    logistic_oracle,
    logistic_oracle_from_csv,
    quadratic_oracle,
    random_quadratic,
)
from .spectral import (
    SpectralProfile,
    contraction_factor_a,
    contraction_factor_b,
    matrix_norm_c,
    matrix_norm_r,
    perron_left,
    perron_right,
    spectral_profile,
    weighted_norm_c,
    weighted_norm_r,
)
from .theory import (
    SystemConstants,
    TheoryBundle,
    alpha_max,
    build_system,
    positive_witness,
    spectral_radius_3x3,
    steady_state_bound,
    system_constants,
    theory_bundle,
)
from .weights import WeightPair, uniform_weights, validate

__version__ = "0.1.0"
