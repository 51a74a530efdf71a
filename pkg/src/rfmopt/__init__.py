"""Budgeted Perron-root minimization for flow chains.

Construct the symmetric tridiagonal matrix of a positive rate vector,
compute certified Perron pairs, derive flow-chain steady states, solve
the rate-budget optimization by two independent routes, and verify the
bound suite on the results.
"""

from .errors import NumericalError
from .optimizer import (
    OptimalSolution,
    RecursionProfile,
    apply_F,
    baseline_ones,
    baseline_tilde,
    recursion_profile,
    shoot_residual,
    solve_equalization,
    solve_recursion,
)
from .rfm import (
    SensitivityVector,
    SteadyState,
    Trajectory,
    mu_values,
    sensitivities,
    simulate,
    steady_state_shooting,
    steady_state_spectral,
)
from .spectral import (
    PerronPair,
    RateVector,
    TridiagSymMatrix,
    build_matrix,
    perron,
    toeplitz_oracle,
)
from .verifier import (
    BoundsReport,
    Check,
    check_structure,
    check_theorem1,
    full_report,
    max_gap_metric,
    turnpike_width,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "Check",
    "NumericalError",
    "OptimalSolution",
    "PerronPair",
    "RateVector",
    "RecursionProfile",
    "SensitivityVector",
    "SteadyState",
    "Trajectory",
    "TridiagSymMatrix",
    "apply_F",
    "baseline_ones",
    "baseline_tilde",
    "build_matrix",
    "check_structure",
    "check_theorem1",
    "full_report",
    "max_gap_metric",
    "mu_values",
    "perron",
    "recursion_profile",
    "sensitivities",
    "shoot_residual",
    "simulate",
    "solve_equalization",
    "solve_recursion",
    "steady_state_shooting",
    "steady_state_spectral",
    "toeplitz_oracle",
    "turnpike_width",
]
