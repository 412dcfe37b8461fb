"""Convergence diagnostics for the fixed-point ensemble iteration."""

from .bounds import (
    GammaCheck,
    ImplicitBoundContext,
    checked_gamma,
    correction_norm_bound,
    eta,
    find_lambda_bound,
    gamma_eig,
    gamma_pencil,
    h_implicit,
    lambda_bound_prime,
    lambda_max,
)
from .metrics import (
    ConvergenceWarning,
    delta_norm,
    delta_norm_vectors,
    delta_outer,
    distance_l1,
    distance_l2,
    power_iteration,
    spd_inverse_norm,
    spectral_norm,
)
from .trace import (
    ClassDiagnostics,
    ConvergenceTrace,
    DiagnosticsReport,
    IterationRecord,
    build_trace,
    class_diagnostics,
    diagnostics_report,
    empirical_contraction,
    iteration_diagnostics,
    summarize_detail,
)
from .woodbury import (
    RankTwoDelta,
    map_via_woodbury,
    spd_solver,
    system_matrix,
    updated_inverse,
    woodbury_delta,
)
