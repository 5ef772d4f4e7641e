"""Monte Carlo Euler method for scalar SDEs with superlinear drift.

The plain Euler scheme diverges in the weak sense for drifts like
-x**3, yet averaging a payoff of the terminal Euler value over N**2
independent replicates still converges for a large class of such
equations, at order 1/3 (up to epsilon) in the total effort N**3.
This package implements that estimator, the pathwise dominating
process whose event the restricted variants condition on, and the
experiment tooling (convergence tables, diagnostics, reference values,
a CLI) used to study the behavior numerically.
"""

from ._kernels import HAS_NUMBA, USING_NUMBA, backend_name
from .brownian import (
    BrownianPath,
    RandomStream,
    increments,
    refine,
    sample_path,
    sup_abs,
)
from .dominator import (
    DominatorTrace,
    check_domination,
    dominator_table,
    intro_domination,
    omega_membership_batch,
    radius,
    sigma_tilde,
)
from .estimator import (
    ConvergenceRow,
    McEstimate,
    MomentRow,
    OrderFit,
    ProbRow,
    abs_power_payoff,
    coupled_sweep,
    error_rows,
    fit_order,
    mce,
    moment_diagnostics,
    prob_omega_complement,
    square_payoff,
)
from .euler import (
    DivergenceDemo,
    EulerTrajectory,
    divergence_demo,
    euler_path,
    interpolate,
)
from .models import (
    SdeModel,
    ValidationReport,
    builtin_models,
    cubic,
    eval_coefficient,
    gbm,
    get_model,
    ginzburg_landau,
    validate_growth,
)
from .reference import (
    GL_SECOND_MOMENT_TARGET,
    ReferenceCache,
    ReferenceValue,
    cubic_reference,
    gbm_moment,
    gbm_reference,
    gl_exact_terminal,
    gl_second_moment_reference,
)

__version__ = "0.1.0"

__all__ = [
    "BrownianPath",
    "ConvergenceRow",
    "DivergenceDemo",
    "DominatorTrace",
    "EulerTrajectory",
    "GL_SECOND_MOMENT_TARGET",
    "HAS_NUMBA",
    "McEstimate",
    "MomentRow",
    "OrderFit",
    "ProbRow",
    "RandomStream",
    "ReferenceCache",
    "ReferenceValue",
    "SdeModel",
    "USING_NUMBA",
    "ValidationReport",
    "abs_power_payoff",
    "backend_name",
    "builtin_models",
    "check_domination",
    "coupled_sweep",
    "cubic",
    "cubic_reference",
    "divergence_demo",
    "dominator_table",
    "error_rows",
    "eval_coefficient",
    "euler_path",
    "fit_order",
    "gbm",
    "gbm_moment",
    "gbm_reference",
    "get_model",
    "ginzburg_landau",
    "gl_exact_terminal",
    "gl_second_moment_reference",
    "increments",
    "interpolate",
    "intro_domination",
    "mce",
    "moment_diagnostics",
    "omega_membership_batch",
    "prob_omega_complement",
    "radius",
    "refine",
    "sample_path",
    "sigma_tilde",
    "square_payoff",
    "sup_abs",
    "validate_growth",
]
