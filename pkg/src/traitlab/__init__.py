"""Numerical laboratory for a trait-structured sexual population model.

The package simulates the nonlinear birth/death dynamics of a unit-mass
population density over a 1-D quantitative trait (offspring drawn around the
midparent value, selection as a gentle multiplicative fitness factor),
measures everything in 1-D Wasserstein distances built from quantile
functions, solves the macroscopic mean-trait ODE and its steady states, and
verifies the full catalogue of provable invariants at desk scale.
"""

from .core import (
    DEFAULT_GRID,
    AtomicMeasure,
    Density,
    Grid,
    ModelParams,
    density_from_csv,
    density_to_csv,
    gaussian_density,
    mass,
    mean,
    mixture_density,
    normalize,
    second_moment,
    variance,
)
from .dynamics import (
    TrajectoryRecord,
    check_lower_bound,
    check_tail_criterion,
    fit_exponential_rate,
    macro_discrepancies,
    rhs,
    simulate,
    step_euler,
)
from .kernels import (
    SelectionFn,
    affine_ramp_selection,
    eval_selection,
    eval_selection_d1,
    eval_selection_d2,
    bimodal_benchmark_selection,
    gaussian_pdf,
    selection_sup_norms,
)
from .macroscale import MacroField, RootReport, F_eval, F_prime, compare_macro, find_roots, ode_solve
from .reproduction import (
    ReproPlan,
    contraction_check,
    make_plan,
    reproduce_fast,
    reproduce_fast_with_drift,
    reproduce_oracle,
)
from .steady import SteadyResult, gaussian_proximity, solve_steady, t_alpha
from .transport import (
    QuantileFn,
    fitness_tilt,
    quantiles,
    tail_mixture,
    tilt_interp,
    tilt_translated,
    w1,
    w2,
    w_recentered,
)
from .verify import VerifyReport, run_verify

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "DEFAULT_GRID",
    "Density",
    "Grid",
    "MacroField",
    "ModelParams",
    "QuantileFn",
    "ReproPlan",
    "RootReport",
    "SelectionFn",
    "SteadyResult",
    "TrajectoryRecord",
    "VerifyReport",
    "F_eval",
    "F_prime",
    "affine_ramp_selection",
    "check_lower_bound",
    "check_tail_criterion",
    "compare_macro",
    "contraction_check",
    "density_from_csv",
    "density_to_csv",
    "eval_selection",
    "eval_selection_d1",
    "eval_selection_d2",
    "bimodal_benchmark_selection",
    "find_roots",
    "fit_exponential_rate",
    "fitness_tilt",
    "gaussian_density",
    "gaussian_pdf",
    "gaussian_proximity",
    "macro_discrepancies",
    "make_plan",
    "mass",
    "mean",
    "mixture_density",
    "normalize",
    "ode_solve",
    "quantiles",
    "reproduce_fast",
    "reproduce_fast_with_drift",
    "reproduce_oracle",
    "rhs",
    "run_verify",
    "second_moment",
    "selection_sup_norms",
    "simulate",
    "solve_steady",
    "step_euler",
    "t_alpha",
    "tail_mixture",
    "tilt_interp",
    "tilt_translated",
    "variance",
    "w1",
    "w2",
    "w_recentered",
]
