"""Steady-state Kalman-Bucy filtering error, cross-verified three ways.

The stabilizing Riccati solution, a frequency-domain integral of the
Popov function, and a zeros/poles closed form all compute the same
weighted trace of the steady output-error covariance; this package
evaluates each route independently and checks them against one another,
against half-plane Jensen formulas for rational functions, and against a
Monte Carlo simulation of the filtering loop.
"""

from .errors import (
    ContractError,
    DefinitenessError,
    DimensionError,
    ModelRejectionError,
    NoStabilizingSolutionError,
    NonConvergenceError,
    NumericalError,
    PoleAtFrequencyError,
    QuadratureError,
    RiccatiSpectraError,
    SimulationBlowUpError,
    SolverError,
)
from .jensen import (
    JensenResult,
    RationalFunction,
    from_roots,
    jensen_closed_form,
    jensen_numeric,
    limit_term,
    rational_function,
    verify_jensen,
)
from .model import SystemModel, ValidationReport, build_model, validate_detectability
from .riccati import (
    CareSolution,
    RiccatiTrajectory,
    integrate_riccati_ode,
    newton_kleinman_oracle,
    solve_care,
    stabilizing_gain,
)
from .simulate import (
    SimulationConfig,
    SimulationSummary,
    run_monte_carlo,
    whiteness_check,
)
from .spectral import (
    PopovEvaluator,
    SpectralReport,
    SpecialCaseResult,
    TraceBounds,
    ZerosPolesResult,
    bode_sensitivity_integral,
    frequency_integral,
    full_spectral_report,
    logdet_ratio,
    popov_eval,
    special_case_checks,
    trace_bounds,
    unstable_sum,
    verify_trace_identity,
    zeros_poles_form,
)

__version__ = "0.1.0"

__all__ = [
    "CareSolution",
    "ContractError",
    "DefinitenessError",
    "DimensionError",
    "JensenResult",
    "ModelRejectionError",
    "NoStabilizingSolutionError",
    "NonConvergenceError",
    "NumericalError",
    "PoleAtFrequencyError",
    "PopovEvaluator",
    "QuadratureError",
    "RationalFunction",
    "RiccatiSpectraError",
    "RiccatiTrajectory",
    "SimulationBlowUpError",
    "SimulationConfig",
    "SimulationSummary",
    "SolverError",
    "SpecialCaseResult",
    "SpectralReport",
    "SystemModel",
    "TraceBounds",
    "ValidationReport",
    "ZerosPolesResult",
    "bode_sensitivity_integral",
    "build_model",
    "frequency_integral",
    "from_roots",
    "full_spectral_report",
    "integrate_riccati_ode",
    "jensen_closed_form",
    "jensen_numeric",
    "limit_term",
    "logdet_ratio",
    "newton_kleinman_oracle",
    "popov_eval",
    "rational_function",
    "run_monte_carlo",
    "solve_care",
    "special_case_checks",
    "stabilizing_gain",
    "trace_bounds",
    "unstable_sum",
    "validate_detectability",
    "verify_jensen",
    "verify_trace_identity",
    "whiteness_check",
    "zeros_poles_form",
]
