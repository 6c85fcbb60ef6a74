"""Numerical laboratory for decay, contraction and finite-time extinction in
degenerate diffusion with gradient growth.

The pieces: `regime` holds the exponent calculus and closed-form predictions,
`field` the grids and discrete nonlinear-diffusion operators, `evolve` the
time steppers and scenario runner, `metrics` the norms, truncations, decay
fits and envelope checks, `cli` the command line front end.
"""

from .regime import (
    BOUNDARY_TOL,
    DecayPrediction,
    L1RegimeExponents,
    NonPositiveRateError,
    ProblemParams,
    Regime,
    RegimeReport,
    Thresholds,
    beta_exponent,
    classify,
    coercive_decay_exponents,
    decay_prediction,
    delta_threshold,
    l1_regime_exponents,
    lambda_rate,
    nu_exponent,
    regime_thresholds,
    regularizing_bound,
    regularizing_exponents,
    regularizing_omega,
    sigma_exponent,
    sup_decay_exponents,
    universal_sup_exponent,
)
from .field import (
    CoefficientField,
    Grid,
    ScalarField,
    face_diffusivities,
    gradient,
    gradient_magnitude,
    gradient_magnitude_q,
    p_flux_divergence,
    read_field_csv,
    write_field_csv,
)
from .metrics import (
    DegenerateWindowError,
    EnvelopeReport,
    FitResult,
    InsufficientDataError,
    NormSeries,
    calibrate_decay_rate,
    check_envelope,
    distribution_tail,
    envelope_extinction_time,
    fit_exponential_decay,
    fit_power_decay,
    gronwall_envelope,
    level_split,
    lr_norm,
    marcinkiewicz_quasinorm,
    truncate_capped,
    truncate_excess,
    truncation_level_for,
)
from .evolve import (
    InitialSpec,
    NonConvergenceError,
    OverflowDetected,
    RunResult,
    Scenario,
    detect_extinction,
    make_initial,
    run,
    stable_dt,
    step_explicit,
    step_imex,
)

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY_TOL",
    "CoefficientField",
    "DecayPrediction",
    "DegenerateWindowError",
    "EnvelopeReport",
    "FitResult",
    "Grid",
    "InitialSpec",
    "InsufficientDataError",
    "L1RegimeExponents",
    "NonConvergenceError",
    "NonPositiveRateError",
    "NormSeries",
    "OverflowDetected",
    "ProblemParams",
    "Regime",
    "RegimeReport",
    "RunResult",
    "ScalarField",
    "Scenario",
    "Thresholds",
    "beta_exponent",
    "calibrate_decay_rate",
    "check_envelope",
    "classify",
    "coercive_decay_exponents",
    "decay_prediction",
    "delta_threshold",
    "detect_extinction",
    "distribution_tail",
    "envelope_extinction_time",
    "face_diffusivities",
    "fit_exponential_decay",
    "fit_power_decay",
    "gradient",
    "gradient_magnitude",
    "gradient_magnitude_q",
    "gronwall_envelope",
    "l1_regime_exponents",
    "lambda_rate",
    "level_split",
    "lr_norm",
    "make_initial",
    "marcinkiewicz_quasinorm",
    "nu_exponent",
    "p_flux_divergence",
    "read_field_csv",
    "regime_thresholds",
    "regularizing_bound",
    "regularizing_exponents",
    "regularizing_omega",
    "run",
    "sigma_exponent",
    "stable_dt",
    "step_explicit",
    "step_imex",
    "sup_decay_exponents",
    "truncate_capped",
    "truncate_excess",
    "truncation_level_for",
    "universal_sup_exponent",
    "write_field_csv",
    "__version__",
]
