"""Certify a conformal out-of-distribution detector over a Gaussian latent model."""

from ._core import (
    ArgumentError,
    CalibrationSet,
    ConformalPredictor,
    FormatError,
    GaussianLatentModel,
    InternalError,
    IoError,
    OodcertError,
    ValidationError,
    binomial_condition_holds,
    calibrate,
    epsilon_adjusted,
    epsilon_chernoff,
    epsilon_no_violations,
    exact_epsilon,
    load_calibration,
    load_model,
    load_predictor,
    pac_sample_complexity,
    parse_calibration,
    parse_model,
    run_grid,
    scenario_relax,
    verify,
    violation_study,
)

__all__ = [
    "ArgumentError",
    "CalibrationSet",
    "ConformalPredictor",
    "FormatError",
    "GaussianLatentModel",
    "InternalError",
    "IoError",
    "OodcertError",
    "ValidationError",
    "binomial_condition_holds",
    "calibrate",
    "epsilon_adjusted",
    "epsilon_chernoff",
    "epsilon_no_violations",
    "exact_epsilon",
    "load_calibration",
    "load_model",
    "load_predictor",
    "pac_sample_complexity",
    "parse_calibration",
    "parse_model",
    "run_grid",
    "scenario_relax",
    "verify",
    "violation_study",
]
