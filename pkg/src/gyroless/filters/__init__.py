"""Attitude filters: Gaussian (EKF, UKF) and deterministic (MEF, PF)."""

from .gaussian import (
    GaussianFilterState,
    UtParams,
    ekf_predict,
    ekf_update,
    ukf_step,
    sigma_points,
    unscented_moments,
    normalization_bias,
    transition_jacobian,
    output_jacobian_q,
    output_quadratic,
    predict_output,
    rotor_jacobian,
    quat_left_mat,
    quat_right_mat,
)
from .deterministic import (
    MefState,
    PfState,
    FilterDivergenceError,
    mef_residual,
    mef_step,
    pf_lie_derivative_1,
    pf_lie_derivative_2,
    pf_correction,
    pf_step,
    pf_tune_sigma,
)

__all__ = [
    "GaussianFilterState",
    "UtParams",
    "ekf_predict",
    "ekf_update",
    "ukf_step",
    "sigma_points",
    "unscented_moments",
    "normalization_bias",
    "transition_jacobian",
    "output_jacobian_q",
    "output_quadratic",
    "predict_output",
    "rotor_jacobian",
    "quat_left_mat",
    "quat_right_mat",
    "MefState",
    "PfState",
    "FilterDivergenceError",
    "mef_residual",
    "mef_step",
    "pf_lie_derivative_1",
    "pf_lie_derivative_2",
    "pf_correction",
    "pf_step",
    "pf_tune_sigma",
]
