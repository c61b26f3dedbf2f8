"""Attitude and angular-rate estimation from vector direction measurements.

The package has three layers. The geometric core (`so3`, `integrators`)
provides rotation parametrizations and a structure-preserving rigid-body
step built on a Newton solve of the discrete momentum map. The estimation
layer (`dynamics`, `filters`) provides the truth simulator, the
measurement model, two Gaussian filters on the quaternion embedding, and
two geometric filters that operate directly on rotation matrices. The
`harness` layer runs configured comparison cases, replications, spectra,
and a verification suite, with a command-line front end in `cli`.
"""

from .so3 import (hat, vee, exp_so3, rod, rod_q, quat_to_rot, rot_to_quat,
                  quat_multiply, quat_conjugate, quat_normalize, omega_matrix)
from .integrators import (NewtonSolverConfig, NewtonConvergenceError,
                          RigidBodyState, c_exp, rotor, step_rate,
                          rate_transition_jacobian, step_orientation_q,
                          step_orientation_R, step_rigid_body,
                          explicit_euler_rigid_body, kinetic_energy,
                          spatial_momentum, discrete_spatial_momentum)
from .dynamics import (TorqueProfile, ModelErrorSignal, MeasurementModel,
                       TruthTrajectory, euler_rhs, simulate_truth, measure,
                       measure_series, error_attitude, error_attitude_q,
                       error_rate)
from .filters import (GaussianFilterState, UtParams, ekf_predict, ekf_update,
                      ukf_step, sigma_points, unscented_moments,
                      normalization_bias, transition_jacobian,
                      output_jacobian_q, output_quadratic, predict_output,
                      rotor_jacobian, quat_left_mat, quat_right_mat,
                      MefState, PfState, FilterDivergenceError, mef_residual,
                      mef_step, pf_lie_derivative_1, pf_lie_derivative_2,
                      pf_correction, pf_step, pf_tune_sigma)
from .config import (ConfigError, ExperimentConfig, EkfInit, UkfInit, MefInit,
                     PfInit, from_dict, load_config, case1, case2, PRESETS)
from .harness import (RunResult, FilterRecord, SpectralReport,
                      MonteCarloResult, CheckReport, run_case, write_result,
                      read_result_dir, summary_json, spectral_analysis,
                      monte_carlo, tune_pf, check_suite, config_hash)

__version__ = "0.1.0"

__all__ = [
    "hat", "vee", "exp_so3", "rod", "rod_q", "quat_to_rot", "rot_to_quat",
    "quat_multiply", "quat_conjugate", "quat_normalize", "omega_matrix",
    "NewtonSolverConfig", "NewtonConvergenceError", "RigidBodyState", "c_exp",
    "rotor", "step_rate", "rate_transition_jacobian", "step_orientation_q",
    "step_orientation_R", "step_rigid_body", "explicit_euler_rigid_body",
    "kinetic_energy", "spatial_momentum", "discrete_spatial_momentum",
    "TorqueProfile", "ModelErrorSignal", "MeasurementModel",
    "TruthTrajectory", "euler_rhs", "simulate_truth", "measure",
    "measure_series", "error_attitude", "error_attitude_q", "error_rate",
    "GaussianFilterState", "UtParams", "ekf_predict", "ekf_update",
    "ukf_step", "sigma_points", "unscented_moments", "normalization_bias",
    "transition_jacobian", "output_jacobian_q", "output_quadratic",
    "predict_output", "rotor_jacobian", "quat_left_mat", "quat_right_mat",
    "MefState", "PfState", "FilterDivergenceError", "mef_residual",
    "mef_step", "pf_lie_derivative_1", "pf_lie_derivative_2",
    "pf_correction", "pf_step", "pf_tune_sigma",
    "ConfigError", "ExperimentConfig", "EkfInit", "UkfInit", "MefInit",
    "PfInit", "from_dict", "load_config", "case1", "case2", "PRESETS",
    "RunResult", "FilterRecord", "SpectralReport", "MonteCarloResult",
    "CheckReport", "run_case", "write_result", "read_result_dir",
    "summary_json", "spectral_analysis", "monte_carlo", "tune_pf",
    "check_suite", "config_hash",
    "__version__",
]
