"""Minimum-energy and modified predictive filters on the rotation group.

Both filters keep the attitude estimate on SO(3) by construction: every
attitude update is a right multiplication by a group exponential, so no
re-projection ever happens. That is the structural contrast with the
quaternion Kalman variants.

The minimum-energy filter (MEF) carries a 6x6 gain K driven by a Riccati
flow; its rate update solves a one-sided implicit momentum balance where
the correction impulse enters next to the applied torque. The predictive
filter (PF) leaves the kinematics uncorrected and injects an optimal
model-error estimate delta* into the rate dynamics only. The PF needs no
prior covariance, and its single tuning knob Sigma is adjusted offline
through the output-residual moment matrix M.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..so3 import hat, exp_so3
from ..integrators import NewtonSolverConfig, NewtonConvergenceError, step_rate

GAIN_NORM_LIMIT = 1e6


class FilterDivergenceError(RuntimeError):
    """Raised when a filter's internal gain leaves its stable range."""


@dataclass
class MefState:
    R: np.ndarray                       # estimated attitude, body to inertial
    w: np.ndarray                       # estimated body rate
    K: np.ndarray                       # 6x6 gain
    alpha_forget: float = 0.0
    q1: float = 1.0                     # per-output weights
    q2: float = 1.0
    d1: float = 1.0                     # per-output noise scales
    d2: float = 1.0
    brb: np.ndarray = field(default_factory=lambda: np.eye(3))  # B2 R^-1 B2^T

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        self.brb = np.asarray(self.brb, dtype=float)


@dataclass
class PfState:
    R: np.ndarray
    w: np.ndarray
    Q_pen: np.ndarray                   # prediction-error penalty
    Sigma_pen: np.ndarray               # model-error penalty
    G: np.ndarray = field(default_factory=lambda: np.eye(3))
    horizon: float = None               # prediction horizon inside zeta (s);
                                        # None resolves to the step size
    include_first_order: bool = True    # keep the h*L1 term in zeta
    m_accum: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))
    n_accum: int = 0

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.Q_pen = np.asarray(self.Q_pen, dtype=float)
        self.Sigma_pen = np.asarray(self.Sigma_pen, dtype=float)
        self.G = np.asarray(self.G, dtype=float)
        self.m_accum = np.asarray(self.m_accum, dtype=float)

    @property
    def residual_moment(self):
        """Running M = (1/N) sum of output-residual outer products."""
        if self.n_accum == 0:
            return np.zeros((6, 6))
        return self.m_accum / self.n_accum


def mef_residual(yh1, yh2, y1, y2):
    """Attitude residual -sum_i hat(yhat_i) y_i."""
    return -(np.cross(np.asarray(yh1, dtype=float), np.asarray(y1, dtype=float))
             + np.cross(np.asarray(yh2, dtype=float), np.asarray(y2, dtype=float)))


def _mef_rate_solve(w, impulse, inertia, h, newton):
    """Newton solve of the one-sided implicit momentum balance.

    Unknown x satisfies
        I x + (h/2) x cross I x + (h^2/12) x cross (x cross I x)
      = I w - (h/2) x cross I w + (h^2/12) x cross (x cross I w) + impulse
    where the right side also depends on x, so the Jacobian carries both
    contributions.
    """
    w = np.asarray(w, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    h12 = h * h / 12.0
    Iw = inertia @ w
    x = w.copy()
    for _ in range(newton.max_iterations):
        Ix = inertia @ x
        lhs = Ix + 0.5 * h * np.cross(x, Ix) + h12 * np.cross(x, np.cross(x, Ix))
        rhs = (Iw - 0.5 * h * np.cross(x, Iw) + h12 * np.cross(x, np.cross(x, Iw))
               + impulse)
        r = lhs - rhs
        if np.max(np.abs(r)) < newton.tolerance:
            return x
        J_lhs = (inertia + 0.5 * h * (hat(x) @ inertia - hat(Ix))
                 + h12 * (hat(x) @ (hat(x) @ inertia - hat(Ix)) - hat(np.cross(x, Ix))))
        J_rhs = (-0.5 * h * (-hat(Iw))
                 + h12 * (hat(x) @ (-hat(Iw)) - hat(np.cross(x, Iw))))
        x = x - np.linalg.solve(J_lhs - J_rhs, r)
    raise NewtonConvergenceError(float(np.max(np.abs(r))), newton.max_iterations)


def mef_step(state, y, torque, a1, a2, inertia, h, newton=None):
    """One iteration of the minimum-energy filter.

    Residual and output curvature use the pre-update attitude; the gain
    flow matrix A uses the post-update rate. The gain equation is advanced
    one forward-Euler step and symmetrized. The applied torque enters the
    rate solve next to the correction impulse; without it the filter has
    no model of the forced motion and cannot track it.
    """
    newton = newton or NewtonSolverConfig()
    inertia = np.asarray(inertia, dtype=float)
    torque = np.asarray(torque, dtype=float)
    y = np.asarray(y, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)

    R, w, K = state.R, state.w, state.K
    yh1, yh2 = R.T @ a1, R.T @ a2
    y1, y2 = y[0:3], y[3:6]
    rR = mef_residual(yh1, yh2, y1, y2)
    K11 = K[0:3, 0:3]
    K21 = K[3:6, 0:3]

    R_new = R @ exp_so3(h * (w + K11 @ rR))
    w_new = _mef_rate_solve(w, h * (torque + K21 @ rR), inertia, h, newton)

    A = np.zeros((6, 6))
    A[0:3, 0:3] = -hat(w_new)
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 3:6] = np.linalg.solve(inertia, hat(inertia @ w_new) - hat(w_new) @ inertia)

    E = np.zeros((6, 6))
    E[0:3, 0:3] = -(state.q1 / state.d1 ** 2) * 0.5 * (hat(yh1) @ hat(y1) + hat(y1) @ hat(yh1)) \
                  - (state.q2 / state.d2 ** 2) * 0.5 * (hat(yh2) @ hat(y2) + hat(y2) @ hat(yh2))

    BRB = np.zeros((6, 6))
    BRB[3:6, 3:6] = state.brb

    Wm = np.zeros((6, 6))
    Wm[0:3, 0:3] = 0.5 * hat(K11 @ rR)

    Kdot = (-state.alpha_forget * K + A @ K + K @ A.T - K @ E @ K + BRB
            - Wm @ K - K @ Wm.T)
    K_new = K + h * Kdot
    K_new = 0.5 * (K_new + K_new.T)
    if np.linalg.norm(K_new) > GAIN_NORM_LIMIT:
        raise FilterDivergenceError(
            f"gain norm {np.linalg.norm(K_new):.3e} exceeds {GAIN_NORM_LIMIT:.0e}")
    return replace(state, R=R_new, w=w_new, K=K_new)


def pf_lie_derivative_1(R, w, a):
    """First flow derivative of the body-frame direction R^T a."""
    yh = np.asarray(R, dtype=float).T @ np.asarray(a, dtype=float)
    return -np.cross(np.asarray(w, dtype=float), yh)


def pf_lie_derivative_2(R, w, a, torque, inertia, G, delta):
    """Second flow derivative of R^T a, including the model-error channel."""
    R = np.asarray(R, dtype=float)
    w = np.asarray(w, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    yh = R.T @ np.asarray(a, dtype=float)
    wdot = np.linalg.solve(inertia, np.cross(inertia @ w, w) + np.asarray(torque, dtype=float))
    wdot = wdot + np.asarray(G, dtype=float) @ np.asarray(delta, dtype=float)
    return np.cross(w, np.cross(w, yh)) + np.cross(yh, wdot)


def pf_correction(state, y, torque, a1, a2, inertia):
    """Optimal model-error estimate delta* from the current measurement.

    Expands each predicted output over the state's horizon, collects the
    delta-coefficient B and residual stack gamma, and solves the static
    quadratic problem. Taylor terms use the prediction horizon; the caller
    applies delta* over the integration step.
    """
    y = np.asarray(y, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    torque = np.asarray(torque, dtype=float)
    R, w = state.R, state.w
    hp = state.horizon
    if hp is None:
        raise ValueError("prediction horizon is unset; pf_step resolves it "
                         "to the integration step")
    Qi = np.linalg.inv(state.Q_pen)
    lam = 0.5 * hp * hp * np.eye(3)

    B = np.zeros((3, 3))
    gam = np.zeros(3)
    for a, yk in ((np.asarray(a1, dtype=float), y[0:3]),
                  (np.asarray(a2, dtype=float), y[3:6])):
        yh = R.T @ a
        L2_free = pf_lie_derivative_2(R, w, a, torque, inertia, state.G, np.zeros(3))
        zeta = 0.5 * hp * hp * L2_free
        if state.include_first_order:
            zeta = zeta + hp * pf_lie_derivative_1(R, w, a)
        wk = hat(yh) @ state.G
        B += hat(yk) @ (lam @ wk)
        gam += np.cross(yk, yh) + np.cross(yk, zeta)
    lhs = B.T @ Qi.T @ B + state.Sigma_pen.T
    return -0.5 * np.linalg.solve(lhs, B.T @ (Qi + Qi.T) @ gam)


def pf_step(state, y, torque, a1, a2, inertia, h_step, newton=None):
    """One iteration of the predictive filter.

    The attitude kinematics stay uncorrected; delta* acts on the rate
    equation only, as an extra acceleration folded into the torque
    impulse. The output residual at the propagated state feeds the
    running moment matrix used for Sigma tuning.
    """
    newton = newton or NewtonSolverConfig()
    inertia = np.asarray(inertia, dtype=float)
    torque = np.asarray(torque, dtype=float)
    y = np.asarray(y, dtype=float)
    if state.horizon is None:
        state = replace(state, horizon=h_step)

    delta = pf_correction(state, y, torque, a1, a2, inertia)
    R_new = state.R @ exp_so3(h_step * state.w)
    w_new = step_rate(state.w, h_step * (torque + inertia @ delta), inertia,
                      h_step, newton)

    resid = np.concatenate([R_new.T @ np.asarray(a1, dtype=float) - y[0:3],
                            R_new.T @ np.asarray(a2, dtype=float) - y[3:6]])
    m_accum = state.m_accum + np.outer(resid, resid)
    return replace(state, R=R_new, w=w_new, m_accum=m_accum,
                   n_accum=state.n_accum + 1)


def pf_tune_sigma(residuals, sigma_eps, Sigma_pen, ratio=1.1, dead_band=0.0):
    """Covariance-constraint adjustment of the model-error penalty.

    Computes sigma* = trace(M)/6 from the residual sequence and scales
    Sigma down when sigma* undershoots the target, up when it overshoots.
    A relative dead band widens the keep region; at zero only exact
    equality keeps Sigma.
    """
    residuals = np.atleast_2d(np.asarray(residuals, dtype=float))
    if residuals.shape[0] < 1:
        raise ValueError("need at least one residual")
    M = residuals.T @ residuals / residuals.shape[0]
    sigma_star = np.trace(M) / 6.0
    lo = sigma_eps * (1.0 - dead_band)
    hi = sigma_eps * (1.0 + dead_band)
    if sigma_star < lo:
        return Sigma_pen / ratio
    if sigma_star > hi:
        return Sigma_pen * ratio
    return Sigma_pen
