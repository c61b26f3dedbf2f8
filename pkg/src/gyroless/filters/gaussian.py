"""Quaternion-state EKF and UKF for attitude and rate estimation.

State is the 7-vector [q; Omega] with q scalar-first. Both filters share the
symplectic propagation step from ``integrators`` and re-impose the quaternion
unit norm by Euclidean normalization after each correction. That projection
is an external intervention on the Kalman recursion; ``normalization_bias``
evaluates its first-order systematic effect for diagnostic use.

The EKF transition Jacobian is analytic. The quaternion block follows from
the bilinearity of q' = q (x) rotor(h Omega); the rate block comes from
differentiating the implicit momentum balance solved by the Newton stepper.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..so3 import hat, quat_to_rot, quat_normalize
from ..integrators import (
    NewtonSolverConfig,
    rotor,
    step_rate,
    rate_transition_jacobian,
)

EIGENVALUE_FLOOR = 1e-12
CONDITION_LIMIT = 1e12


@dataclass
class UtParams:
    """Scaled unscented-transform parameters; lam is derived, not stored."""
    alpha: float = 1.0
    kappa: float = 0.0
    beta: float = 2.0

    def lam(self, dim):
        return self.alpha ** 2 * (dim + self.kappa) - dim

    def weights(self, dim):
        """Mean weights, covariance weights, and the sigma spread factor."""
        lam = self.lam(dim)
        if dim + lam <= 0:
            raise ValueError("dim + lambda must be positive")
        wm = np.full(2 * dim + 1, 1.0 / (2.0 * (dim + lam)))
        wc = wm.copy()
        wm[0] = lam / (dim + lam)
        wc[0] = wm[0] + 1.0 - self.alpha ** 2 + self.beta
        return wm, wc, np.sqrt(dim + lam)


@dataclass
class GaussianFilterState:
    """Mean, covariance, and the two noise matrices the filters carry."""
    x: np.ndarray                    # (7,) [q; Omega]
    P: np.ndarray                    # (7, 7)
    W: np.ndarray                    # (7, 7) process noise
    Q_meas: np.ndarray               # (6, 6) measurement noise

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        self.Q_meas = np.asarray(self.Q_meas, dtype=float)

    @property
    def q(self):
        return self.x[0:4]

    @property
    def w(self):
        return self.x[4:7]


def quat_left_mat(q):
    """Matrix L with L @ p = q (x) p."""
    w, x, y, z = q
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def quat_right_mat(p):
    """Matrix R with R @ q = q (x) p."""
    w, x, y, z = p
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def rotor_jacobian(w, h):
    """4x3 derivative of rotor(w, h) with respect to the rate w."""
    w = np.asarray(w, dtype=float)
    half = 0.5 * h
    n = np.linalg.norm(w)
    if n < 1e-6:
        d0 = -half * half * w
        dv = half * np.eye(3) - (half ** 3 / 3.0) * np.outer(w, w)
    else:
        th = half * n
        s, c = np.sin(th), np.cos(th)
        u = w / n
        d0 = -half * s * u
        f = s / n
        fp = (half * c * n - s) / n ** 2
        dv = f * np.eye(3) + (fp / n) * np.outer(w, w)
    J = np.empty((4, 3))
    J[0] = d0
    J[1:4] = dv
    return J


def output_jacobian_q(q, a):
    """3x4 derivative of r(q)^T a with respect to the quaternion."""
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    w, v = q[0], q[1:4]
    J = np.empty((3, 4))
    J[:, 0] = 2.0 * w * a - 2.0 * np.cross(v, a)
    J[:, 1:4] = (-2.0 * np.outer(a, v) + 2.0 * np.outer(v, a)
                 + 2.0 * np.dot(v, a) * np.eye(3) + 2.0 * w * hat(a))
    return J


def transition_jacobian(q, w, w_next, inertia, h):
    """7x7 Jacobian of one discrete propagation step at (q, w)."""
    F = np.zeros((7, 7))
    d = rotor(w, h)
    F[0:4, 0:4] = quat_right_mat(d)
    F[0:4, 4:7] = quat_left_mat(q) @ rotor_jacobian(w, h)
    F[4:7, 4:7] = rate_transition_jacobian(w, w_next, inertia, h)
    return F


def output_quadratic(q, a):
    """Body-frame direction r(q)^T a as a homogeneous quadratic in q.

    Coincides with the rotation-matrix evaluation on unit quaternions and
    is the exact map that ``output_jacobian_q`` differentiates, so finite
    differences of this function reproduce H without projection terms.
    """
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    w, v = q[0], q[1:4]
    return (w * w - v @ v) * a + 2.0 * np.dot(v, a) * v - 2.0 * w * np.cross(v, a)


def predict_output(q, a1, a2):
    """Stacked noiseless measurement [r(q)^T a1; r(q)^T a2]."""
    R = quat_to_rot(quat_normalize(q))
    return np.concatenate([R.T @ np.asarray(a1, dtype=float),
                           R.T @ np.asarray(a2, dtype=float)])


def ekf_predict(state, torque, inertia, h, newton=None):
    """Time update: symplectic mean propagation, P <- F P F^T + W.

    The quaternion advances by the raw bilinear product q (x) rotor, the
    same map F differentiates; no renormalization happens here, mirroring
    the printed recursion where the unit norm is restored only after the
    measurement update.
    """
    newton = newton or NewtonSolverConfig()
    inertia = np.asarray(inertia, dtype=float)
    q, w = state.q, state.w
    w_next = step_rate(w, h * np.asarray(torque, dtype=float), inertia, h, newton)
    q_next = quat_left_mat(q) @ rotor(w, h)
    F = transition_jacobian(q, w, w_next, inertia, h)
    P = F @ state.P @ F.T + state.W
    P = 0.5 * (P + P.T)
    x = np.concatenate([q_next, w_next])
    return replace(state, x=x, P=P)


def ekf_update(state, y, a1, a2):
    """Measurement update with Euclidean re-normalization of the quaternion.

    Raises np.linalg.LinAlgError when the innovation covariance condition
    number exceeds 1e12, which signals degenerate measurement geometry.
    """
    y = np.asarray(y, dtype=float)
    q = state.q
    yhat = predict_output(q, a1, a2)
    H = np.zeros((6, 7))
    H[0:3, 0:4] = output_jacobian_q(q, a1)
    H[3:6, 0:4] = output_jacobian_q(q, a2)
    Py = H @ state.P @ H.T + state.Q_meas
    if np.linalg.cond(Py) > CONDITION_LIMIT:
        raise np.linalg.LinAlgError(
            "innovation covariance is ill-conditioned (degenerate geometry)")
    K = np.linalg.solve(Py, (state.P @ H.T).T).T
    x = state.x + K @ (y - yhat)
    P = state.P - K @ Py @ K.T
    P = 0.5 * (P + P.T)
    x[0:4] = quat_normalize(x[0:4])
    return replace(state, x=x, P=P)


def sigma_points(x, V, params):
    """2L+1 sigma points from the lower Cholesky factor of V."""
    x = np.asarray(x, dtype=float)
    dim = x.size
    L = np.linalg.cholesky(np.asarray(V, dtype=float))
    _, _, gamma = params.weights(dim)
    X = np.empty((2 * dim + 1, dim))
    X[0] = x
    for i in range(dim):
        X[1 + i] = x + gamma * L[:, i]
        X[1 + dim + i] = x - gamma * L[:, i]
    return X


def unscented_moments(points, wm, wc, anchor_index=0):
    """Weighted mean and covariance of transformed sigma points.

    Moments are accumulated around the anchor point rather than the origin,
    so a constant shift applied to every point moves the mean by exactly
    that shift and leaves the covariance untouched at machine level.
    Returns (mean, cov, deviations) with deviations about the mean.
    """
    points = np.asarray(points, dtype=float)
    anchor = points[anchor_index]
    centered = points - anchor
    mean_dev = wm @ centered
    mean = anchor + mean_dev
    dev = centered - mean_dev
    cov = (dev * wc[:, None]).T @ dev
    return mean, cov, dev


def ukf_step(state, torque, y, params, inertia, h, a1=None, a2=None, newton=None):
    """One full predict-plus-update cycle of the unscented filter.

    Reference directions default to the canonical pair e1, e2 when not
    supplied.
    """
    newton = newton or NewtonSolverConfig()
    inertia = np.asarray(inertia, dtype=float)
    torque = np.asarray(torque, dtype=float)
    y = np.asarray(y, dtype=float)
    a1 = np.array([1.0, 0.0, 0.0]) if a1 is None else np.asarray(a1, dtype=float)
    a2 = np.array([0.0, 1.0, 0.0]) if a2 is None else np.asarray(a2, dtype=float)
    dim = state.x.size
    wm, wc, _ = params.weights(dim)

    V = state.P + state.W
    X = sigma_points(state.x, V, params)

    Xp = np.empty_like(X)
    for i in range(X.shape[0]):
        qi, wi = X[i, 0:4], X[i, 4:7]
        wn = step_rate(wi, h * torque, inertia, h, newton)
        qn = quat_left_mat(qi) @ rotor(wi, h)
        Xp[i, 0:4] = qn / np.linalg.norm(qn)
        Xp[i, 4:7] = wn

    xbar, Px, Dx = unscented_moments(Xp, wm, wc)

    Yp = np.empty((Xp.shape[0], 6))
    for i in range(Xp.shape[0]):
        Yp[i] = predict_output(Xp[i, 0:4], a1, a2)
    ybar, Pe, Dy = unscented_moments(Yp, wm, wc)
    Pe = Pe + state.Q_meas
    Pxy = (Dx * wc[:, None]).T @ Dy

    K = np.linalg.solve(Pe, Pxy.T).T
    x = xbar + K @ (y - ybar)
    x[0:4] = quat_normalize(x[0:4])
    P = Px - K @ Pe @ K.T
    P = 0.5 * (P + P.T)
    ev, Evec = np.linalg.eigh(P)
    if ev[0] < EIGENVALUE_FLOOR:
        ev = np.clip(ev, EIGENVALUE_FLOOR, None)
        P = Evec @ np.diag(ev) @ Evec.T
        P = 0.5 * (P + P.T)
    return replace(state, x=x, P=P)


def normalization_bias(q_pred, correction):
    """First-order bias of Euclidean quaternion normalization.

    For a unit q and correction c, normalized(q + c) equals
    (q + c) - (q + c)(q^T c) up to O(||c||^2); this returns that
    subtracted term. Diagnostic only, never applied inside a filter.
    """
    q_pred = np.asarray(q_pred, dtype=float)
    correction = np.asarray(correction, dtype=float)
    return (q_pred + correction) * float(q_pred @ correction)
