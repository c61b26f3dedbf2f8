"""Truth-model simulation and vector-measurement generation.

The truth is a forced rigid body integrated with the symplectic scheme from
``integrators``; the unknown disturbance enters the rate dynamics through G
and is folded into the per-step torque impulse as U_k = T(t_k) + I G d(t_k).
Measurements are two known inertial directions seen in the body frame,
y_i = R^T a_i + d_i e_i, with per-component standard Gaussian e_i.

Process noise and measurement noise come from separate generators seeded
independently, so changing one seed leaves the other signal bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np

from .so3 import quat_to_rot, rod
from .integrators import RigidBodyState, step_rigid_body, NewtonSolverConfig


@dataclass(frozen=True)
class TorqueProfile:
    """Deterministic applied torque.

    kind "sinusoid-triplet" is the pattern shared by every case study:
    componentwise amplitudes*signs*[sin(w1 t), sin(w2 t), cos(w3 t)].
    """
    kind: str = "zero"
    amplitudes: tuple = (0.0, 0.0, 0.0)
    frequencies: tuple = (0.0, 0.0, 0.0)  # rad/s
    signs: tuple = (1.0, -1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("sinusoid-triplet", "constant", "zero"):
            raise ValueError(f"unknown torque kind {self.kind!r}")
        if any(f < 0 for f in self.frequencies):
            raise ValueError("torque frequencies must be nonnegative")

    def sample(self, t):
        """Evaluate on a time grid, returning shape (len(t), 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, 3))
        if self.kind == "zero":
            return out
        a = np.asarray(self.amplitudes, dtype=float) * np.asarray(self.signs, dtype=float)
        if self.kind == "constant":
            out[:] = a
            return out
        w = np.asarray(self.frequencies, dtype=float)
        out[:, 0] = a[0] * np.sin(w[0] * t)
        out[:, 1] = a[1] * np.sin(w[1] * t)
        out[:, 2] = a[2] * np.cos(w[2] * t)
        return out

    def __call__(self, t):
        return self.sample(t)[0] if np.isscalar(t) else self.sample(t)


@dataclass(frozen=True)
class ModelErrorSignal:
    """Unknown disturbance d(t) driving the rate dynamics through G.

    Gaussian white noise is realized as a piecewise-constant per-step vector
    with per-axis standard deviation ``std`` (no 1/sqrt(h) scaling), so the
    stochastic and deterministic channels are structurally identical.
    """
    kind: str = "zero"
    std: float = 0.0
    amplitudes: tuple = (0.0, 0.0, 0.0)
    frequencies: tuple = (0.0, 0.0, 0.0)
    signs: tuple = (1.0, -1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian-white", "deterministic-sinusoid", "zero"):
            raise ValueError(f"unknown model-error kind {self.kind!r}")
        if self.std < 0:
            raise ValueError("std must be nonnegative")

    def sample(self, t):
        """Disturbance samples on the grid, shape (len(t), 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "zero":
            return np.zeros((t.size, 3))
        if self.kind == "gaussian-white":
            rng = np.random.default_rng(self.seed)
            return self.std * rng.standard_normal((t.size, 3))
        a = np.asarray(self.amplitudes, dtype=float) * np.asarray(self.signs, dtype=float)
        w = np.asarray(self.frequencies, dtype=float)
        out = np.empty((t.size, 3))
        out[:, 0] = a[0] * np.sin(w[0] * t)
        out[:, 1] = a[1] * np.sin(w[1] * t)
        out[:, 2] = a[2] * np.cos(w[2] * t)
        return out


@dataclass
class MeasurementModel:
    """Two-direction vector measurement with independent sensors.

    The noise generator is owned by the model; ``reset()`` rewinds it so a
    run can be replayed bit-identically.
    """
    a1: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    a2: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    d1: float = 0.0
    d2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.a1 = np.asarray(self.a1, dtype=float)
        self.a2 = np.asarray(self.a2, dtype=float)
        for a in (self.a1, self.a2):
            if abs(np.linalg.norm(a) - 1.0) > 1e-9:
                raise ValueError("reference directions must be unit vectors")
        if self.d1 < 0 or self.d2 < 0:
            raise ValueError("noise scales must be nonnegative")
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def draw_noise(self, n=None):
        """Next standard-normal 6-vector(s) from the measurement stream."""
        if n is None:
            return self._rng.standard_normal(6)
        return self._rng.standard_normal((n, 6))


@dataclass(frozen=True)
class TruthTrajectory:
    """Uniform-grid truth states plus the signals that produced them."""
    t: np.ndarray          # (N+1,)
    q: np.ndarray          # (N+1, 4)
    w: np.ndarray          # (N+1, 3)
    torque: np.ndarray     # (N+1, 3) applied torque samples
    delta: np.ndarray      # (N+1, 3) model-error samples

    @property
    def h(self):
        return float(self.t[1] - self.t[0])

    @property
    def n_steps(self):
        return self.t.size - 1

    def rotations(self):
        """Rotation matrices of every grid point, shape (N+1, 3, 3)."""
        out = np.empty((self.q.shape[0], 3, 3))
        for k in range(self.q.shape[0]):
            out[k] = quat_to_rot(self.q[k])
        return out


def euler_rhs(w, torque, inertia, G, delta):
    """Right-hand side of Euler's equation with disturbance channel G d."""
    w = np.asarray(w, dtype=float)
    Iw = np.asarray(inertia, dtype=float) @ w
    body = np.cross(Iw, w) + np.asarray(torque, dtype=float)
    return np.linalg.solve(inertia, body) + np.asarray(G, dtype=float) @ np.asarray(delta, dtype=float)


def simulate_truth(config, kernel=True):
    """Propagate the configured initial state over the full horizon.

    The symplectic stepper consumes the impulse h*(T_k + I G d_k) each step.
    ``kernel=False`` runs the plain per-step python path instead of the
    compiled loop; both produce the same trajectory to roundoff and the
    same signals bit-identically.
    """
    h = config.h
    n = int(round(config.horizon / h))
    t = np.arange(n + 1) * h
    inertia = np.asarray(config.inertia, dtype=float)
    G = np.asarray(config.G, dtype=float)
    T = config.torque_profile.sample(t)
    delta = config.model_error.sample(t)
    U = T + (inertia @ (G @ delta.T)).T

    q0 = np.asarray(config.q0, dtype=float)
    w0 = np.asarray(config.w0, dtype=float)
    if kernel:
        from ._kernels import truth_run
        qs, ws, status, bad_step = truth_run(q0, w0, U[:-1], inertia, h)
        if status != 0:
            raise RuntimeError(f"truth integration failed at step {bad_step}")
    else:
        cfg = NewtonSolverConfig()
        qs = np.empty((n + 1, 4))
        ws = np.empty((n + 1, 3))
        state = RigidBodyState(q=q0, w=w0)
        qs[0], ws[0] = state.q, state.w
        for k in range(n):
            state = step_rigid_body(state, U[k], inertia, h, cfg)
            qs[k + 1], ws[k + 1] = state.q, state.w
    return TruthTrajectory(t=t, q=qs, w=ws, torque=T, delta=delta)


def measure(state, model, t=0.0):
    """One noisy 6-vector measurement of a rigid-body state.

    Draws the next sample from the model's noise stream; the raw output is
    not renormalized.
    """
    R = state.rotation if isinstance(state, RigidBodyState) else quat_to_rot(state.q)
    eps = model.draw_noise()
    y = np.empty(6)
    y[0:3] = R.T @ model.a1 + model.d1 * eps[0:3]
    y[3:6] = R.T @ model.a2 + model.d2 * eps[3:6]
    return y


def measure_series(traj, model):
    """Measurements for every grid point of a trajectory, shape (N+1, 6).

    Equivalent to calling measure() state by state on a freshly reset model;
    vectorized for the run harness.
    """
    n1 = traj.q.shape[0]
    eps = model.draw_noise(n1)
    Y = np.empty((n1, 6))
    for k in range(n1):
        R = quat_to_rot(traj.q[k])
        Y[k, 0:3] = R.T @ model.a1 + model.d1 * eps[k, 0:3]
        Y[k, 3:6] = R.T @ model.a2 + model.d2 * eps[k, 3:6]
    return Y


def error_attitude(R_true, R_est):
    """Geodesic attitude error angle in [0, pi] (rad)."""
    R_true = np.asarray(R_true, dtype=float)
    R_est = np.asarray(R_est, dtype=float)
    c = 1.0 - 0.5 * np.trace(np.eye(3) - R_true.T @ R_est)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def error_attitude_q(q_true, q_est):
    """Attitude error angle between two quaternions (rad)."""
    return error_attitude(quat_to_rot(q_true), quat_to_rot(q_est))


def error_rate(w_true, w_est, R_true, R_est):
    """Rate error with each rate carried to the inertial frame by its own attitude."""
    return (np.asarray(R_est, dtype=float) @ np.asarray(w_est, dtype=float)
            - np.asarray(R_true, dtype=float) @ np.asarray(w_true, dtype=float))
