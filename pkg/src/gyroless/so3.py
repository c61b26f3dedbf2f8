"""Quaternion and SO(3) primitives shared by the simulator and all filters.

Conventions used throughout the package:

* quaternions are scalar-first 4-arrays ``[w, x, y, z]`` with the Hamilton
  product, unit norm, living on S3 (double cover: q and -q are the same
  rotation);
* rotation matrices map body coordinates to inertial coordinates, so a
  reference direction ``a`` known in the inertial frame is seen on board as
  ``R.T @ a``;
* the hat map identifies R3 with 3x3 skew-symmetric matrices via
  ``hat(v) @ u = cross(v, u)``.

Everything here is a pure function over plain float64 ndarrays.
"""

import numpy as np

# Below this angle the closed-form sin/cos coefficients of the exponential
# are replaced by their series to avoid 0/0.
SMALL_ANGLE = 1e-8


def hat(v):
    """Skew-symmetric matrix of a 3-vector: hat(v) @ u = v x u."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vee(X):
    """Inverse of the hat map.

    Raises ValueError if X is not skew-symmetric (asymmetry beyond 1e-9),
    which signals a corrupted algebra element upstream.
    """
    X = np.asarray(X, dtype=float)
    if np.max(np.abs(X + X.T)) > 1e-9:
        raise ValueError("vee: input is not skew-symmetric")
    return np.array([X[2, 1], X[0, 2], X[1, 0]])


def exp_so3(v):
    """Exponential map so(3) -> SO(3) by the Rodrigues formula.

    For angles below SMALL_ANGLE the sin(t)/t and (1-cos t)/t^2 factors use
    their second-order Taylor expansions.
    """
    v = np.asarray(v, dtype=float)
    t = np.linalg.norm(v)
    K = hat(v)
    if t < SMALL_ANGLE:
        a = 1.0 - t * t / 6.0
        b = 0.5 - t * t / 24.0
    else:
        a = np.sin(t) / t
        b = (1.0 - np.cos(t)) / (t * t)
    return np.eye(3) + a * K + b * (K @ K)


def rod(angle, axis):
    """Rotation by ``angle`` (rad) about ``axis`` (normalized internally)."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        if abs(angle) < 1e-15:
            return np.eye(3)
        raise ValueError("rod: zero axis with nonzero angle")
    return exp_so3(angle * axis / n)


def rod_q(q):
    """Rotation matrix of a unit quaternion.

    Same map as quat_to_rot; kept as the axis-angle-flavored entry point.
    Invariant under q -> -q.
    """
    return quat_to_rot(q)


def quat_to_rot(q):
    """Rotation matrix of a scalar-first unit quaternion."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(R):
    """Unit quaternion of a rotation matrix, canonicalized to w >= 0.

    Uses the largest-pivot variant so the conversion stays well conditioned
    near 180 degree rotations.
    """
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(q1, q2):
    """Hamilton product q1 * q2 (composition: rotation q2 then q1)."""
    w1, x1, y1, z1 = np.asarray(q1, dtype=float)
    w2, x2, y2, z2 = np.asarray(q2, dtype=float)
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q):
    """Conjugate (inverse for unit quaternions)."""
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q4):
    """Project a raw 4-vector back onto S3.

    Raises ValueError when the norm is below 1e-9; a vector that short no
    longer identifies a direction on the sphere.
    """
    q4 = np.asarray(q4, dtype=float)
    n = np.linalg.norm(q4)
    if n < 1e-9:
        raise ValueError("quat_normalize: norm below 1e-9")
    return q4 / n


def omega_matrix(w):
    """Kinematics matrix M(Omega) with q_dot = M(Omega) q.

    M(Omega) = 1/2 * [[0, -Omega^T], [Omega, -hat(Omega)]], skew-symmetric,
    so the quaternion norm is exactly preserved by the continuous flow.
    """
    w = np.asarray(w, dtype=float)
    M = np.zeros((4, 4))
    M[0, 1:] = -w
    M[1:, 0] = w
    M[1:, 1:] = -hat(w)
    return 0.5 * M
