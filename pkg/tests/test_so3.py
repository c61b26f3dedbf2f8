"""Quaternion and SO(3) primitive properties.

Derived expectations are computed inside each test by an independent route
(series summation, random-sample round trips, quadratic forms) before the
library value is compared against them.
"""

import numpy as np
import pytest

from gyroless.so3 import (hat, vee, exp_so3, rod, rod_q, quat_to_rot,
                          rot_to_quat, quat_multiply, quat_conjugate,
                          quat_normalize, omega_matrix)

RNG = np.random.default_rng(1234)


def random_unit_quat(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


# --- hat / vee ---------------------------------------------------------------

def test_hat_zero_is_zero_matrix():
    assert np.array_equal(hat([0.0, 0.0, 0.0]), np.zeros((3, 3)))


def test_hat_self_product_vanishes():
    v = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(hat(v) @ v, np.zeros(3))


def test_hat_basis_cross_product():
    assert np.array_equal(hat([1.0, 0.0, 0.0]) @ [0.0, 1.0, 0.0],
                          [0.0, 0.0, 1.0])


def test_hat_matches_cross_product_on_random_vectors():
    for _ in range(50):
        v = RNG.standard_normal(3)
        u = RNG.standard_normal(3)
        expected = np.cross(v, u)
        assert np.allclose(hat(v) @ u, expected, atol=1e-14)


def test_vee_round_trips():
    for v in ([1.0, 2.0, 3.0], [-0.3, 0.2, 0.1], [0.0, 0.0, 0.0]):
        assert np.array_equal(vee(hat(v)), np.asarray(v))
    X = hat(RNG.standard_normal(3))
    assert np.array_equal(hat(vee(X)), X)


def test_vee_rejects_non_skew_input():
    with pytest.raises(ValueError):
        vee(np.eye(3))


# --- exponential map ----------------------------------------------------------

def test_exp_so3_zero_is_identity():
    assert np.array_equal(exp_so3([0.0, 0.0, 0.0]), np.eye(3))


def test_exp_so3_quarter_turn_about_z():
    R = exp_so3([0.0, 0.0, np.pi / 2.0])
    assert np.allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


def test_exp_so3_matches_matrix_power_series():
    # oracle: truncated series sum_k hat(v)^k / k!
    for _ in range(30):
        v = RNG.standard_normal(3)
        n = np.linalg.norm(v)
        if n > np.pi:
            v *= np.pi / n
        K = hat(v)
        series = np.eye(3)
        term = np.eye(3)
        for k in range(1, 21):
            term = term @ K / k
            series = series + term
        assert np.allclose(exp_so3(v), series, atol=1e-12)


def test_exp_so3_group_membership_up_to_norm_ten():
    for _ in range(50):
        v = RNG.standard_normal(3)
        v *= RNG.uniform(0.0, 10.0) / np.linalg.norm(v)
        R = exp_so3(v)
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


def test_exp_so3_inverse_is_transpose():
    v = RNG.standard_normal(3)
    assert np.allclose(exp_so3(-v), exp_so3(v).T, atol=1e-12)


def test_exp_so3_small_angle_branch_is_continuous():
    # values straddling the series threshold must agree to tight tolerance
    for scale in (0.9e-8, 1.1e-8):
        v = np.array([1.0, -2.0, 0.5])
        v *= scale / np.linalg.norm(v)
        K = hat(v)
        series = np.eye(3) + K + K @ K / 2.0
        assert np.allclose(exp_so3(v), series, atol=1e-15)


# --- Rodrigues entry points ---------------------------------------------------

def test_rod_matches_quoted_uav_initial_orientation():
    q = np.array([0.8253, 0.3260, 0.3260, 0.3260])
    assert np.allclose(rod(1.2, [1.0, 1.0, 1.0]), rod_q(q), atol=1e-4)


def test_rod_matches_quoted_satellite_initial_orientation():
    q = np.array([0.4085, 0.5270, 0.5270, 0.5270])
    assert np.allclose(rod(2.3, [1.0, 1.0, 1.0]), rod_q(q), atol=1e-4)


def test_rod_zero_angle_is_identity():
    assert np.allclose(rod(0.0, [0.3, -0.1, 0.9]), np.eye(3), atol=1e-15)


def test_rod_rejects_zero_axis_with_nonzero_angle():
    with pytest.raises(ValueError):
        rod(0.5, [0.0, 0.0, 0.0])


def test_rod_q_double_cover():
    q = random_unit_quat(RNG)
    assert np.array_equal(rod_q(q), rod_q(-q))


def test_rod_equals_exp_of_scaled_axis():
    axis = np.array([2.0, -1.0, 0.5])
    angle = 0.7
    expected = exp_so3(angle * axis / np.linalg.norm(axis))
    assert np.allclose(rod(angle, axis), expected, atol=1e-14)


# --- quaternion conversions ----------------------------------------------------

def test_quat_to_rot_identity():
    assert np.array_equal(quat_to_rot([1.0, 0.0, 0.0, 0.0]), np.eye(3))


def test_quaternion_rotation_round_trip_on_random_samples():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(1000):
        q = random_unit_quat(rng)
        R = quat_to_rot(q)
        q2 = rot_to_quat(R)
        worst = max(worst, float(np.max(np.abs(quat_to_rot(q2) - R))))
        assert q2[0] >= 0.0
    assert worst < 1e-9


def test_rot_to_quat_canonicalizes_near_half_turn():
    # largest-pivot branch: rotation by pi about x has trace -1
    R = rod(np.pi, [1.0, 0.0, 0.0])
    q = rot_to_quat(R)
    assert q[0] >= 0.0
    assert np.allclose(quat_to_rot(q), R, atol=1e-9)


def test_quat_multiply_inverse_gives_identity():
    q = random_unit_quat(RNG)
    e = quat_multiply(q, quat_conjugate(q))
    assert np.allclose(e, [1.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_quat_multiply_is_rotation_composition():
    for _ in range(20):
        q1 = random_unit_quat(RNG)
        q2 = random_unit_quat(RNG)
        expected = quat_to_rot(q1) @ quat_to_rot(q2)
        assert np.allclose(quat_to_rot(quat_multiply(q1, q2)), expected,
                           atol=1e-9)


def test_quat_normalize_returns_unit_norm():
    q = quat_normalize([2.0, 0.0, 0.0, 0.0])
    assert np.array_equal(q, [1.0, 0.0, 0.0, 0.0])
    q = quat_normalize(RNG.standard_normal(4))
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12


def test_quat_normalize_rejects_near_zero_vector():
    with pytest.raises(ValueError):
        quat_normalize([1e-10, 0.0, 0.0, 0.0])


# --- kinematics matrix ----------------------------------------------------------

def test_omega_matrix_zero_rate():
    assert np.array_equal(omega_matrix([0.0, 0.0, 0.0]), np.zeros((4, 4)))


def test_omega_matrix_structure():
    w = np.array([0.3, -1.1, 0.7])
    M = omega_matrix(w)
    expected = np.zeros((4, 4))
    expected[0, 1:] = -w
    expected[1:, 0] = w
    expected[1:, 1:] = -hat(w)
    assert np.array_equal(M, 0.5 * expected)


def test_omega_matrix_skew_symmetry():
    for _ in range(10):
        M = omega_matrix(RNG.standard_normal(3))
        assert np.max(np.abs(M + M.T)) == 0.0


def test_omega_matrix_preserves_quaternion_norm():
    # d/dt ||q||^2 = 2 q^T M(w) q must vanish identically
    for _ in range(20):
        q = random_unit_quat(RNG)
        M = omega_matrix(RNG.standard_normal(3))
        assert abs(q @ (M @ q)) < 1e-15
