"""Lie-group layer: closed forms vs an independent matrix-exponential
oracle, round trips, group axioms, and edge behavior near the angle
singularities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from dynamap.errors import AngleSingularityError
from dynamap.se3 import (
    Pose,
    Twist,
    hat,
    rotation_angle,
    se3_adjoint,
    se3_exp,
    se3_left_jacobian,
    se3_log,
    se3_right_jacobian,
    so3_exp,
    so3_log,
    yaw_rotation,
)

# expm(se3_hat([0.1, -0.2, 0.3, 0.4, -0.5, 0.6])), frozen from scipy
EXPM_ORACLE = np.array(
    [
        [0.7140753634021542, -0.6196565105099437, -0.3257640010263893, 0.09411681849438483],
        [0.43216494552774976, 0.7562609655231478, -0.49122582574921, -0.22908593308474667],
        [0.550753879005022, 0.2099884782759191, 0.8078211458932512, 0.27968384343312125],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def se3_hat_matrix(xi):
    m = np.zeros((4, 4))
    m[:3, :3] = hat(xi[3:])
    m[:3, 3] = xi[:3]
    return m


def random_twists(seed, n, max_angle=3.0):
    rng = np.random.default_rng(seed)
    xi = np.empty((n, 6))
    xi[:, :3] = rng.uniform(-2.0, 2.0, (n, 3))
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    xi[:, 3:] = axes * rng.uniform(0.0, max_angle, (n, 1))[:, None].reshape(n, 1)
    return xi


def test_exp_matches_frozen_expm_oracle():
    pose = se3_exp(np.array([0.1, -0.2, 0.3, 0.4, -0.5, 0.6]))
    np.testing.assert_allclose(pose.as_matrix(), EXPM_ORACLE, atol=1e-14)


def test_exp_matches_expm_on_random_twists():
    for xi in random_twists(7, 50):
        np.testing.assert_allclose(
            se3_exp(xi).as_matrix(), expm(se3_hat_matrix(xi)), atol=1e-12
        )


def test_pure_translation_exp():
    pose = se3_exp(np.array([1.0, 2.0, 3.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(pose.translation, [1.0, 2.0, 3.0], atol=1e-15)


def test_log_exp_round_trip_bulk():
    for xi in random_twists(11, 500):
        back = se3_log(se3_exp(xi))
        assert np.max(np.abs(back - xi)) < 1e-9


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_round_trip_property(seed):
    xi = random_twists(seed, 1)[0]
    assert np.max(np.abs(se3_log(se3_exp(xi)) - xi)) < 1e-9


def test_small_angle_branch():
    xi = np.array([0.3, -0.1, 0.2, 1e-10, -2e-10, 5e-11])
    back = se3_log(se3_exp(xi))
    np.testing.assert_allclose(back, xi, atol=1e-15)
    # rotation part essentially identity but still orthonormal
    rot = so3_exp(xi[3:])
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-15)


def test_log_rejects_near_pi():
    rot = so3_exp(np.array([np.pi - 1e-9, 0.0, 0.0]))
    with pytest.raises(AngleSingularityError):
        so3_log(rot)
    with pytest.raises(AngleSingularityError):
        se3_log(Pose(rot, np.zeros(3)))


def test_log_accepts_just_below_margin():
    phi = np.array([0.0, np.pi - 2e-6, 0.0])
    back = so3_log(so3_exp(phi))
    np.testing.assert_allclose(back, phi, atol=1e-6)


def test_group_axioms():
    poses = [se3_exp(xi) for xi in random_twists(3, 30)]
    ident = Pose.identity()
    for a in poses[:10]:
        np.testing.assert_allclose(
            a.compose(a.inverse()).as_matrix(), np.eye(4), atol=1e-12
        )
        np.testing.assert_allclose(
            a.compose(ident).as_matrix(), a.as_matrix(), atol=1e-12
        )
    for a, b, c in zip(poses[:10], poses[10:20], poses[20:]):
        left = a.compose(b).compose(c).as_matrix()
        right = a.compose(b.compose(c)).as_matrix()
        np.testing.assert_allclose(left, right, atol=1e-12)


def test_rigidity_distances_preserved():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(40, 3))
    pose = se3_exp(random_twists(9, 1)[0])
    moved = pose.apply(pts)
    d0 = np.linalg.norm(pts[None, :, :] - pts[:, None, :], axis=-1)
    d1 = np.linalg.norm(moved[None, :, :] - moved[:, None, :], axis=-1)
    np.testing.assert_allclose(d0, d1, atol=1e-12)


def test_apply_matches_matrix_action():
    pose = se3_exp(np.array([0.4, 0.1, -0.2, 0.2, 0.3, -0.1]))
    p = np.array([0.5, -1.0, 2.0])
    hom = pose.as_matrix() @ np.append(p, 1.0)
    np.testing.assert_allclose(pose.apply(p), hom[:3], atol=1e-14)
    batch = np.stack([p, 2 * p, -p])
    np.testing.assert_allclose(pose.apply(batch)[0], hom[:3], atol=1e-14)


def test_adjoint_identity():
    # Ad(T) xi == log(T exp(xi) T^-1) for small xi
    pose = se3_exp(np.array([0.3, -0.2, 0.5, 0.3, 0.1, -0.4]))
    xi = np.array([0.02, 0.01, -0.03, 0.015, -0.01, 0.02])
    conjugated = pose.compose(se3_exp(xi)).compose(pose.inverse())
    np.testing.assert_allclose(se3_log(conjugated), se3_adjoint(pose) @ xi, atol=1e-9)


def test_left_jacobian_matches_finite_difference():
    # exp(xi + du) ~ exp(Jl(xi) du) exp(xi)
    xi = np.array([0.4, -0.3, 0.2, 0.5, 0.2, -0.3])
    jl = se3_left_jacobian(xi)
    eps = 1e-7
    num = np.zeros((6, 6))
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        plus = se3_exp(xi + d).compose(se3_exp(xi).inverse())
        minus = se3_exp(xi - d).compose(se3_exp(xi).inverse())
        num[:, k] = (se3_log(plus) - se3_log(minus)) / (2 * eps)
    np.testing.assert_allclose(jl, num, atol=1e-6)


def test_right_jacobian_matches_finite_difference():
    xi = np.array([-0.2, 0.4, 0.1, -0.3, 0.25, 0.15])
    jr = se3_right_jacobian(xi)
    eps = 1e-7
    num = np.zeros((6, 6))
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        plus = se3_exp(xi).inverse().compose(se3_exp(xi + d))
        minus = se3_exp(xi).inverse().compose(se3_exp(xi - d))
        num[:, k] = (se3_log(plus) - se3_log(minus)) / (2 * eps)
    np.testing.assert_allclose(jr, num, atol=1e-6)


def test_twist_vector_round_trip():
    tw = Twist(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]))
    back = Twist.from_vector(tw.as_vector())
    np.testing.assert_array_equal(back.rho, tw.rho)
    np.testing.assert_array_equal(back.phi, tw.phi)


def test_yaw_rotation_angle():
    assert rotation_angle(yaw_rotation(np.radians(10))) == pytest.approx(
        np.radians(10), abs=1e-12
    )
