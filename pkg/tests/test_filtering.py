"""EKF layer: exact transition Jacobian against a finite-difference oracle,
chi-square NIS consistency on a calibrated synthetic run, noiseless
identifiability, and scripted confidence-gate transitions."""

import numpy as np
import pytest

from dynamap.errors import DegenerateInnovationError
from dynamap.filtering import (
    ConfidenceGate,
    NoiseModel,
    UpdateReport,
    filter_init,
    gate_step,
    predict,
    predict_horizon,
    transition_jacobian,
    update,
)
from dynamap.se3 import Pose, Twist, se3_exp, se3_log, yaw_rotation


def propagation_error_map(pose, twist_vec, delta, dt=1.0):
    """Independent definition of the discrete error propagation used by the
    filter: perturb, propagate nominal and perturbed, re-express the error."""
    nominal_next = pose.compose(se3_exp(twist_vec * dt))
    perturbed_pose = pose.compose(se3_exp(delta[:6]))
    perturbed_twist = twist_vec + delta[6:]
    perturbed_next = perturbed_pose.compose(se3_exp(perturbed_twist * dt))
    xi_err = se3_log(nominal_next.inverse().compose(perturbed_next))
    return np.concatenate([xi_err, delta[6:]])


def numeric_transition_jacobian(pose, twist_vec, dt=1.0, eps=1e-6):
    jac = np.zeros((12, 12))
    for k in range(12):
        d = np.zeros(12)
        d[k] = eps
        plus = propagation_error_map(pose, twist_vec, d, dt)
        minus = propagation_error_map(pose, twist_vec, -d, dt)
        jac[:, k] = (plus - minus) / (2 * eps)
    return jac


def random_state(rng):
    xi = rng.uniform(-1.0, 1.0, 6)
    pose = se3_exp(xi)
    twist = rng.uniform(-0.3, 0.3, 6)
    return pose, twist


def test_transition_jacobian_matches_finite_differences():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(25):
        pose, twist = random_state(rng)
        f = transition_jacobian(Twist.from_vector(twist), 1.0)
        num = numeric_transition_jacobian(pose, twist)
        scale = max(1.0, np.abs(num).max())
        worst = max(worst, np.abs(f - num).max() / scale)
    assert worst < 1e-5


def test_predict_moves_pose_along_twist():
    noise = NoiseModel()
    state = filter_init(Pose.identity())
    state.twist = Twist(np.array([0.05, 0.0, 0.0]), np.zeros(3))
    for _ in range(10):
        state = predict(state, noise)
    np.testing.assert_allclose(state.pose.translation, [0.5, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(state.pose.rotation, np.eye(3), atol=1e-12)


def test_predict_grows_uncertainty():
    noise = NoiseModel()
    state = filter_init(Pose.identity())
    traces = []
    for _ in range(5):
        state = predict(state, noise)
        traces.append(np.trace(state.cov))
    assert all(b > a for a, b in zip(traces, traces[1:]))
    # covariance stays symmetric PSD
    np.testing.assert_allclose(state.cov, state.cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(state.cov).min() > 0


def test_update_pulls_pose_toward_measurement():
    noise = NoiseModel()
    state = filter_init(Pose.identity())
    meas = se3_exp(np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.05]))
    state = predict(state, noise)
    before = np.linalg.norm(se3_log(state.pose.inverse().compose(meas)))
    state, report = update(state, meas, noise)
    after = np.linalg.norm(se3_log(state.pose.inverse().compose(meas)))
    assert after < before
    assert report.nis > 0
    assert report.uncertainty == pytest.approx(np.trace(state.cov))
    np.testing.assert_allclose(state.cov, state.cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(state.cov).min() > -1e-12


def run_tracking(steps, twist_vec, seed=0, noisy=True, noise=None):
    """Nominally constant-twist truth; when noisy, the truth diffuses with
    the filter's own process noise (calibrated run) and measurements are
    drawn from R. Returns per-step NIS and pose errors."""
    noise = noise or NoiseModel()
    rng = np.random.default_rng(seed)
    chol_r = np.linalg.cholesky(noise.r_meas)
    chol_qp = np.linalg.cholesky(noise.q_pose)
    chol_qt = np.linalg.cholesky(noise.q_twist)
    truth = Pose.identity()
    twist_true = np.array(twist_vec, dtype=float)
    state = filter_init(truth)
    nis_values, pose_errors = [], []
    for _ in range(steps):
        truth = truth.compose(se3_exp(twist_true))
        meas = truth
        if noisy:
            truth = truth.compose(se3_exp(chol_qp @ rng.standard_normal(6)))
            twist_true = twist_true + chol_qt @ rng.standard_normal(6)
            meas = truth.compose(se3_exp(chol_r @ rng.standard_normal(6)))
        state = predict(state, noise)
        state, report = update(state, meas, noise)
        nis_values.append(report.nis)
        pose_errors.append(
            np.linalg.norm(se3_log(truth.inverse().compose(state.pose)))
        )
    return np.array(nis_values), np.array(pose_errors)


def test_nis_chi_square_consistency():
    twist = np.array([0.03, 0.01, 0.0, 0.0, 0.0, 0.05])
    nis, _ = run_tracking(500, twist, seed=3)
    assert 4.5 < nis.mean() < 7.5  # six degrees of freedom


def test_noiseless_identifiability():
    twist = np.array([0.05, 0.0, 0.0, 0.0, 0.0, 0.1])
    _, errors = run_tracking(300, twist, noisy=False)
    assert errors[-1] < 1e-6
    assert errors[-100:].max() < 1e-6


def test_update_rejects_degenerate_innovation():
    noise = NoiseModel(r_meas=np.zeros((6, 6)))
    state = filter_init(Pose.identity(), cov0=np.zeros((12, 12)))
    with pytest.raises(DegenerateInnovationError):
        update(state, Pose.identity(), noise)


def test_horizon_indexing_and_lengths():
    state = filter_init(Pose.identity())
    state.twist = Twist(np.array([0.05, 0.0, 0.0]), np.zeros(3))
    horizon = predict_horizon(state, 60)
    assert len(horizon) == 60
    # entry for offset 10 (1-based) carries 10 steps of motion
    np.testing.assert_allclose(horizon[9].translation, [0.5, 0.0, 0.0], atol=1e-12)

    state.twist = Twist(np.zeros(3), np.array([0.0, 0.0, np.radians(10)]))
    horizon = predict_horizon(state, 60)
    np.testing.assert_allclose(horizon[8].rotation, yaw_rotation(np.radians(90)), atol=1e-12)

    state.twist = Twist.zero()
    for pose in predict_horizon(state, 5):
        np.testing.assert_allclose(pose.as_matrix(), np.eye(4), atol=0)


def qual_report(nis=0.6, unc=0.05):
    # nis is the raw 6-dof quadratic form; the gate compares nis/6
    return UpdateReport(np.zeros(6), nis, unc)


def test_gate_scripted_confirmation():
    gate = ConfidenceGate()
    for k in range(3):
        gate = gate_step(gate, qual_report())
        assert not gate.confident, f"confident too early at step {k}"
    gate = gate_step(gate, qual_report())
    assert gate.confident


def test_gate_streak_resets_on_any_failure():
    gate = ConfidenceGate()
    for _ in range(3):
        gate = gate_step(gate, qual_report())
    gate = gate_step(gate, qual_report(unc=0.5))  # uncertainty breach resets
    assert not gate.confident and gate.pass_streak == 0
    for _ in range(4):
        gate = gate_step(gate, qual_report())
    assert gate.confident


def test_gate_reversion_needs_consecutive_nis_breaches():
    gate = ConfidenceGate(confident=True)
    for _ in range(3):
        gate = gate_step(gate, qual_report(nis=5.4))
        assert gate.confident
    gate = gate_step(gate, qual_report(nis=1.2))  # breaks the breach run
    assert gate.confident and gate.fail_streak == 0
    for _ in range(4):
        gate = gate_step(gate, qual_report(nis=5.4))
    assert not gate.confident


def test_gate_ignores_uncertainty_once_confident():
    # reversion is NIS-only by design: a trace spike alone never reverts
    gate = ConfidenceGate(confident=True)
    for _ in range(10):
        gate = gate_step(gate, qual_report(nis=0.6, unc=5.0))
    assert gate.confident
