import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.nav.errors import DivergenceError
from src.nav.filter import (
    CorrectionTerms, FilterGains, FilterState, QuatFilterState, continuous_rhs, corrections,
    error_vector, predict, quat_predict, quat_step, quat_step_with_info, quat_update,
    sigma_update, step, step_with_info, update, zero_corrections,
)
from src.nav.liegroup import NavState, quat_to_rot, rot_to_quat, rot_z, skew
from src.nav.measurements import (
    GRAVITY, Aggregates, ImuSample, NoiseSpec, aggregate, observe_features, sample_landmarks,
    synth_trajectory,
)
from src.nav.ppf import PpfConfig, PpfEval, transform

NO_NOISE = NoiseSpec(std_omega=0.0, std_accel=0.0, std_feature=0.0)
ZERO_G = np.zeros(3)
GAINS = FilterGains()
PPF = PpfConfig(xi0=(1.0, 3.0, 3.0, 3.0), delta=(1.5, 2.0, 2.0, 2.0))


def _imu(omega=(0.0, 0.0, 0.0), a=(0.0, 0.0, 0.0), t=0.0):
    return ImuSample(t, np.asarray(omega, dtype=float), np.asarray(a, dtype=float))


def _agg(MRt=None, RtPe=(0.0, 0.0, 0.0)):
    M = np.diag([2.0, 3.0, 4.0])
    return Aggregates(p_c=np.array([0.5, -1.0, 2.0]), s_T=1.0, M=M,
                      MRt=M if MRt is None else MRt, RtPe=np.asarray(RtPe, dtype=float), count=10)


def _ppf_eval(E_R=0.0, Delta_R=1.0):
    return PpfEval(e=np.zeros(4), xi=np.ones(4), E=np.array([E_R, 0.0, 0.0, 0.0]),
                   Delta=np.array([Delta_R, 1.0, 1.0, 1.0]), inflated=np.zeros(4, dtype=bool))


@pytest.fixture
def landmarks(rng):
    feats = sample_landmarks(30, 10.0, (0.0, 0.0, 1.5), rng)
    return {f.id: f for f in feats}


class Test_error_vector:
    def test_zero_at_equilibrium(self):
        np.testing.assert_array_equal(error_vector(_agg()), np.zeros(4))

    def test_attitude_component(self):
        R_t = rot_z(np.pi / 2)
        M = np.diag([2.0, 3.0, 4.0])
        e = error_vector(_agg(MRt=M @ R_t))
        assert e[0] == pytest.approx(0.25 * np.trace(M @ (np.eye(3) - R_t)))

    def test_position_component(self):
        np.testing.assert_array_equal(error_vector(_agg(RtPe=[1.0, 0.0, 0.0]))[1:], [1.0, 0.0, 0.0])

    def test_clipped_at_zero(self):
        M = np.diag([2.0, 3.0, 4.0])
        assert error_vector(_agg(MRt=M + 1e-9 * np.eye(3)))[0] == 0.0


class Test_corrections:
    def test_zero_error(self):
        ev = transform(np.zeros(4), np.ones(4), np.full(4, 2.0), 0.01)
        w = corrections(_agg(), ev, np.zeros(3), np.eye(3), gains=GAINS)
        np.testing.assert_array_equal(w.w_omega, np.zeros(3))
        np.testing.assert_array_equal(w.w_v, np.zeros(3))
        np.testing.assert_array_equal(w.w_a, -GRAVITY)
        assert w.k_R == pytest.approx(GAINS.gamma_sigma * (2.0 / 8.0) * ev.Delta_R ** 2)

    def test_hand_built_attitude_term(self):
        M = np.diag([2.0, 3.0, 4.0])
        agg = _agg(MRt=M + skew([0.1, 0.0, 0.0]))
        w = corrections(agg, _ppf_eval(E_R=0.0, Delta_R=1.0), np.zeros(3), np.eye(3), gains=GAINS)
        np.testing.assert_allclose(w.w_omega, [-0.3, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(w.upsilon, [0.1, 0.0, 0.0], atol=1e-15)

    def test_adaptive_term_needs_upsilon(self):
        w = corrections(_agg(), _ppf_eval(), np.array([5.0, 1.0, 2.0]), np.eye(3), gains=GAINS)
        np.testing.assert_array_equal(w.w_omega, np.zeros(3))

    def test_adaptive_term_sign(self):
        M = np.diag([2.0, 3.0, 4.0])
        agg = _agg(MRt=M + skew([0.1, 0.0, 0.0]))
        base = corrections(agg, _ppf_eval(), np.zeros(3), np.eye(3), gains=GAINS)
        adapt = corrections(agg, _ppf_eval(), np.array([1.0, 0.0, 0.0]), np.eye(3), gains=GAINS)
        # −(Δ_R/4)·(d+2)/(d+1)·Υ₁·σ̂₁ con d = 0
        assert adapt.w_omega[0] - base.w_omega[0] == pytest.approx(-0.25 * 2.0 * 0.1 * 1.0)

    def test_position_terms(self):
        ev = transform([0.0, 0.5, 0.0, 0.0], np.ones(4), np.full(4, 2.0), 0.01)
        w = corrections(_agg(RtPe=[0.5, 0.0, 0.0]), ev, np.zeros(3), np.eye(3), gains=GAINS)
        DE = ev.Delta[1] * ev.E[1]
        assert w.w_v[0] == pytest.approx(-(GAINS.k_v / GAINS.eps) * DE - GAINS.ell_P * 0.5)
        assert w.w_a[0] == pytest.approx(-GAINS.k_a * ((GAINS.k_v / GAINS.mu) * ev.Delta[1] + 1.0) * DE)
        assert w.w_a[2] == pytest.approx(-GRAVITY[2])


class Test_sigma_update:
    def test_zero(self):
        np.testing.assert_array_equal(sigma_update(np.zeros(3), 1.0, np.eye(3), np.zeros(3), GAINS, 0.005),
                                      np.zeros(3))

    def test_leak(self):
        s0 = np.array([1.0, 2.0, 3.0])
        dt = 0.005
        out = sigma_update(s0, 1.0, np.eye(3), np.zeros(3), GAINS, dt)
        np.testing.assert_allclose(out, (1.0 - dt * GAINS.k_sigma * GAINS.gamma_sigma) * s0)

    def test_drive_is_squared(self):
        out = sigma_update(np.zeros(3), 1.0, np.eye(3), np.array([1.0, 0.0, 0.0]), GAINS, 0.005)
        np.testing.assert_allclose(out, [0.005, 0.0, 0.0])
        out = sigma_update(np.zeros(3), 1.0, np.eye(3), np.array([-1.0, 0.0, 0.0]), GAINS, 0.005)
        np.testing.assert_allclose(out, [0.005, 0.0, 0.0])

    def test_dt_positive(self):
        with pytest.raises(ValueError):
            sigma_update(np.zeros(3), 1.0, np.eye(3), np.zeros(3), GAINS, 0.0)


class Test_predict:
    def test_constant_velocity(self):
        X = NavState(np.eye(3), np.zeros(3), np.array([1.0, 0.0, 0.0]))
        Y = predict(X, _imu(), 0.1, gravity=ZERO_G)
        np.testing.assert_allclose(Y.P, [0.1, 0.0, 0.0], atol=1e-15)
        np.testing.assert_array_equal(Y.V, X.V)
        np.testing.assert_allclose(Y.R, np.eye(3), atol=1e-15)

    def test_default_applies_gravity(self):
        X = NavState(np.eye(3), np.zeros(3), np.array([1.0, 0.0, 0.0]))
        Y = predict(X, _imu(), 0.1)
        np.testing.assert_allclose(Y.V, X.V + GRAVITY * 0.1, atol=1e-14)
        np.testing.assert_allclose(Y.P, X.V * 0.1 + 0.5 * GRAVITY * 0.01, atol=1e-14)

    def test_body_rotation(self):
        R0 = Rotation.from_rotvec([0.3, 0.1, -0.2]).as_matrix()
        X = NavState(R0, np.zeros(3), np.zeros(3))
        Y = predict(X, _imu(omega=(0.0, 0.0, 2.0)), 0.05, gravity=ZERO_G)
        np.testing.assert_allclose(Y.R, R0 @ rot_z(0.1), atol=1e-14)

    def test_specific_force(self):
        X = NavState.identity()
        Y = predict(X, _imu(a=(1.0, 0.0, 0.0)), 0.1, gravity=ZERO_G)
        np.testing.assert_allclose(Y.V, [0.1, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(Y.P, [0.005, 0.0, 0.0], atol=1e-15)

    def test_free_fall(self):
        Y = predict(NavState.identity(), _imu(), 0.1)
        np.testing.assert_allclose(Y.V, GRAVITY * 0.1, atol=1e-14)
        np.testing.assert_allclose(Y.P, 0.5 * GRAVITY * 0.01, atol=1e-14)

    def test_hover_equilibrium(self):
        truth = synth_trajectory(0.0, "hover")
        Y = predict(truth.X, _imu(a=truth.a), 0.005)
        np.testing.assert_allclose(Y.P, truth.X.P, atol=1e-13)
        np.testing.assert_allclose(Y.V, np.zeros(3), atol=1e-13)

    def test_matches_true_dynamics(self):
        spec = "figure8"
        t0, dt = 2.0, 0.002
        a, b = synth_trajectory(t0, spec), synth_trajectory(t0 + dt, spec)
        Y = predict(a.X, _imu(omega=a.omega, a=a.a), dt)
        np.testing.assert_allclose(Y.P, b.X.P, atol=1e-5)
        np.testing.assert_allclose(Y.V, b.X.V, atol=1e-3)

    def test_dt_positive(self):
        with pytest.raises(ValueError):
            predict(NavState.identity(), _imu(), 0.0)


class Test_update:
    def test_zero_error_correction_is_identity(self, rng):
        X = NavState(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3), rng.normal(size=3))
        Y = update(X, zero_corrections(), 0.005)
        np.testing.assert_allclose(Y.matrix(), X.matrix(), atol=1e-14)

    def test_literal_gravity_free_form(self, rng):
        X = NavState(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3), rng.normal(size=3))
        Y = update(X, zero_corrections(ZERO_G), 0.005, gravity=ZERO_G)
        np.testing.assert_allclose(Y.matrix(), X.matrix(), atol=1e-14)

    def test_left_rotation(self, rng):
        R0 = Rotation.random(random_state=rng).as_matrix()
        X = NavState(R0, np.zeros(3), np.zeros(3))
        z = np.zeros(3)
        w = CorrectionTerms(np.array([0.0, 0.0, 0.4]), z, z, 0.0, z)
        Y = update(X, w, 0.01, gravity=ZERO_G)
        np.testing.assert_allclose(Y.R, rot_z(-0.004) @ R0, atol=1e-14)

    def test_velocity_slot(self):
        z = np.zeros(3)
        w = CorrectionTerms(z, z, np.array([1.0, 0.0, 0.0]) - GRAVITY, 0.0, z)
        Y = update(NavState.identity(), w, 0.1)
        np.testing.assert_allclose(Y.V, [-0.1, 0.0, 0.0], atol=1e-15)


class Test_step:
    def test_no_frame_is_prediction(self, landmarks):
        state = FilterState(NavState.identity(), np.array([0.1, 0.2, 0.3]))
        imu = _imu(omega=(0.1, 0.0, 0.0), a=(0.0, 0.0, 9.81))
        new, info = step_with_info(state, imu, None, landmarks, PPF, GAINS, 0.005, 0.005)
        assert not info.updated
        assert info.reason == "no-frame"
        np.testing.assert_array_equal(new.sigma_hat, state.sigma_hat)
        np.testing.assert_allclose(new.X_hat.matrix(), predict(state.X_hat, imu, 0.005).matrix())

    def test_too_few_landmarks_is_prediction(self, landmarks):
        truth = synth_trajectory(0.05, "circle")
        frame = observe_features(truth.X, list(landmarks.values())[:2], NO_NOISE)
        state = FilterState(truth.X, np.zeros(3))
        new, info = step_with_info(state, _imu(truth.omega, truth.a), frame, landmarks, PPF, GAINS, 0.05, 0.005)
        assert not info.updated
        assert "< 3" in info.reason

    def test_equilibrium(self, landmarks):
        spec = "circle"
        dt = 0.005
        state = FilterState(synth_trajectory(0.0, spec).X, np.zeros(3))
        for k in range(1, 201):
            truth = synth_trajectory(k * dt, spec)
            frame = observe_features(truth.X, list(landmarks.values()), NO_NOISE, weight=1 / 30)
            state, info = step_with_info(state, _imu(truth.omega, truth.a), frame, landmarks, PPF, GAINS,
                                         k * dt, dt)
            assert info.updated
        assert np.abs(state.X_hat.R - truth.X.R).max() < 1e-9
        assert np.abs(state.X_hat.P - truth.X.P).max() < 1e-9
        assert np.abs(state.sigma_hat).max() < 1e-9

    def test_error_decreases(self, landmarks):
        spec = "circle"
        dt = 0.005
        t0 = synth_trajectory(0.0, spec).X
        X0 = NavState(Rotation.from_rotvec([0.3, -0.2, 0.5]).as_matrix() @ t0.R, t0.P + [0.5, -0.5, 0.3], t0.V)
        state = FilterState(X0, np.zeros(3))
        first = None
        for k in range(1, 1001):
            truth = synth_trajectory(k * dt, spec)
            frame = observe_features(truth.X, list(landmarks.values()), NO_NOISE, weight=1 / 30)
            state, info = step_with_info(state, _imu(truth.omega, truth.a), frame, landmarks, PPF, GAINS,
                                         k * dt, dt)
            first = info.e if first is None else first
        last = info.e
        assert last[0] < 0.2 * first[0]
        assert np.linalg.norm(last[1:]) < 0.5 * np.linalg.norm(first[1:])
        assert np.all(state.sigma_hat >= -1e-9)

    def test_divergence_limit(self, landmarks):
        truth = synth_trajectory(0.05, "circle")
        frame = observe_features(truth.X, list(landmarks.values()), NO_NOISE)
        far = NavState(truth.X.R, truth.X.P + 50.0, truth.X.V)
        with pytest.raises(DivergenceError):
            step_with_info(FilterState(far, np.zeros(3)), _imu(truth.omega, truth.a), frame, landmarks,
                           PPF, GAINS, 0.05, 0.005, divergence_limit=10.0)

    def test_auto_envelope_resolved_on_first_frame(self, landmarks):
        truth = synth_trajectory(0.05, "circle")
        frame = observe_features(truth.X, list(landmarks.values()), NO_NOISE, weight=1 / 30)
        state = FilterState(NavState.identity(), np.zeros(3))
        _, info = step_with_info(state, _imu(truth.omega, truth.a), frame, landmarks, PpfConfig(),
                                 GAINS, 0.05, 0.005)
        assert info.ppf_cfg.resolved
        assert not info.ppf.inflated.any()

    def test_step_wrapper(self, landmarks):
        state = FilterState(NavState.identity(), np.zeros(3))
        a = step(state, _imu(), None, landmarks, PPF, GAINS, 0.005, 0.005)
        b, _ = step_with_info(state, _imu(), None, landmarks, PPF, GAINS, 0.005, 0.005)
        np.testing.assert_array_equal(a.X_hat.matrix(), b.X_hat.matrix())


class Test_quaternion_form:
    def test_identity_without_inputs(self, landmarks):
        q = QuatFilterState(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), np.zeros(3))
        out = quat_step(q, _imu(), None, landmarks, PPF, GAINS, 0.005, 0.005)
        np.testing.assert_array_equal(out.Q, [1.0, 0.0, 0.0, 0.0])
        assert np.linalg.norm(out.Q) == pytest.approx(1.0, abs=1e-12)

    def test_predict_matches_matrix(self, rng):
        R0 = Rotation.random(random_state=rng).as_matrix()
        X = NavState(R0, rng.normal(size=3), rng.normal(size=3))
        imu = _imu(omega=rng.normal(size=3), a=rng.normal(size=3) * 5.0)
        Y = predict(X, imu, 0.01)
        q = quat_predict(QuatFilterState(rot_to_quat(R0), X.P, X.V), imu, 0.01)
        np.testing.assert_allclose(quat_to_rot(q.Q), Y.R, atol=1e-12)
        np.testing.assert_allclose(q.P, Y.P, atol=1e-12)
        np.testing.assert_allclose(q.V, Y.V, atol=1e-12)

    @pytest.mark.parametrize("scale", [1.0, 1e-4])
    def test_update_matches_matrix(self, rng, scale):
        R0 = Rotation.random(random_state=rng).as_matrix()
        X = NavState(R0, rng.normal(size=3), rng.normal(size=3))
        w = CorrectionTerms(scale * rng.normal(size=3), rng.normal(size=3), rng.normal(size=3), 0.0, np.zeros(3))
        Y = update(X, w, 0.01)
        q = quat_update(QuatFilterState(rot_to_quat(R0), X.P, X.V), w, 0.01)
        np.testing.assert_allclose(quat_to_rot(q.Q), Y.R, atol=1e-12)
        np.testing.assert_allclose(q.P, Y.P, atol=1e-12)
        np.testing.assert_allclose(q.V, Y.V, atol=1e-12)

    def test_rejects_non_unit(self, landmarks):
        q = QuatFilterState(np.array([2.0, 0.0, 0.0, 0.0]), np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            quat_step(q, _imu(), None, landmarks, PPF, GAINS, 0.005, 0.005)

    def test_step_tracks_matrix_form(self, landmarks):
        spec = "figure8"
        dt = 0.005
        rng = np.random.default_rng(7)
        t0 = synth_trajectory(0.0, spec).X
        X0 = NavState(Rotation.from_rotvec([0.2, 0.1, -0.4]).as_matrix() @ t0.R, t0.P + 0.3, t0.V)
        m = FilterState(X0, np.zeros(3))
        q = QuatFilterState(rot_to_quat(X0.R), X0.P, X0.V, np.zeros(3))
        for k in range(1, 401):
            truth = synth_trajectory(k * dt, spec)
            imu = _imu(truth.omega + rng.normal(scale=0.1, size=3), truth.a + rng.normal(scale=0.1, size=3))
            frame = None
            if k % 10 == 0:
                frame = observe_features(truth.X, list(landmarks.values()), NoiseSpec(), rng, weight=1 / 30)
            m = step(m, imu, frame, landmarks, PPF, GAINS, k * dt, dt)
            q, info = quat_step_with_info(q, imu, frame, landmarks, PPF, GAINS, k * dt, dt)
            assert np.linalg.norm(q.Q) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(q.R, m.X_hat.R, atol=1e-9)
        np.testing.assert_allclose(q.P, m.X_hat.P, atol=1e-9)
        np.testing.assert_allclose(q.V, m.X_hat.V, atol=1e-9)
        np.testing.assert_allclose(q.sigma_hat, m.sigma_hat, atol=1e-9)


class Test_continuous_rhs:
    def test_true_dynamics_without_corrections(self):
        truth = synth_trajectory(1.3, "figure8")
        d = continuous_rhs(FilterState(truth.X, np.zeros(3)), _imu(truth.omega, truth.a), None, None, GAINS)
        np.testing.assert_allclose(d.R_dot, truth.X.R @ skew(truth.omega), atol=1e-14)
        np.testing.assert_allclose(d.P_dot, truth.X.V, atol=1e-14)
        np.testing.assert_allclose(d.V_dot, truth.X.R @ truth.a + GRAVITY, atol=1e-13)
        np.testing.assert_array_equal(d.sigma_dot, np.zeros(3))

    def test_zero_error_aggregates(self, landmarks):
        truth = synth_trajectory(0.7, "circle")
        frame = observe_features(truth.X, list(landmarks.values()), NO_NOISE, weight=1 / 30)
        agg = aggregate(landmarks, frame, truth.X.R, truth.X.P)
        ev = transform(error_vector(agg), np.ones(4), np.full(4, 2.0), 0.01)
        d = continuous_rhs(FilterState(truth.X, np.zeros(3)), _imu(truth.omega, truth.a), agg, ev, GAINS)
        np.testing.assert_allclose(d.V_dot, truth.X.R @ truth.a + GRAVITY, atol=1e-9)
        np.testing.assert_allclose(d.P_dot, truth.X.V, atol=1e-9)
