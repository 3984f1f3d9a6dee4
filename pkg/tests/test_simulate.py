import numpy as np
import pytest
from scipy.linalg import expm

from lipcodesign.codesign import solve_design_certificate
from lipcodesign.exceptions import DivergenceError
from lipcodesign.manipulator import X0
from lipcodesign.plant import PlantFamily
from lipcodesign.simulate import (
    DisturbanceSignal,
    Trajectory,
    default_horizon,
    integrate,
    l2_output_cost,
    verify_trace_bound,
)

from conftest import random_hurwitz

REFERENCE_D_STAR = np.array([0.06])
REFERENCE_K_STAR = np.array([[-9.37, -1.32, 4.46, -1.145]])


def linear(A, B_w=None, C=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B_w = np.ones((n, 1)) if B_w is None else np.atleast_2d(B_w)
    C = np.eye(n) if C is None else np.atleast_2d(C)
    return PlantFamily(A0=A, B=np.zeros((n, 1)), B_w=B_w, C=C,
                       D=np.zeros((C.shape[0], 1)), d_lower=[0.0], d_upper=[1.0])


def rk4_error(A, x0, t_end, dt):
    traj = integrate(linear(A), [0.5], np.zeros((1, len(x0))), x0, t_end=t_end, dt=dt)
    return np.linalg.norm(traj.states[-1] - expm(A * t_end) @ x0)


class TestIntegrate:
    def test_scalar_decay(self):
        traj = integrate(linear([[-1.0]]), [0.5], [[0.0]], [1.0], t_end=1.0, dt=1e-3)
        assert traj.states[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-8)
        assert len(traj.times) == 1001
        np.testing.assert_allclose(np.diff(traj.times), 1e-3, atol=1e-12)

    def test_expm_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            A = random_hurwitz(rng, n, shift=0.1)
            x0 = rng.normal(size=n)
            assert rk4_error(A, x0, 2.0, 1e-3) < 1e-7

    def test_order_ratio(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            A = random_hurwitz(rng, n, shift=0.5)
            A *= 4.0 / np.abs(np.linalg.eigvals(A)).max()
            x0 = rng.normal(size=n)
            ratio = rk4_error(A, x0, 1.0, 0.02) / rk4_error(A, x0, 1.0, 0.01)
            assert 8 <= ratio <= 32

    def test_constant_disturbance_window(self):
        plant = linear([[-1.0]])
        sig = DisturbanceSignal.constant(1.0, 0.0, 1.0)
        traj = integrate(plant, [0.5], [[0.0]], [0.0], sig, t_end=3.0, dt=1e-3)
        assert traj.disturbance[0, 0] == 1.0 and traj.disturbance[-1, 0] == 0.0
        x1 = 1 - np.exp(-1.0)
        # the step ending at the switch-off samples w = 0, so accuracy is O(dt) there
        assert traj.states[1000, 0] == pytest.approx(x1, abs=1e-3)
        assert traj.states[-1, 0] == pytest.approx(x1 * np.exp(-2.0), abs=1e-3)

    def test_canonical_jump(self):
        plant = linear(-np.eye(2), B_w=[[1.0, 0.0], [0.0, 2.0]])
        traj = integrate(plant, [0.5], np.zeros((1, 2)), np.zeros(2),
                         DisturbanceSignal.canonical_initial(1), t_end=0.1, dt=0.01)
        np.testing.assert_array_equal(traj.states[0], [0.0, 2.0])
        np.testing.assert_array_equal(traj.disturbance, 0.0)

    def test_recorded_signals(self, manipulator):
        K = REFERENCE_K_STAR
        traj = integrate(manipulator, REFERENCE_D_STAR, K, X0, t_end=0.1, dt=1e-3)
        np.testing.assert_allclose(traj.inputs, traj.states @ K.T)
        np.testing.assert_allclose(traj.outputs, traj.states @ (manipulator.C + manipulator.D @ K).T)

    def test_manipulator_regression(self, manipulator):
        sig = DisturbanceSignal.constant(1.0, 0.0, 4.0)
        traj = integrate(manipulator, REFERENCE_D_STAR, REFERENCE_K_STAR, X0, sig, t_end=10.0)
        assert np.abs(traj.states[-1]).max() < 0.05

    def test_divergence(self):
        with pytest.raises(DivergenceError) as exc:
            integrate(linear([[5.0]]), [0.5], [[0.0]], [1.0], t_end=10.0, dt=1e-2)
        assert 0 < exc.value.time < 10

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            integrate(linear([[-1.0]]), [0.5], [[0.0]], [1.0], t_end=1e-4, dt=1e-3)

    def test_truncation(self):
        traj = integrate(linear([[-5.0]]), [0.5], [[0.0]], [1.0], t_end=50.0, dt=1e-2,
                         truncate=True)
        assert traj.truncated and traj.times[-1] < 50.0


class TestSignals:
    def test_invalid_window(self):
        with pytest.raises(ValueError):
            DisturbanceSignal.constant(1.0, 2.0, 1.0)

    def test_direction_range(self):
        with pytest.raises(ValueError):
            DisturbanceSignal.canonical_initial(3).initial_jump(np.eye(2))

    def test_vector_value(self):
        np.testing.assert_array_equal(DisturbanceSignal.constant([1.0, 2.0])(0.0, 2), [1.0, 2.0])


class TestCost:
    def test_zero(self):
        t = np.linspace(0, 1, 11)
        traj = Trajectory(t, np.zeros((11, 1)), np.zeros((11, 1)), np.zeros((11, 1)),
                          np.zeros((11, 1)))
        assert l2_output_cost(traj) == 0.0

    def test_exponential(self):
        traj = integrate(linear([[-1.0]]), [0.5], [[0.0]], [1.0], t_end=10.0, dt=1e-3)
        assert l2_output_cost(traj) == pytest.approx(0.5 * (1 - np.exp(-20.0)), abs=1e-5)

    def test_richardson(self):
        exact = 0.5 * (1 - np.exp(-20.0))
        errs = []
        for dt in (2e-3, 1e-3):
            traj = integrate(linear([[-1.0]]), [0.5], [[0.0]], [1.0], t_end=10.0, dt=dt)
            errs.append(abs(l2_output_cost(traj) - exact))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


class TestTraceBound:
    def test_scalar(self):
        plant = linear([[-1.0]])
        P = solve_design_certificate(plant, [0.5], [[0.0]], 1.0)
        assert P.P[0, 0] == pytest.approx(1.0, abs=1e-12)
        rep = verify_trace_bound(plant, [0.5], [[0.0]], P, mu=1.0)
        assert rep.passed
        assert rep.bound == pytest.approx(1.0)
        assert rep.total_cost == pytest.approx(0.5, abs=1e-5)

    def test_zero_disturbance_matrix(self):
        plant = linear([[-1.0]], B_w=[[0.0]])
        P = solve_design_certificate(plant, [0.5], [[0.0]], 1.0)
        rep = verify_trace_bound(plant, [0.5], [[0.0]], P, mu=1.0)
        assert rep.passed and rep.total_cost == 0.0 and rep.bound == 0.0

    def test_optimized_manipulator(self, manipulator_run):
        rep = manipulator_run
        d, K = rep.final_d, rep.final_K_bar
        out = verify_trace_bound(rep.plant_bar, d, K, rep.final_P, rep.mu)
        assert out.passed, (out.total_cost, out.bound)

    def test_divergence_reported(self):
        plant = linear([[3.0]])
        rep = verify_trace_bound(plant, [0.5], [[0.0]], np.eye(1), t_end=20.0, dt=1e-2)
        assert not rep.passed and rep.witness == 0

    def test_horizon(self):
        assert default_horizon(-np.eye(2)) == pytest.approx(20.0)
        assert default_horizon(-0.01 * np.eye(2)) == 100.0


def test_lyapunov_decay(manipulator_run):
    rep = manipulator_run
    plant, d, K = rep.plant_bar, rep.final_d, rep.final_K_bar
    P = rep.final_P.P
    x0 = np.array([-1.0, 1.0, 1.0, -0.1])
    traj = integrate(plant, d, K, x0, t_end=10.0, dt=1e-3)
    V = np.einsum("ij,jk,ik->i", traj.states, P, traj.states)
    assert np.all(np.diff(V) <= 1e-6 * V[0])
