import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arxform.core_sim import (
    ControllerModel,
    PlantModel,
    Trajectory,
    max_deviation,
    nominal_bound_M,
    simulate_closed_loop,
    sup_norm,
)
from arxform.errors import DimensionError, NonFiniteError
from arxform.observer_arx import implied_perturbation
from arxform.robot_bench import build_robot, nominal_run

from conftest import random_loop


def scalar_loop():
    plant = PlantModel(lambda x, u: 0.5 * x + u, lambda x: x, 1, 1, 1)
    ctrl = ControllerModel(lambda x, y: x, lambda x: np.zeros(1), 1, 1, 1)
    return plant, ctrl


def test_scalar_geometric_decay():
    plant, ctrl = scalar_loop()
    rec = simulate_closed_loop(plant, ctrl, [1.0], [0.0], 3)
    np.testing.assert_array_equal(rec.output_traj.samples[:, 0], [1.0, 0.5, 0.25])
    assert nominal_bound_M(rec) == 1.0


def test_linear_record_matches_matrix_iteration():
    lp, lc, xp0 = random_loop(3, n=3)
    T = 40
    rec = simulate_closed_loop(lp.to_model(), lc.to_model(), xp0, np.zeros(3), T)
    A, B, C, F, G, H = lp.A, lp.B, lp.C, lc.F, lc.G, lc.H
    Acl = np.block([[A, B @ H], [G @ C, F]])
    x = np.concatenate([xp0, np.zeros(3)])
    for t in range(T):
        np.testing.assert_allclose(rec.plant_traj[t], x[:3], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(rec.ctrl_state_traj[t], x[3:], rtol=1e-12, atol=1e-12)
        x = Acl @ x
    assert np.all(rec.perturbation_traj.samples == 0.0)


def test_robot_nominal_record():
    rec = nominal_run()
    assert rec.horizon == 300
    assert rec.output_traj[0][0] == -2.0
    M = nominal_bound_M(rec)
    assert np.isfinite(M)
    # frozen from the nominal simulation
    assert M == pytest.approx(37.0039325, rel=1e-9)


def test_sup_norm_examples():
    assert sup_norm(Trajectory(np.zeros((4, 2)))) == 0.0
    assert sup_norm(Trajectory(np.array([[1.0, -3.0], [2.0, 0.0]]))) == 3.0
    with pytest.raises(ValueError):
        sup_norm(np.zeros((0, 2)))


def test_max_deviation_norms_and_errors():
    a = Trajectory(np.array([[3.0, 4.0], [0.0, 0.0]]))
    b = Trajectory(np.zeros((2, 2)))
    assert max_deviation(a, a) == 0.0
    assert max_deviation(a, b) == 4.0
    assert max_deviation(a, b, norm=2) == 5.0
    with pytest.raises(DimensionError):
        max_deviation(a, Trajectory(np.zeros((3, 2))))
    with pytest.raises(ValueError):
        max_deviation(a, b, norm=1)


@settings(max_examples=50)
@given(arrays(float, (5, 3), elements=st.floats(-1e6, 1e6)), arrays(float, (5, 3), elements=st.floats(-1e6, 1e6)))
def test_max_deviation_symmetric(a, b):
    assert max_deviation(a, b) == max_deviation(b, a)
    assert max_deviation(a, b) >= 0.0


def test_nominal_bound_zero_record():
    plant, ctrl = scalar_loop()
    rec = simulate_closed_loop(plant, ctrl, [0.0], [0.0], 5)
    assert nominal_bound_M(rec) == 0.0


def test_determinism_and_nominal_consistency():
    plant, controller, _ = build_robot()
    r1 = simulate_closed_loop(plant, controller, [-2.0, 0, 0, 0], np.zeros(4), 120)
    r2 = simulate_closed_loop(plant, controller, [-2.0, 0, 0, 0], np.zeros(4), 120)
    for a, b in [(r1.plant_traj, r2.plant_traj), (r1.ctrl_state_traj, r2.ctrl_state_traj),
                 (r1.input_traj, r2.input_traj)]:
        np.testing.assert_array_equal(a.samples, b.samples)
    rep = implied_perturbation(r1, controller)
    assert rep.sup_e_c == 0.0


def _pair(seed, scale):
    lp, lc, xp0 = random_loop(seed, n=3)
    xc0 = np.random.default_rng(seed).normal(size=3)
    r1 = simulate_closed_loop(lp.to_model(), lc.to_model(), xp0, xc0, 30)
    r2 = simulate_closed_loop(lp.to_model(), lc.to_model(), scale * xp0, scale * xc0, 30)
    return [(r1.plant_traj, r2.plant_traj), (r1.ctrl_state_traj, r2.ctrl_state_traj),
            (r1.input_traj, r2.input_traj), (r1.output_traj, r2.output_traj)]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2.0, -2.0, 0.5, 4.0]))
def test_superposition_doubling(seed, scale):
    for a, b in _pair(seed, scale):
        np.testing.assert_allclose(scale * a.samples, b.samples, rtol=1e-12, atol=0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3.0, 3.0).filter(lambda s: abs(s) > 1e-3))
def test_superposition_any_scale(seed, scale):
    # rounding does not commute with non-binary scales; compare against the sup norm
    for a, b in _pair(seed, scale):
        err = np.max(np.abs(scale * a.samples - b.samples))
        assert err <= 1e-9 * max(1.0, np.max(np.abs(b.samples)))


def test_nonfinite_reports_step():
    plant = PlantModel(lambda x, u: 1e200 * x, lambda x: x, 1, 1, 1)
    ctrl = ControllerModel(lambda x, y: x, lambda x: np.zeros(1), 1, 1, 1)
    with pytest.raises(NonFiniteError) as info:
        simulate_closed_loop(plant, ctrl, [1.0], [0.0], 10)
    assert info.value.step == 2


def test_dimension_mismatch_rejected():
    plant, _ = scalar_loop()
    ctrl = ControllerModel(lambda x, y: x, lambda x: np.zeros(2), 1, 1, 2)
    with pytest.raises(DimensionError):
        simulate_closed_loop(plant, ctrl, [1.0], [0.0], 3)
    with pytest.raises(ValueError):
        simulate_closed_loop(plant, scalar_loop()[1], [1.0], [0.0], 0)
