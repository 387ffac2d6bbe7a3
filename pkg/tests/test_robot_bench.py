import math

import numpy as np
import pytest

from arxform.robot_bench import (
    PUBLISHED_FIG2,
    RobotConfig,
    build_robot,
    flexible_joint_sine,
    run_figure1,
    run_figure2,
)

# max_t ||x_p - xbar_p||_2 from our own simulation, frozen
FROZEN_FIG2 = {
    5: 2.4106749940218832, 6: 2.0895685064363607, 7: 1.8549841749429998,
    8: 1.6793719358751558, 9: 1.544316422806804, 10: 1.437298506934811,
    11: 1.3501023420690128, 12: 1.2771301600061307, 13: 1.2146152962512344,
    14: 1.1642183273326883, 15: 1.1282543090072394,
}


@pytest.fixture(scope="module")
def sweep():
    return run_figure2()


def test_plant_and_controller_maps():
    plant, controller, observer = build_robot()
    np.testing.assert_array_equal(plant.output(np.array([1.0, 2.0, 3.0, 4.0])), [1.0, 2.0])
    np.testing.assert_allclose(flexible_joint_sine(np.array([0, 0, math.pi / 2, 0])), [0, 0, 0, -0.0333])
    assert controller.output(np.array([1.0, 0, 0, 0]))[0] == pytest.approx(-20.4547)
    assert observer.decay is not None and observer.decay.rate < 1


@pytest.mark.parametrize("N", [5, 10, 15])
def test_published_points(sweep, N):
    p = {q.N: q for q in sweep.points}[N]
    assert p.max_plant_deviation == pytest.approx(PUBLISHED_FIG2[N], rel=0.02)


def test_frozen_sweep(sweep):
    for p in sweep.points:
        assert p.max_plant_deviation == pytest.approx(FROZEN_FIG2[p.N], rel=1e-9)


def test_strictly_decreasing(sweep):
    d = sweep.max_deviations()
    assert np.all(np.diff(d) < 0)
    assert sweep.orders == list(range(5, 16))


def test_metric_variants_reported(sweep):
    for p in sweep.points:
        assert p.max_plant_deviation_inf <= p.max_plant_deviation <= 2 * p.max_plant_deviation_inf
        assert p.max_stacked_deviation >= p.max_plant_deviation_inf
        assert p.sup_e_c_arx <= p.sup_e_c


def test_sweep_reproducible(sweep):
    again = run_figure2()
    assert [p.max_plant_deviation for p in again.points] == [p.max_plant_deviation for p in sweep.points]


def test_parallel_sweep_matches(sweep):
    par = run_figure2(5, 8, workers=2)
    assert [p.max_plant_deviation for p in par.points] == [p.max_plant_deviation for p in sweep.points[:4]]


def test_sweep_range_checked():
    with pytest.raises(ValueError):
        run_figure2(6, 5)


def test_figure1():
    res = run_figure1([5, 15])
    assert res.nominal[0, 0] == -2.0
    for N in (5, 15):
        np.testing.assert_array_equal(res.by_order[N][:20], res.nominal[:20])
    err5 = np.max(np.abs(res.by_order[5] - res.nominal), axis=0)
    err15 = np.max(np.abs(res.by_order[15] - res.nominal), axis=0)
    assert np.all(err15 < err5)


@pytest.mark.xfail(strict=True, reason="sup e_c over t >= 20 rises from N = 13 to N = 14 (0.3217 -> 0.3279)")
def test_sup_perturbation_monotone(sweep):
    s = [p.sup_e_c_arx for p in sweep.points]
    assert np.all(np.diff(s) <= 0)


def test_sup_perturbation_trend(sweep):
    s = {p.N: p.sup_e_c_arx for p in sweep.points}
    assert s[5] > s[10] > s[15] > 0


def test_custom_config():
    cfg = RobotConfig(horizon=60, switch_time=20)
    res = run_figure2(5, 6, cfg)
    assert len(res.points) == 2
