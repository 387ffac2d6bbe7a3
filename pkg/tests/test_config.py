import json

import numpy as np
import pytest

from arxform.config import (
    ConfigError,
    builtin_system,
    load_matrix,
    load_system,
    parse_system,
    read_csv_columns,
    read_trajectory_csv,
    write_csv,
    write_trajectory_csv,
)
from arxform.core_sim import Trajectory, simulate_closed_loop
from arxform.robot_bench import ROBOT_A, ROBOT_B, ROBOT_C, ROBOT_K, ROBOT_L, nominal_run


def robot_doc(nonlinear=True):
    doc = {
        "plant": {"A": ROBOT_A.tolist(), "B": ROBOT_B.tolist(), "C": ROBOT_C.tolist()},
        "controller": {"observer_based": {"L": ROBOT_L.tolist(), "K": ROBOT_K.tolist()}},
        "x_p0": [-2, 0, 0, 0],
        "horizon": 300,
        "arxc": {"order": 10, "switch_time": 20},
    }
    if nonlinear:
        doc["plant"]["nonlinearity"] = "flexible_joint_sine"
    return doc


def test_matrix_formats(tmp_path):
    np.testing.assert_array_equal(load_matrix([[1, 2], [3, 4]]), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(load_matrix({"shape": [2, 1], "data": [5, 6]}), [[5], [6]])
    (tmp_path / "m.csv").write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(load_matrix("m.csv", tmp_path), [[1, 2], [3, 4]])
    with pytest.raises(ConfigError, match="plant.A"):
        load_matrix({"shape": [2, 2], "data": [1]}, field_name="plant.A")
    with pytest.raises(ConfigError):
        load_matrix("missing.csv", tmp_path)
    with pytest.raises(ConfigError):
        load_matrix([[1, float("nan")]])


def test_json_robot_matches_builtin(tmp_path):
    path = tmp_path / "robot.json"
    path.write_text(json.dumps(robot_doc()))
    sysdef = load_system(str(path))
    assert sysdef.linearized and sysdef.order == 10
    rec = simulate_closed_loop(sysdef.plant, sysdef.controller, sysdef.x_p0, sysdef.x_c0, 300)
    np.testing.assert_array_equal(rec.plant_traj.samples, nominal_run().plant_traj.samples)


def test_linear_controller_doc():
    doc = {"plant": {"A": [[0.5]], "B": [[1]], "C": [[1]]},
           "controller": {"F": [[0.2]], "G": [[0.1]], "H": [[-0.3]], "R": [[0.0]]},
           "x_p0": [1.0]}
    s = parse_system(doc)
    assert s.is_linear and s.x_c0.shape == (1,)


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.pop("plant"), "plant"),
    (lambda d: d.pop("controller"), "controller"),
    (lambda d: d.update(x_p0=[1, 2]), "x_p0"),
    (lambda d: d["plant"].update(nonlinearity="cubic"), "plant.nonlinearity"),
    (lambda d: d["plant"].update(B=[[1, 2]]), "plant"),
    (lambda d: d.update(arxc={"decay": {"M_o": 1.0, "lambda_o": 1.5}}), "arxc.decay"),
])
def test_validation_names_field(mutate, field):
    doc = robot_doc()
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        parse_system(doc)
    assert info.value.field == field


def test_bad_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"plant": {\n  "A": [[1]],\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_system(str(path))
    with pytest.raises(FileNotFoundError):
        load_system(str(tmp_path / "nope.json"))
    with pytest.raises(ConfigError):
        builtin_system("nope")


def test_trajectory_csv_roundtrip_lossless(tmp_path):
    rec = nominal_run()
    traj = Trajectory(np.hstack([rec.plant_traj.samples, rec.input_traj.samples]))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj, ["a", "b", "c", "d", "u"])
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.samples, traj.samples)
    assert list(back.names) == ["a", "b", "c", "d", "u"]


def test_csv_columns_roundtrip(tmp_path):
    vals = np.random.default_rng(0).normal(size=(20, 2)) * 1e-7
    write_csv(tmp_path / "x.csv", ["omega", "norm_E"], vals)
    cols = read_csv_columns(tmp_path / "x.csv")
    np.testing.assert_array_equal(cols["omega"], vals[:, 0])
    np.testing.assert_array_equal(cols["norm_E"], vals[:, 1])


def test_noncontiguous_time_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("t,x\n0,1.0\n2,3.0\n")
    with pytest.raises(ConfigError):
        read_trajectory_csv(path)
