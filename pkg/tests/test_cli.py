import json

import numpy as np
import pytest

from p1rt0.cli import main
from p1rt0.experiments import (CONVERGENCE_COLUMNS, ExperimentReport, SWEEP_COLUMNS,
                               dilation_oscillation, grid_ladder, lame_from_poisson)
from p1rt0.femspace import DofMap
from p1rt0.mesh import generate_structured_unit_square, write_mesh
from p1rt0.vtk import read_vtk, write_solution


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_convergence_csv(capsys):
    code, out, _ = _run(capsys, "convergence", "--scheme", "s1", "--grid", "structured:2",
                        "--levels", "3")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == ",".join(CONVERGENCE_COLUMNS)
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "34" and first[3] == "" and first[5] == ""
    assert float(lines[3].split(",")[3]) > 1.0


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert _run(capsys, "convergence", "--scheme", "s2", "--bc", "mixed-right",
                    "--lambda", "1e6", "--grid", "perturbed:2", "--levels", "2",
                    "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_report_csv_edge_cases():
    r = ExperimentReport("convergence", "S1", "g", CONVERGENCE_COLUMNS)
    assert r.to_csv() == ",".join(CONVERGENCE_COLUMNS) + "\n"
    r.rows.append({"ndof": 34, "h": 0.5, "l2_error": 0.1, "h1_error": 1.0,
                   "l2_rate": None, "h1_rate": None})
    lines = r.to_csv().splitlines()
    assert len(lines) == 2
    assert lines[1] == "34,5.000000e-01,1.000000e-01,,1.000000e+00,"


def test_gradrobust_csv(capsys):
    code, out, _ = _run(capsys, "gradrobust", "--lambda", "1e4,1e6", "--mu", "1",
                        "--grid", "structured:4", "--levels", "1")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    v = [float(l.split(",")[3]) for l in lines[1:]]
    assert v[0] / v[1] == pytest.approx(100.0, rel=0.01)


def test_cooks_and_vtk(tmp_path, capsys):
    base = tmp_path / "cook.vtk"
    code, out, _ = _run(capsys, "cooks", "--nu", "0.4999", "--scheme", "p1,s2",
                        "--grid", "structured:4", "--vtk", str(base))
    assert code == 0
    assert out.splitlines()[0] == "nu,scheme,n,ndof,tip_displacement"
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["cook_p1_nu0.4999_n4.vtk", "cook_s2_nu0.4999_n4.vtk"]
    data = read_vtk(tmp_path / "cook_s2_nu0.4999_n4.vtk")
    assert data["points"].shape == (25, 3)
    assert data["cells"].shape == (32, 3)
    assert set(data["cell_data"]) == {"dilation", "rt0_cell_average"}
    assert data["point_data"]["displacement"].shape == (25, 3)


def test_vtk_round_trip(tmp_path, rng):
    mesh = generate_structured_unit_square(3)
    d = DofMap(mesh)
    u = d.random(rng)
    path = write_solution(tmp_path / "u.vtk", u)
    data = read_vtk(path)
    assert np.allclose(data["points"][:, :2], mesh.vertices)
    assert np.array_equal(data["cells"], mesh.cells)
    assert np.all(data["cell_types"] == 5)
    assert np.allclose(data["point_data"]["displacement"][:, :2], u.vertex_values)
    assert np.allclose(data["cell_data"]["dilation"], u.cell_divergence())


def test_meshinfo_file(tmp_path, capsys):
    write_mesh(generate_structured_unit_square(2), tmp_path / "m.node")
    code, out, _ = _run(capsys, "meshinfo", "--grid", f"file:{tmp_path / 'm.node'}")
    assert code == 0 and "vertices: 9" in out


def _error(err):
    return json.loads(err.strip().splitlines()[-1])


def test_usage_errors(capsys):
    code, _, err = _run(capsys, "convergence", "--scheme", "s2", "--bc", "dirichlet")
    assert code == 2 and _error(err)["error"] == "usage"
    code, _, err = _run(capsys, "convergence", "--scheme", "bogus")
    assert code == 2 and _error(err)["error"] == "usage"
    code, _, err = _run(capsys, "frobnicate")
    assert code == 2
    code, _, err = _run(capsys, "convergence", "--levels", "0")
    assert code == 2


def test_mesh_error_is_json(tmp_path, capsys):
    code, _, err = _run(capsys, "meshinfo", "--grid", f"file:{tmp_path / 'missing.node'}")
    assert code == 1
    assert "error" in _error(err) and "message" in _error(err)
    (tmp_path / "t.node").write_text("3 2 0 0\n1 0 0\n")
    (tmp_path / "t.ele").write_text("1 3 0\n1 1 2 3\n")
    code, _, err = _run(capsys, "meshinfo", "--grid", f"file:{tmp_path / 't.node'}")
    assert code == 1 and _error(err)["error"] == "mesh.truncated_file"


def test_bad_grid_spec(capsys):
    code, _, err = _run(capsys, "convergence", "--grid", "hexagonal:4")
    assert code == 1 and _error(err)["error"] == "invalid"


def test_grid_ladder_and_lame():
    ladder = grid_ladder("structured:2", 3)
    assert ladder.sizes == (2, 4, 8)
    lam, mu = lame_from_poisson(0.25, 2.5)
    assert (lam, mu) == pytest.approx((1.0, 1.0))
    with pytest.raises(ValueError):
        lame_from_poisson(0.5)


def test_oscillation_metric_on_checkerboard():
    mesh = generate_structured_unit_square(8)
    lower = np.arange(mesh.num_cells) % 2 == 0
    checker = np.where(lower, 1.0, -1.0)
    smooth = mesh.centroids[:, 0] + 1.0
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert dilation_oscillation(mesh, checker, corners=corners) > 0.5
    assert dilation_oscillation(mesh, smooth, corners=corners) == 0.0
