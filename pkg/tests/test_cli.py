import csv
import io

import numpy as np
import pytest
from click.testing import CliRunner

from bubblezoom import cli
from bubblezoom.sparse import SingularMatrix

HEADER_LINE = "N,method,L2,eoc_L2,H1,eoc_H1,stab,eoc_stab,eps_norm,max_value,wall_time_s"


def run(args):
    return CliRunner().invoke(cli.main, args, catch_exceptions=False)


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_header_and_zero_problem(tmp_path):
    r = run(["solve", "--problem", "channel", "--method", "galerkin", "--eps", "1.0",
             "--N", "4", "--f", "zero", "--out", str(tmp_path)])
    assert r.exit_code == 0
    text = (tmp_path / "table.csv").read_text()
    assert text.splitlines()[0] == HEADER_LINE
    (row,) = read_rows(text)
    for k in ("L2", "H1", "stab", "eps_norm", "max_value"):
        assert float(row[k]) == 0.0
    assert row["eoc_L2"] == ""


def test_table_rows_have_eoc_and_scientific_format(tmp_path):
    r = run(["table", "--method", "galerkin", "--eps", "1.0", "--N", "8,16",
             "--out", str(tmp_path), "--no-timing"])
    assert r.exit_code == 0
    rows = read_rows((tmp_path / "table.csv").read_text())
    assert [row["N"] for row in rows] == ["8", "16"]
    assert rows[0]["eoc_H1"] == "" and rows[1]["eoc_H1"] != ""
    ratio = np.log(float(rows[0]["H1"]) / float(rows[1]["H1"])) / np.log(2)
    assert float(rows[1]["eoc_H1"]) == pytest.approx(ratio, rel=1e-8)
    mant = rows[1]["L2"].split("e")[0]
    assert len(mant.replace(".", "").lstrip("-")) >= 6
    for row in rows:
        for k in ("L2", "H1", "stab", "eps_norm", "max_value"):
            assert np.isfinite(float(row[k]))


def test_compare_is_deterministic(tmp_path):
    args = ["compare-methods", "--method", "galerkin,rfb", "--eps", "1e-2", "--N", "4,8",
            "--no-timing"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out", str(a)]).exit_code == 0
    assert run(args + ["--out", str(b), "--jobs", "2"]).exit_code == 0
    ta = (a / "table.csv").read_bytes()
    assert ta == (b / "table.csv").read_bytes()
    rows = read_rows(ta.decode())
    assert [(r["method"], r["N"]) for r in rows] == [("galerkin", "4"), ("galerkin", "8"),
                                                    ("rfb", "4"), ("rfb", "8")]


def test_sweep_layout(tmp_path):
    r = run(["sweep", "--method", "galerkin", "--eps", "1.0,0.1", "--N", "4,8",
             "--out", str(tmp_path), "--no-timing"])
    assert r.exit_code == 0
    for e in ("1", "0.1"):
        rows = read_rows((tmp_path / f"eps_{e}" / "table.csv").read_text())
        assert len(rows) == 2


def test_field_export(tmp_path):
    r = run(["field-export", "--method", "rfb", "--eps", "1e-2", "--N", "4",
             "--samples", "3", "--out", str(tmp_path)])
    assert r.exit_code == 0
    vtk = (tmp_path / "field_rfb_4.vtk").read_text().splitlines()
    assert vtk[0].startswith("# vtk DataFile")
    assert "STRUCTURED_GRID" in vtk[3]
    assert vtk[4].split() == ["DIMENSIONS", "13", "13", "1"]
    data = np.loadtxt(tmp_path / "field_rfb_4.csv", delimiter=",", skiprows=1)
    assert data.shape == (169, 3)
    assert np.allclose(data[(data[:, 0] == 0) | (data[:, 1] == 1), 2], 0)
    assert data[:, 2].max() > 0


@pytest.mark.parametrize("args", [
    ["solve", "--N", "20,10"],
    ["solve", "--N", "0"],
    ["solve", "--eps", "-1"],
    ["solve", "--method", "supg"],
    ["solve", "--method", "rfb", "--mode", "analysis", "--N", "4"],
    ["table", "--method", "galerkin", "--N", "8"],
    ["compare-methods", "--method", "bmz", "--N", "4"],
    ["compare-methods", "--method", "bmz,bmz", "--N", "4"],
    ["solve", "--eps", "1e-2,1e-3", "--N", "4"],
    ["validate-asymptotics", "--n", "30"],
    ["validate-asymptotics", "--eps", "1e-6,1e-2"],
])
def test_invalid_arguments_exit_2(args):
    r = CliRunner().invoke(cli.main, args)
    assert r.exit_code == 2


def test_out_is_a_file_exit_2(tmp_path):
    f = tmp_path / "file"
    f.write_text("x")
    r = CliRunner().invoke(cli.main, ["solve", "--method", "galerkin", "--N", "4",
                                      "--out", str(f)])
    assert r.exit_code == 2


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    r = CliRunner().invoke(cli.main, ["solve", "--method", "galerkin", "--eps", "1.0",
                                      "--N", "4", "--out", str(blocker / "sub")])
    assert r.exit_code == 4
    assert "cannot write" in r.output


def test_solver_failure_exit_3(monkeypatch):
    def boom(*a, **k):
        raise SingularMatrix("forced")

    monkeypatch.setattr(cli, "run_point", boom)
    r = CliRunner().invoke(cli.main, ["solve", "--method", "galerkin", "--N", "4"])
    assert r.exit_code == 3
    assert "solver failure" in r.output


def test_channel_rfb_overshoots(tmp_path):
    r = run(["solve", "--problem", "channel", "--method", "rfb", "--eps", "1e-6",
             "--N", "50", "--out", str(tmp_path)])
    assert r.exit_code == 0
    (row,) = read_rows((tmp_path / "table.csv").read_text())
    assert float(row["max_value"]) > 1.3


def test_coarse_mesh_ordering(tmp_path):
    # stability-norm ordering on the coarsest mesh, manufactured problem
    r = run(["compare-methods", "--N", "10", "--eps", "1e-6", "--out", str(tmp_path),
             "--jobs", "3"])
    assert r.exit_code == 0
    stab = {row["method"]: float(row["stab"]) for row in read_rows((tmp_path / "table.csv").read_text())}
    print("stab at N=10:", stab)
    assert stab["rfbe"] < stab["rfb"] < stab["bmz"]


def test_validate_asymptotics_small(tmp_path):
    r = run(["validate-asymptotics", "--eps", "1e-2,1e-3", "--ref-eps", "1e-2,3e-3",
             "--n", "256", "--ref-n", "512", "--out", str(tmp_path)])
    assert r.exit_code == 0
    rows = list(csv.reader(open(tmp_path / "asymptotics_report.csv")))
    assert rows[0] == ["epsilon", "norm_name", "value", "fitted_exponent"]
    names = {row[1] for row in rows[1:]}
    assert {"phi_L2", "dy_phi_L2", "zeta_L2", "xi_eps", "u_ref_minus_u_as_eps",
            "identity_residual_N4", "identity_residual_N16"} <= names
    assert "fitted exponent" in r.output
