import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dislocnet.cli import parse_matrix, parse_number, parse_vector, run
from dislocnet.kernel import KernelOnCircle, MaterialCubic


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    text = buf.getvalue()
    meta = dict(line[2:].split("=", 1) for line in text.splitlines() if line.startswith("# "))
    body = "".join(line + "\n" for line in text.splitlines() if not line.startswith("# "))
    rows = list(csv.DictReader(io.StringIO(body))) if body else []
    return code, meta, rows, body


def test_value_parsers():
    assert parse_number("4pi") == pytest.approx(4 * np.pi)
    assert parse_number("1/3") == pytest.approx(1 / 3)
    assert parse_number("2^-4") == 1 / 16
    assert parse_number("-pi") == pytest.approx(-np.pi)
    np.testing.assert_array_equal(parse_vector("1,-2"), [1, -2])
    np.testing.assert_array_equal(parse_matrix("1,0;0,-1"), np.diag([1, -1]))
    with pytest.raises(ValueError):
        parse_number("abc")


def test_psi0_example():
    code, meta, rows, _ = call("psi0", "--b", "1,0", "--n", "1,0", "--nu", "0.3333",
                               "--mu", "4pi")
    assert code == 0
    assert float(rows[0]["psi0"]) == pytest.approx(1.5, abs=1e-3)
    assert float(meta["unit_mu_over_4pi"]) == pytest.approx(1.0)
    assert meta["param_method"] == "auto" and meta["param_tol"] == "1e-10"


def test_psi0_quadrature_method():
    code, _, rows, _ = call("psi0", "--b", "1,0", "--n", "1,0", "--method", "quadrature")
    assert code == 0 and float(rows[0]["psi0"]) == pytest.approx(1.5, rel=1e-10)


def test_zigzag_scan_minimum():
    code, meta, rows, _ = call("zigzag-scan", "--nu", "0.3333", "--sigma", "1",
                               "--steps", "200")
    assert code == 0 and len(rows) == 200
    e = [float(r["e_per_area"]) for r in rows]
    k = int(np.argmin(e))
    assert float(rows[k]["delta"]) == pytest.approx(0.07, abs=0.01)
    assert float(meta["delta_star_over_sigma"]) == pytest.approx(0.068, abs=0.005)


def test_unknown_command_exit_2():
    assert call("frobnicate")[0] == 2


def test_invalid_values_exit_2(tmp_path):
    assert call("psi0", "--nu", "0.7")[0] == 2
    assert call("psi0", "--b", "x,y")[0] == 2
    assert call("psirel", "--b", "0.5,0")[0] == 2
    assert call("near-far", "--M", "256", "--eps", "1/64")[0] == 2
    assert call("psi0", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    assert call("psi0", "--config", str(bad))[0] == 2


def test_inadmissible_kernel_exit_3(tmp_path):
    k = KernelOnCircle.from_function(lambda z: np.diag([1.0, -0.5]), 2)
    path = tmp_path / "k.csv"
    k.to_csv(path, 16)
    assert call("psi0", "--kernel", str(path))[0] == 3


def test_kernel_table_input(tmp_path):
    path = tmp_path / "k.csv"
    KernelOnCircle.cubic(MaterialCubic()).to_csv(path, 720)
    code, meta, rows, _ = call("psi0", "--kernel", str(path), "--b", "1,0", "--n", "0,1")
    assert code == 0 and float(rows[0]["psi0"]) == pytest.approx(1.0, rel=1e-4)
    assert "kernel table" in meta["normalization"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("# material\nnu = 0\nb = 2,0\n")
    code, meta, rows, _ = call("psi0", "--config", str(cfg))
    assert code == 0 and float(rows[0]["psi0"]) == pytest.approx(4.0)
    code, meta, rows, _ = call("psi0", "--config", str(cfg), "--b", "1,0")
    assert float(rows[0]["psi0"]) == pytest.approx(1.0)
    assert meta["param_nu"] == "0.0"


def test_out_files_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["cell-energy", "--A", "1,0;0,-1", "--n-normals", "36"]
    assert run(args + ["--out", str(out1)]) == 0
    assert run(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    meta = (tmp_path / "a.csv.meta").read_text()
    assert "unit_mu_over_4pi=1.0" in meta and "param_n_normals=36" in meta


def test_witness_outputs(tmp_path):
    w = tmp_path / "w.json"
    assert call("psirel", "--b", "2,1", "--n", "1,0", "--witness", str(w))[0] == 0
    data = json.loads(w.read_text())
    assert np.sum(data["parts"], axis=0).tolist() == [2, 1]
    w2 = tmp_path / "c.json"
    code, _, rows, _ = call("cell-energy", "--witness", str(w2))
    assert code == 0 and json.loads(w2.read_text())["family"] == rows[0]["family"]


def test_psiinf_search_and_closure():
    code, _, rows, _ = call("psiinf", "--b", "1,1", "--n", "1,-1")
    assert code == 0 and float(rows[0]["psi_infinity"]) == pytest.approx(2.0, abs=1e-10)
    assert rows[0]["method"] == "search"
    code, _, rows, _ = call("psiinf", "--b", "0.5,0", "--n", "1,0")
    assert rows[0]["method"] == "closure"
    assert float(rows[0]["psi_infinity"]) == pytest.approx(0.75, rel=1e-10)


def test_threshold_scan_meta():
    code, meta, rows, _ = call("threshold-scan", "--steps", "5", "--tol", "1e-4")
    assert code == 0 and len(rows) == 5
    assert float(meta["eta_threshold"]) == pytest.approx(np.sqrt(2) - 1, abs=1e-3)
    assert float(meta["nu_threshold"]) == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-3)


def test_phasefield_commands(tmp_path):
    code, _, rows, _ = call("phasefield-eval", "--M", "64", "--eps", "1/16")
    assert code == 0
    r = rows[0]
    assert float(r["total"]) == pytest.approx(float(r["peierls"]) + float(r["elastic"]))
    code, meta, rows, _ = call("phasefield-eval", "--M", "64", "--eps", "1/16",
                               "--profile", "sharp", "--minimize", "5")
    assert code == 0 and int(meta["descent_steps"]) >= 1
    code, _, rows, _ = call("near-far", "--M", "32", "--eps", "1/8")
    assert code == 0 and abs(float(rows[0]["relative_gap"])) < 0.1
    code, meta, rows, _ = call("scaling-fit", "--M", "256", "--eps-list", "1/8,1/16,1/32",
                               "--stack", "1,2")
    assert code == 0 and len(rows) == 3 and meta["calibration_matched"] == "2L*psi0"


def test_limit_commands(tmp_path):
    code, _, rows, _ = call("selfenergy", "--A", "0,1;0,0", "--L", "2", "--g", "frobenius")
    assert code == 0 and float(rows[0]["total"]) == pytest.approx(2 + 4)
    code, _, rows, _ = call("limit-energy", "--M", "32", "--eps", "1/8")
    assert code == 0
    r = rows[0]
    assert float(r["total"]) == pytest.approx(float(r["self"]) + float(r["elastic"]))
    assert call("limit-energy", "--g", "gupper")[0] == 2


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "dislocnet", "psi0"], capture_output=True,
                         text=True, check=True).stdout
    assert "psi0" in out and "1.5" in out
