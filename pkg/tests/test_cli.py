from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from fermihj.bundled import fixture_text
from fermihj.cli import main, parse_value


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("text, value", [("1", 1), ("i", 1j), ("-i", -1j), ("2i", 2j), ("1+2i", 1 + 2j), ("0.5", 0.5)])
def test_parse_value(text, value):
    assert parse_value(text) == value


def test_derive_interacting(capsys):
    code, out, _ = run(capsys, "derive", "interacting", "-p", "k=1")
    assert code == 0
    d = json.loads(out)
    assert d["results"]["momenta"] == {"pi_psi1": "-i*psi2", "pi_psi2": "-i*psi1"}
    assert d["results"]["hamiltonian"] == "-k*psi1*psi2"
    assert d["results"]["hamiltonian_independent_of_fermionic_momenta"] is True
    assert d["ok"] and d["tool"]["name"] == "fermi-hj"


def test_report_is_deterministic(capsys):
    a = run(capsys, "hj", "verify", "interacting")[1]
    b = run(capsys, "hj", "verify", "interacting")[1]
    assert a == b


def test_model_file_on_disk(tmp_path, capsys):
    path = tmp_path / "m.fhj"
    path.write_text(fixture_text("simple"))
    code, out, _ = run(capsys, "derive", str(path), "--format", "text")
    assert code == 0 and "pi_psi" in out


def test_hj_verify_families(capsys):
    code, out, _ = run(capsys, "hj", "verify", "interacting")
    d = json.loads(out)
    assert code == 0
    assert d["results"]["free_odd_constants"] == {"before": 4, "after": 2}
    assert d["max_residual"] <= 1e-9


@pytest.mark.parametrize("stage", [("hj", "assemble"), ("hj", "reduce")])
def test_hj_stages(capsys, stage):
    code, out, _ = run(capsys, *stage, "interacting")
    assert code == 0 and json.loads(out)["stage"] == " ".join(stage)


def test_integrate_csv(capsys, tmp_path):
    dest = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "integrate", "interacting", "-p", "k=1", "--grid", "0,1,101", "--format", "csv", "-o", str(dest))
    assert code == 0
    rows = list(csv.reader(io.StringIO(dest.read_text())))
    assert rows[0][0] == "t" and len(rows) == 102


def test_integrate_simple(capsys):
    code, out, _ = run(capsys, "integrate", "simple", "--grid", "0,10,101")
    assert code == 0 and json.loads(out)["ok"]


def test_xform_reports_phase_rate_failure(capsys):
    code, out, _ = run(capsys, "xform", "check", "interacting")
    d = json.loads(out)
    assert code == 2
    assert {f["equation"] for f in d["failures"]} == {"(a) s1'/s1 - i k/2", "(a) s2'/s2 + i k/2"}


def test_tight_tolerance_fails(capsys):
    code, _, _ = run(capsys, "hj", "verify", "interacting", "--tol", "1e-30")
    assert code == 2


@pytest.mark.parametrize("argv, needle", [
    (["derive"], "model"),
    (["derive", "interacting", "-p", "k"], "name=value"),
    (["derive", "interacting", "--grid", "0,1"], "grid"),
    (["derive", "interacting", "--el-sign", "x"], "el-sign"),
    (["derive", "interacting", "--format", "csv"], "csv"),
    (["hj"], "subcommand"),
    (["integrate", "interacting"], "k"),
    (["derive", "/nonexistent/model.fhj"], "nonexistent"),
    (["hj", "verify", "interacting", "--closed-form", "other"], "closed form"),
])
def test_usage_errors(capsys, argv, needle):
    code, _, err = run(capsys, *argv)
    assert code == 1 and needle in err


def test_model_error_has_location(tmp_path, capsys):
    path = tmp_path / "bad.fhj"
    path.write_text("model bad { fermion psi; lagrangian { psi*psi2 } }")
    code, _, err = run(capsys, "derive", str(path))
    assert code == 1 and str(path) in err and "psi2" in err


def test_env_tolerance(monkeypatch, capsys):
    monkeypatch.setenv("FERMI_HJ_TOL", "1e-30")
    assert run(capsys, "hj", "verify", "interacting")[0] == 2
    monkeypatch.setenv("FERMI_HJ_TOL", "-1")
    assert run(capsys, "hj", "verify", "interacting")[0] == 1


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fermihj.cli", "derive", "simple", "--format", "text"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "status: ok" in proc.stdout
