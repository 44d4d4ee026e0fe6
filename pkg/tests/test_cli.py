import csv
import io
import json
import math
import subprocess
import sys

import pytest

from edes_lifespan import cli
from edes_lifespan import special
from edes_lifespan.exponents import critical_exponent_p0


def run(argv):
    buf = io.StringIO()
    code = cli.dispatch(argv, stdout=buf)
    return code, buf.getvalue()


def test_exponents_example():
    code, out = run(["exponents", "--n", "3", "--k", "0.6667"])
    assert code == 0
    (row,) = json.loads(out)
    assert row["k"] == pytest.approx(2 / 3, abs=1e-15)
    assert row["p0"] == pytest.approx(2.7863, abs=1e-4)
    assert row["p1"] == 3
    assert row["N_k_as_printed"] == pytest.approx(3.5)
    assert row["N_k"] == pytest.approx((math.sqrt(73) - 1) / 2)
    for key in ("regime", "law_kind", "law_exponent", "p_strauss", "N_tilde", "N_hat"):
        assert key in row


def test_exponents_grid_and_csv():
    code, out = run(["exponents", "--n", "1,2,3", "--k", "0,0.5", "--p", "2", "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 6
    assert {r["regime"] for r in rows} >= {"sub_p1"}


def test_seventeen_digit_output():
    _, out = run(["exponents", "--n", "3", "--k", "0.5"])
    row = json.loads(out)[0]
    assert row["p0"] == critical_exponent_p0(3, 0.5)
    assert f'"p0": {row["p0"]:.17g}' in out


def test_exponents_svg(tmp_path):
    code, _ = run(["exponents", "--n", "1,2,3,4,5", "--k", "0.3", "--format", "svg",
                   "--out", str(tmp_path)])
    assert code == 0
    svg = next(tmp_path.glob("*.svg")).read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")


def test_kernels_check(tmp_path, capsys):
    code, _ = run(["kernels", "--check", "--k", "0.6667", "--grid", "quick", "--out", str(tmp_path)])
    assert code == 0
    err = capsys.readouterr().err
    assert "FAIL" not in err and "PASS" in err
    assert (tmp_path / "kernel_residuals.csv").exists()


def test_iterate_trace():
    code, out = run(["iterate", "--n", "3", "--k", "0.6667", "--p", "2", "--eps", "0.5,0.25",
                     "--case", "crit_p0", "--j-max", "4"])
    assert code == 0
    doc = json.loads(out)
    assert doc["case"] == "crit_p0"
    assert [r["alpha_j"] for r in doc["trace"]] == ["1", "3", "7", "15", "31"]
    assert len(doc["thresholds"]) == 2


def test_iterate_infers_case():
    code, out = run(["iterate", "--n", "3", "--k", "0.6667", "--p", "3", "--j-max", "2"])
    assert code == 0 and json.loads(out)["case"] == "crit_p1"


def test_simulate_deterministic(tmp_path):
    argv = ["simulate", "--n", "3", "--k", "0.6667", "--p", "2", "--eps", "0.3",
            "--dr", "0.05", "--t-max", "20", "--no-refine"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(argv + ["--out", str(a)])[0] == 0
    assert run(argv + ["--out", str(b)])[0] == 0
    for name in ("summary.json", "run.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summ = json.loads((a / "summary.json").read_text())
    assert "fitted_constants" in summ and summ["blew_up"] is False


def test_simulate_from_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 0.0, "n": 1, "p": 2.0, "eps": 0.3, "dr": 0.02,
                               "t_max": 100.0, "refine": False}))
    code, out = run(["simulate", "--config", str(cfg)])
    assert code == 0
    assert json.loads(out)["blew_up"] is True


def test_sweep_needs_decade(tmp_path):
    code, _ = run(["sweep", "--n", "1", "--k", "0", "--p", "2", "--eps", "0.5,0.4,0.3,0.2",
                   "--dr", "0.05", "--t-max", "50"])
    assert code == 1


# ---- exit codes ---------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    ["exponents", "--bogus"],
    ["nothing"],
    [],
    ["exponents", "--n", "2.5", "--k", "0.3"],
    ["exponents", "--n", "3", "--k", "1.2"],
    ["simulate", "--config", "/nonexistent/cfg.json"],
    ["exponents", "--n", "3", "--k", "0.5", "--out", "/proc/forbidden/dir"],
])
def test_validation_exit_one(argv):
    assert run(argv)[0] == 1


def test_real_n_flag():
    assert run(["exponents", "--n", "2.5", "--k", "0.3", "--real-n"])[0] == 0


def test_verify_all_quick(tmp_path):
    code, _ = run(["verify-all", "--profile", "quick", "--out", str(tmp_path)])
    assert code == 0
    report = (tmp_path / "verify_report.md").read_text()
    assert "FAIL" not in report


def test_sign_flip_fault(tmp_path):
    code, _ = run(["verify-all", "--profile", "quick", "--inject-fault", "sign-flip",
                   "--out", str(tmp_path)])
    assert code == 2
    report = (tmp_path / "verify_report.md").read_text()
    assert "FAIL" in report
    for name in ("wronskian", "ode_residual"):
        assert any(name in line and "FAIL" in line for line in report.splitlines())
    # the fault is undone afterwards
    assert special._series_sign == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "edes_lifespan", "exponents", "--n", "3",
                           "--k", "0"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)[0]["p1"] == pytest.approx(5 / 3)
