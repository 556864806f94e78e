import csv
import json
import shutil
import subprocess
import sys

import pytest

from balans.cli import EXIT_CONFIG, EXIT_FS, EXIT_NAN, EXIT_OK, EXIT_VIOLATION, load_config, main


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BALANS_OUT", raising=False)
    return tmp_path


ADV = """
[problem]
catalog = "advection-x"
[grid]
N = 100
boundary = "point"
[outputs]
snapshot_times = [0.5, 1.0]
dump = true
out_dir = "out"
"""

BURGERS = """
[problem]
catalog = "burgers-riemann"
T = 0.6
[grid]
N = 40
[outputs]
out_dir = "out"
"""


def test_solve_advection(work):
    cfg = write(work / "a.toml", ADV)
    assert main(["solve", cfg]) == EXIT_OK
    man = json.loads((work / "out/manifest.json").read_text())
    NT = man["grid"]["NT"]
    rows = list(csv.reader(open(work / "out/snapshot_001.csv", newline="")))
    assert rows[0] == ["x", "u"] and len(rows) == 101
    t = man["snapshots"][1]["t"]
    assert all(abs(float(u) - t) < 1e-12 for _, u in rows[1:])
    assert abs(t - 1.0) < man["grid"]["dt"]
    dump = (work / "out/dump.csv").read_text().splitlines()
    assert dump[0] == "n,t,j,x,u" and len(dump) - 1 == (NT + 1) * 100


def test_csv_format(work):
    main(["solve", write(work / "a.toml", ADV)])
    raw = (work / "out/snapshot_000.csv").read_bytes()
    assert b"\r" not in raw and b";" not in raw
    x, u = raw.decode().splitlines()[1].split(",")
    assert float(x) == 0.005


def test_missing_file(work, capsys):
    assert main(["solve", "nope.toml"]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    [
        "[problem\n",
        "[problem]\nf = 'u*(1-u'\n",
        "[problem]\ncatalog = 'nope'\n",
        "[problem]\ng = 'u'\n",
        "[problem]\nf = 'u'\n[grid]\nN = 1\n",
        "[problem]\nf = 'u'\n[grid]\nalpha = 0.5\n",
        "[problem]\nf = 'u'\n[grid]\ncfl_fraction = 2.0\n",
        "[problem]\nf = 'u'\n[outputs]\nsnapshot_times = [2.0]\n",
        "[problem]\nf = 'u'\n[extra]\n",
        "[problem]\nf = 'u'\nfoo = 1\n",
        "[problem]\nf = 'u'\nT = 'long'\n",
    ],
)
def test_config_errors(work, text):
    assert main(["solve", write(work / "c.toml", text)]) == EXIT_CONFIG


def test_bad_arguments(work):
    assert main([]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG


def test_env_overrides_out_dir(work, monkeypatch):
    monkeypatch.setenv("BALANS_OUT", str(work / "elsewhere"))
    assert main(["solve", write(work / "a.toml", ADV)]) == EXIT_OK
    assert (work / "elsewhere/manifest.json").exists()
    assert not (work / "out").exists()


def test_filesystem_error(work):
    (work / "blocker").write_text("file, not a directory")
    text = ADV.replace('out_dir = "out"', 'out_dir = "blocker/sub"')
    assert main(["solve", write(work / "a.toml", text)]) == EXIT_FS


def test_nan_exit(work):
    text = "[problem]\nf = 'u'\ng = 'u^2'\nu_o = '3'\nu_a = '3'\nu_b = '3'\nT = 5\n[grid]\nN = 10\nalpha = 1.0\n"
    with pytest.warns(UserWarning):
        assert main(["solve", write(work / "c.toml", text)]) == EXIT_NAN


def test_audit_catalog(work):
    assert main(["audit", write(work / "b.toml", BURGERS)]) == EXIT_OK
    rep = json.loads((work / "out/report.json").read_text())
    assert rep["ok"] and rep["entropy"]["violation_count"] == 0
    assert {"problem", "grid", "checkpoints", "entropy", "bln"} <= set(rep)
    c = rep["checkpoints"][0]
    assert {"t", "observed_linf", "bound_U", "observed_tv", "bound_Cx"} <= set(c)
    assert len(rep["bln"]["per_n"]["left"]) == rep["grid"]["NT"] + 1


def test_audit_constant_problem(work):
    text = "[problem]\nf = 'u^2/2'\nu_o = '0'\n[grid]\nN = 10\n[outputs]\nout_dir = 'out'\n"
    assert main(["audit", write(work / "c.toml", text)]) == EXIT_OK
    rep = json.loads((work / "out/report.json").read_text())
    assert all(c["observed_linf"] == 0 and c["observed_tv"] == 0 for c in rep["checkpoints"])


def test_audit_broken_cfl(work):
    text = BURGERS.replace("N = 40", "N = 40\ncfl_fraction = 3.5\nunsafe = true")
    assert main(["audit", write(work / "b.toml", text)]) == EXIT_VIOLATION
    rep = json.loads((work / "out/report.json").read_text())
    assert rep["entropy"]["violation_count"] > 0
    assert not rep["ok"]


def test_convergence(work, capsys):
    cfg = write(work / "b.toml", BURGERS)
    assert main(["convergence", cfg, "--N", "20,40,80"]) == EXIT_OK
    lines = (work / "out/convergence.csv").read_text().splitlines()
    assert lines[0] == "N,N_fine,t,error,order" and len(lines) == 3
    assert lines[1].endswith(",")
    assert main(["convergence", cfg, "--N", "20,30"]) == EXIT_CONFIG
    assert main(["convergence", cfg, "--N", "20,x"]) == EXIT_CONFIG


def test_stability_commands(work):
    a = write(work / "a.toml", BURGERS)
    b = write(work / "b.toml", BURGERS.replace("T = 0.6", "T = 0.6\ng = '0.01'"))
    assert main(["stability", a, a]) == EXIT_OK
    rep = json.loads((work / "out/stability.json").read_text())
    assert all(c["measured"] == 0 and c["bound"] == 0 for c in rep["checkpoints"])
    assert main(["stability", a, b]) == EXIT_OK
    rows = (work / "out/stability.csv").read_text().splitlines()
    assert rows[0] == "t,measured,bound" and len(rows) == 4
    assert all(float(r.split(",")[1]) > 0 for r in rows[1:])
    c = write(work / "c.toml", BURGERS.replace("T = 0.6", "T = 0.6\nu_b = '0.2'"))
    assert main(["stability", a, c]) == EXIT_CONFIG


def test_data_dependence_command(work):
    a = write(work / "a.toml", BURGERS)
    d = write(work / "d.toml", "[problem]\nu_o = 'if(0.5 - x, 1, 0) + 0.01'\n")
    assert main(["data-dependence", a, "--perturb", d]) == EXIT_OK
    rep = json.loads((work / "out/data_dependence.json").read_text())
    assert rep["ok"] and rep["kind"] == "data"
    bad = write(work / "e.toml", "[problem]\nf = 'u'\n")
    assert main(["data-dependence", a, "--perturb", bad]) == EXIT_CONFIG


def test_config_defaults(work):
    cfg = load_config(write(work / "c.toml", "[problem]\nf = 'u'\n"))
    assert cfg.N == 100 and cfg.cfl_fraction == 1.0 and cfg.quad_points == 3
    assert cfg.snapshot_times == [1.0] and cfg.audits["k_count"] == 21


@pytest.mark.skipif(shutil.which("balans") is None, reason="console script not installed")
def test_console_script(work):
    cfg = write(work / "a.toml", ADV)
    res = subprocess.run(["balans", "solve", cfg], capture_output=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "balans.cli", "solve", "missing.toml"], capture_output=True)
    assert res.returncode == EXIT_CONFIG
