import json
import math

import numpy as np
import pytest

from wide.cli import main
from wide.config import load_config, parse_config
from wide.runner import ENERGY_HEADER, emit_outputs, run_scenario

from conftest import CONFIGS

SMALL = """\
[scenario]
name = {name}

[grid]
kind = periodic
length = 2pi
n_points = 16
dt = 0.0125
t_obs = 1.0

[model]
{model}

[dissipation]
gamma = {gamma}

[data]
w0 = {w0}
w1 = zero

[schedule]
epsilons = 0.2, 0.1, 0.05

[minimizer]
max_outer = {max_outer}

[diagnostics]
energy_tol = {tol}

[output]
figures = false
"""


def small(name="small", model="term1 = dirichlet lam=1", gamma=0.0, w0="cos_mode k=1 a=1",
          max_outer=60, tol=0.02):
    return SMALL.format(name=name, model=model, gamma=gamma, w0=w0, max_outer=max_outer, tol=tol)


def _walk_numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _walk_numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _walk_numbers(v)
    elif isinstance(obj, float):
        yield obj


def test_zero_data_report():
    rep = run_scenario(parse_config(small(w0="zero")))
    assert rep.passed
    for _, u in rep.continuation.minimizers:
        np.testing.assert_array_equal(u, 0.0)
    for d in rep.diagnostics:
        assert all(v.passed for v in d.verdicts)
        np.testing.assert_array_equal(d.series("mechanical").values, 0.0)


def test_linear_wave_structure():
    rep = run_scenario(parse_config(small()))
    summary = rep.summary()
    assert set(summary) >= {"scenario", "schema_version", "config_echo", "continuation",
                            "diagnostics", "comparisons", "timings"}
    assert len(summary["continuation"]["cauchy_diffs"]) == 2
    assert "exact_linear_wave" in summary["comparisons"]
    assert "ode_reduction" not in summary["comparisons"]
    assert all(math.isfinite(x) for x in _walk_numbers(summary))
    assert parse_config(summary["config_echo"]["text"]) == rep.config


def test_suite_linear_wave_has_three_diffs():
    rep = run_scenario(load_config(CONFIGS / "linear_wave.cfg"))
    assert len(rep.continuation.cauchy_diffs) == 3


def test_nlw_has_leapfrog_per_epsilon():
    rep = run_scenario(parse_config(small(model="preset = conjecture p=4")))
    rows = rep.comparisons["leapfrog"]["per_epsilon"]
    assert [r["epsilon"] for r in rows] == [0.2, 0.1, 0.05]
    assert "exact_linear_wave" not in rep.comparisons


def test_constant_data_gets_ode_reference():
    rep = run_scenario(parse_config(small(model="preset = conjecture p=2", w0="constant c=1")))
    assert len(rep.comparisons["ode_reduction"]["per_epsilon"]) == 3


def test_outputs_and_determinism(tmp_path):
    cfg = parse_config(small())
    a, b = tmp_path / "a", tmp_path / "b"
    files_a = emit_outputs(run_scenario(cfg), a)
    emit_outputs(run_scenario(cfg), b)
    names = sorted(p.name for p in files_a)
    assert names == sorted(["cauchy.csv", "report.json"] + [f"{s}_{e}.csv" for s in ("energy", "solution", "residuals")
                                                           for e in ("0.2", "0.1", "0.05")])
    for name in names:
        if name.endswith(".csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert (a / "energy_0.05.csv").read_text().splitlines()[0] == ENERGY_HEADER
    assert len((a / "cauchy.csv").read_text().splitlines()) == 1 + 2
    report = json.loads((a / "report.json").read_text())
    assert report["schema_version"] == "1.0"
    sol = np.loadtxt(a / "solution_0.05.csv", delimiter=",", skiprows=1)
    assert sol.shape == (81 * 16, 3)


def test_figures_written(tmp_path):
    rep = run_scenario(parse_config(small()))
    files = emit_outputs(rep, tmp_path, figures=True)
    for name in ("energy.png", "solution.png", "cauchy.png"):
        assert (tmp_path / name) in files and (tmp_path / name).stat().st_size > 1000


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rep = run_scenario(parse_config(small(w0="zero")))
    with pytest.raises(OSError, match="file"):
        emit_outputs(rep, blocker / "sub")


@pytest.fixture
def cfg_dir(tmp_path):
    d = tmp_path / "cfgs"
    d.mkdir()
    return d


def test_cli_exit_codes(cfg_dir, tmp_path, capsys):
    ok = cfg_dir / "ok.cfg"
    ok.write_text(small(name="ok", w0="zero"))
    fail = cfg_dir / "fail.cfg"
    fail.write_text(small(name="fail", tol=0.0))
    bad = cfg_dir / "bad.cfg"
    bad.write_text(small(name="bad").replace("n_points = 16", "n_points = 2"))
    broken = cfg_dir / "broken.cfg"
    broken.write_text(small(name="broken", max_outer=0))

    out = tmp_path / "out"
    assert main(["run", str(ok), "--out", str(out / "ok")]) == 0
    assert (out / "ok" / "report.json").exists()
    assert main(["run", str(fail), "--out", str(out / "fail")]) == 1
    assert main(["run", str(bad), "--out", str(out / "bad")]) == 2
    assert "line 7" in capsys.readouterr().err
    assert main(["run", str(broken), "--out", str(out / "broken")]) == 3
    assert main(["check", str(ok)]) == 0
    assert main(["check", str(bad)]) == 2


def test_cli_suite_table(cfg_dir, tmp_path, capsys):
    (cfg_dir / "a.cfg").write_text(small(name="alpha", w0="zero"))
    (cfg_dir / "b.cfg").write_text(small(name="beta"))
    code = main(["suite", str(cfg_dir), "--out", str(tmp_path / "o"), "--jobs", "2", "--no-figures"])
    text = capsys.readouterr().out
    assert code == 0
    assert "alpha" in text and "beta" in text and "pass" in text
    assert (tmp_path / "o" / "beta" / "cauchy.csv").exists()


def test_cli_suite_errors(tmp_path):
    assert main(["suite", str(tmp_path / "missing")]) == 2
    assert main(["suite", str(tmp_path)]) == 2
