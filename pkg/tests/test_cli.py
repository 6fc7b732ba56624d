import csv
import io
import json
import math

import pytest

from ambigg import cli
from ambigg.errors import ConfigError, ConvergenceError


def run(argv):
    buf = io.StringIO()
    code = cli.main(argv, out=buf)
    return code, buf.getvalue()


def write_cfg(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


LINEAR_ONE = """
[model]
preset = linear

[prior]
eta = 2
y = 0.52

[ambiguity]
xi_lo = 0.56
xi_hi = 1.1
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_one_equilibrium_writes_outputs(tmp_path):
    cfg = write_cfg(tmp_path, LINEAR_ONE)
    code, text = run(["solve", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    assert "equilibria: 1" in text
    doc = json.loads((tmp_path / "solve.json").read_text())
    assert len(doc["cutoffs"]) == 1
    assert doc["cutoffs"][0] == pytest.approx(0.3577492770637778, abs=1e-9)
    assert (tmp_path / "solve.txt").read_text() == text


def test_solve_three_equilibria_from_flags(tmp_path):
    code, text = run(["solve", "--preset", "linear", "--eta", "2", "--y", "0.48", "--ambiguity.xi", "0.37"])
    assert code == 0
    assert "equilibria: 3" in text


def test_broken_model_exits_2_and_names_assumption(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        "[model]\npreset = custom\nu1_l = -1\n[prior]\neta = 2\ny = 0.5\n[ambiguity]\nxi_lo = 1\nxi_hi = 2\n",
    )
    code, text = run(["solve", "--config", cfg])
    assert code == 2
    assert "assumption A1 failed" in text


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINEAR_ONE + "\n[solver]\ntol = 1e-10\nmethod = newton\n")
    code, _ = run(["solve", "--config", cfg])
    assert code == 2
    err = capsys.readouterr().err
    assert f"{cfg}:15:" in err and "method" in err


def test_load_config_rejects_bad_values(tmp_path):
    cfg = write_cfg(tmp_path, LINEAR_ONE + "\n[solver]\ngrid = many\n")
    with pytest.raises(ConfigError):
        cli.load_config(cfg)
    with pytest.raises(ConfigError):
        cli.load_config(write_cfg(tmp_path, "[nonsense]\na = 1\n", "b.ini"))
    with pytest.raises(ConfigError):
        cli.load_config(None, {"ambiguity.xi": "1", "ambiguity.xi_lo": "0.5"}).ambiguity_set()


def test_ambiguous_bare_flag_rejected():
    with pytest.raises(ConfigError):
        cli._split_overrides(["--xi", "1", "--theta"])
    assert cli._split_overrides(["--crisis.xi=2", "--lam", "0.4"]) == {"crisis.xi": "2", "crisis.lam": "0.4"}


def test_unknown_figure_id(capsys):
    code, _ = run(["figure", "fig9"])
    assert code == 2


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("no bracket")

    monkeypatch.setattr(cli.eq, "equilibrium_cutoffs", boom)
    code, _ = run(["solve", "--config", write_cfg(tmp_path, LINEAR_ONE)])
    assert code == 3


def test_validate_command(tmp_path):
    code, text = run(["validate", "--config", write_cfg(tmp_path, LINEAR_ONE)])
    assert code == 0 and "A5: pass" in text


def test_figure_is_deterministic(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run(["figure", "fig2b", "--out", str(a)])[0] == 0
    monkeypatch.setenv("AMBIGG_THREADS", "2")
    assert run(["figure", "fig2b", "--out", str(b)])[0] == 0
    for name in ("fig2b_xi_1.csv", "fig2b_xi_2.csv", "fig2b.gp"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = read_csv(a / "fig2b_xi_1.csv")
    assert rows[0].keys() == {"kappa", "value", "curve_label"}
    assert all(r["curve_label"] == "xi_1" for r in rows)


DEBT_SWEEP = """
[model]
preset = debt
lam = 0.4

[ambiguity]
xi_lo = 1

[crisis]
theta = 0.45
xi = 2
sweep = xi_hi
sweep_from = 1.5
sweep_to = 400
sweep_n = 12
"""


def test_crisis_sweep_flips_once(tmp_path):
    code, text = run(["crisis", "--config", write_cfg(tmp_path, DEBT_SWEEP), "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "crisis.csv")
    occurs = [r["occurs"] == "true" for r in rows]
    assert not occurs[0] and occurs[-1]
    assert sum(a != b for a, b in zip(occurs, occurs[1:])) == 1
    assert "theta_bar" in text


def test_crisis_lam_sweep_marks_half_degenerate(tmp_path):
    text = DEBT_SWEEP.replace("sweep = xi_hi", "sweep = lam").replace("sweep_from = 1.5", "sweep_from = 0.3")
    text = text.replace("sweep_to = 400", "sweep_to = 0.7").replace("sweep_n = 12", "sweep_n = 5\nsweep_scale = linear")
    text = text.replace("xi_lo = 1", "xi_lo = 1\nxi_hi = 4")
    code, out = run(["crisis", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "crisis.csv")
    assert [r["occurs"] for r in rows][2] == "degenerate"
    assert math.isnan(float(rows[2]["kstar"]))


def test_currency_width_sweep(tmp_path):
    text = """
[model]
preset = currency

[crisis]
theta = 0.6
xi = 2
sweep = width
sweep_from = 0
sweep_to = 2
sweep_n = 5
sweep_scale = linear
"""
    code, _ = run(["crisis", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path)])
    assert code == 0
    ts = [float(r["theta_star"]) for r in read_csv(tmp_path / "crisis.csv")]
    assert all(b <= a + 1e-12 for a, b in zip(ts, ts[1:]))


def test_deletion_command(tmp_path):
    code, text = run(["deletion", "--config", write_cfg(tmp_path, LINEAR_ONE), "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "deletion.csv")
    assert float(rows[-1]["width"]) < 1e-8
    assert "converged=True" in text


def test_tol_flag_overrides_config(tmp_path):
    cfg = cli.load_config(write_cfg(tmp_path, LINEAR_ONE + "\n[solver]\ntol = 1e-6\n"), {"solver.tol": "1e-11"})
    assert cfg.tol == 1e-11
