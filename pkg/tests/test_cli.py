import csv
import json
import subprocess
import sys

import pytest

from tumorstrip.cli import EXIT_CONFIG, EXIT_EARLY, EXIT_MODEL, EXIT_OK, EXIT_TOLERANCE, fmt, main
from tumorstrip.config import ConfigError, parse, resolve

REF = {"mu": 1, "sigma_tilde": 1, "sigma_bar_1": 2, "sigma_bar_2": 3, "gamma": 1}
SMALL_GRID = {"nx": 16, "ny": 16}


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


def run(tmp_path, command, doc, out="out"):
    cfg = write(tmp_path, doc)
    code = main([command, "--config", str(cfg), "--out", str(tmp_path / out)])
    return code, tmp_path / out


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


# configuration ---------------------------------------------------------------


def test_minimal_config_gets_defaults():
    cfg = resolve({"params": REF})
    assert cfg["grid"]["nx"] == 64 and cfg["grid"]["ny"] == 64
    assert cfg["evolve"]["dt"] == "auto"
    assert cfg["params"]["gamma"] == 1.0


@pytest.mark.parametrize(
    "doc,fragment",
    [
        ({"params": {**REF, "sigma3": 1}}, "sigma3"),
        ({"params": REF, "extra": {}}, "extra"),
        ({"params": REF, "grid": {"nz": 3}}, "nz"),
        ({"params": REF, "evolve": {"perturbation": {"kk": 1}}}, "kk"),
        ({"grid": {}}, "params"),
        ({"params": {k: v for k, v in REF.items() if k != "mu"}}, "mu"),
        ({"params": {**REF, "gamma": "one"}}, "gamma"),
        ({"params": REF, "grid": {"nx": 15}}, "nx"),
        ({"params": REF, "grid": {"order": 3}}, "order"),
        ({"params": REF, "spectrum": {"ny_oracle": 100}}, "ny_oracle"),
        ({"params": REF, "evolve": {"stepper": "euler"}}, "stepper"),
        ({"params": REF, "evolve": {"tracked_modes": [1, 1]}}, "tracked_modes"),
        ({"params": REF, "evolve": {"dt": -1}}, "dt"),
        ({"params": REF, "threshold": {"k_scan": 1.5}}, "k_scan"),
        ({"params": REF, "spectrum": {"oracle": 1}}, "oracle"),
        ([1, 2], "object"),
    ],
)
def test_invalid_documents(doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        resolve(doc)


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity", "1e999"])
def test_non_finite_numbers_rejected(token):
    text = '{"params": {"mu": 1, "sigma_tilde": 1, "sigma_bar_1": 2, "sigma_bar_2": 3, "gamma": %s}}' % token
    with pytest.raises(ConfigError):
        parse(text)


def test_syntax_error_reports_position():
    with pytest.raises(ConfigError, match="line 2"):
        parse('{"params":\n  {"mu": 1,,}}')


# exit codes ----------------------------------------------------------------


def test_exit_1_unknown_key(tmp_path, capsys):
    code, out = run(tmp_path, "stationary", {"params": {**REF, "sigma3": 2}})
    assert code == EXIT_CONFIG
    assert "sigma3" in capsys.readouterr().err
    assert not out.exists()


def test_exit_1_non_finite_gamma(tmp_path):
    text = json.dumps({"params": REF}).replace('"gamma": 1', '"gamma": NaN')
    code, _ = run(tmp_path, "spectrum", text)
    assert code == EXIT_CONFIG


def test_exit_1_missing_file(tmp_path):
    assert main(["stationary", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_exit_1_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("TUMORSTRIP_THREADS", "zero")
    code, _ = run(tmp_path, "stationary", {"params": REF})
    assert code == EXIT_CONFIG


def test_thread_setting_is_honoured(tmp_path, monkeypatch):
    monkeypatch.setenv("TUMORSTRIP_THREADS", "1")
    code, _ = run(tmp_path, "stationary", {"params": REF})
    assert code == EXIT_OK


@pytest.mark.parametrize("command", ["stationary", "spectrum", "threshold", "evolve"])
def test_exit_2_alpha_out_of_range_writes_nothing(tmp_path, capsys, command):
    code, out = run(tmp_path, command, {"params": {**REF, "sigma_bar_1": 0.5, "sigma_bar_2": 1.0}})
    assert code == EXIT_MODEL
    err = capsys.readouterr().err
    assert "alpha" in err and "exceed 2" in err
    assert err.count("\n") == 1
    assert not out.exists()


def test_exit_2_negative_parameter(tmp_path):
    code, out = run(tmp_path, "stationary", {"params": {**REF, "mu": -1}})
    assert code == EXIT_MODEL
    assert not out.exists()


def test_exit_3_on_tolerance_failure(tmp_path, capsys):
    doc = {"params": REF, "threshold": {"tol": 1e-17}}
    code, _ = run(tmp_path, "threshold", doc)
    assert code == EXIT_TOLERANCE
    assert "bracket" in capsys.readouterr().err


def test_exit_4_when_the_run_stops_early(tmp_path):
    doc = {
        "params": REF,
        "grid": SMALL_GRID,
        "evolve": {"t_end": 1e9, "dt": 1e8, "perturbation": {"eps": 2.0}},
    }
    code, out = run(tmp_path, "evolve", doc)
    assert code == EXIT_EARLY
    summary = json.loads((out / "decay.json").read_text())
    assert summary["termination"] == "step-collapse"
    assert (out / "evolve.csv").read_text().startswith("# termination: step-collapse")


# outputs -------------------------------------------------------------------


def test_stationary_outputs(tmp_path):
    code, out = run(tmp_path, "stationary", {"params": REF, "stationary": {"samples": 3}})
    assert code == EXIT_OK
    data = json.loads((out / "stationary.json").read_text())
    assert data["f_alpha_residual"] <= 1e-12
    assert data["rho_star"] == pytest.approx(4.928119358173284, rel=1e-14)
    assert data["config"]["stationary"]["samples"] == 3
    rows = read_csv(out / "stationary_profiles.csv")
    assert rows[0] == ["y", "sigma_star", "p_star"]
    assert len(rows) == 4
    assert float(rows[1][1]) == 2.0 and float(rows[-1][1]) == 3.0
    assert (out / "stationary_profiles.csv").read_text().startswith("# config: resolved_config.json")
    assert json.loads((out / "resolved_config.json").read_text()) == data["config"]


def test_spectrum_outputs(tmp_path):
    code, out = run(tmp_path, "spectrum", {"params": REF})
    assert code == EXIT_OK
    summary = json.loads((out / "spectrum_summary.json").read_text())
    assert summary["all_positive"] is True
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == ["k", "lambda_k", "lambda_oracle", "rel_err", "tail_ratio"]
    assert len(rows) == 102
    for r in rows[1:10]:
        assert float(r[3]) <= 1e-5
    assert rows[10][2] == "" and rows[10][3] == ""
    assert rows[1][4] == ""


def test_spectrum_single_row(tmp_path):
    code, out = run(tmp_path, "spectrum", {"params": REF, "spectrum": {"k_max": 0, "oracle": False}})
    assert code == EXIT_OK
    assert len(read_csv(out / "spectrum.csv")) == 2


@pytest.mark.parametrize("k_scan,tol", [(200, 1e-8), (1, 1e-6)])
def test_threshold_outputs(tmp_path, k_scan, tol):
    code, out = run(tmp_path, "threshold", {"params": REF, "threshold": {"k_scan": k_scan, "tol": tol}})
    assert code == EXIT_OK
    data = json.loads((out / "threshold.json").read_text())
    assert data["gamma_min"] < 1.0
    assert data["bracket_hi"] - data["bracket_lo"] <= 2 * tol
    assert data["k_eff"] >= 1


def test_evolve_outputs(tmp_path):
    doc = {"params": REF, "grid": SMALL_GRID, "evolve": {"t_end": 0.3, "tracked_modes": [1, 2]}}
    code, out = run(tmp_path, "evolve", doc)
    assert code == EXIT_OK
    rows = read_csv(out / "evolve.csv")
    assert rows[0] == ["t", "volume", "volume_residual", "max_rho", "min_rho", "abs_a_1", "abs_b_1", "abs_a_2", "abs_b_2"]
    assert float(rows[-1][0]) == 0.3
    summary = json.loads((out / "decay.json").read_text())
    assert set(summary["modes"]) == {"1", "2"}
    assert summary["unstable_growth_observed"] is False
    for key in ("omega_fit", "lambda_predicted", "rel_dev", "r_squared"):
        assert key in summary["modes"]["1"]


def test_evolve_without_perturbation(tmp_path):
    doc = {"params": REF, "grid": SMALL_GRID, "evolve": {"t_end": 0.2, "perturbation": {"eps": 0.0}}}
    code, out = run(tmp_path, "evolve", doc)
    assert code == EXIT_OK
    rows = read_csv(out / "evolve.csv")[1:]
    assert max(float(r[5]) for r in rows) < 1e-12
    summary = json.loads((out / "decay.json").read_text())
    assert summary["modes"]["1"]["omega_fit"] is None
    assert "noise floor" in summary["modes"]["1"]["note"]


def test_evolve_reports_growth_below_threshold(tmp_path):
    doc = {"params": {**REF, "gamma": 1e-4}, "grid": SMALL_GRID, "evolve": {"t_end": 1.0}}
    code, out = run(tmp_path, "evolve", doc)
    assert code == EXIT_OK
    summary = json.loads((out / "decay.json").read_text())
    assert summary["unstable_growth_observed"] is True
    assert "unstable_growth_observed" in summary["note"]
    assert summary["modes"]["1"]["omega_fit"] < 0
    assert summary["modes"]["1"]["lambda_predicted"] < 0


def test_non_positive_initial_profile_is_a_config_error(tmp_path):
    doc = {"params": REF, "grid": SMALL_GRID, "evolve": {"perturbation": {"eps": 10.0}}}
    code, _ = run(tmp_path, "evolve", doc)
    assert code == EXIT_CONFIG


# determinism and formatting -------------------------------------------------

CASES = {
    "stationary": {"params": REF, "stationary": {"samples": 17}},
    "spectrum": {"params": REF, "spectrum": {"k_max": 20, "ny_oracle": 512}},
    "threshold": {"params": REF},
    "evolve": {"params": REF, "grid": SMALL_GRID, "evolve": {"t_end": 0.1}},
}


@pytest.mark.parametrize("command", sorted(CASES))
def test_outputs_are_byte_identical(tmp_path, command):
    c1, o1 = run(tmp_path, command, CASES[command], out="a")
    c2, o2 = run(tmp_path, command, CASES[command], out="b")
    assert c1 == c2 == EXIT_OK
    names = sorted(p.name for p in o1.iterdir())
    assert names == sorted(p.name for p in o2.iterdir())
    for name in names:
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes(), name


def test_float_format_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 123456789.125, -2.5e17):
        assert float(fmt(v)) == v
    assert fmt(None) == "" and fmt(3) == "3" and fmt(True) == "true"


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"params": REF})
    res = subprocess.run(
        [sys.executable, "-m", "tumorstrip", "stationary", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "stationary.json").exists()


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for name in ("stationary", "spectrum", "threshold", "evolve"):
        assert name in text
