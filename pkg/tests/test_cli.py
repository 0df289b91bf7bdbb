import csv
import json
import math

import pytest

from cli import main
from stochastic import probabilistic_remainder

SMOOTH_PATH = {"kind": "smooth", "family": "linear", "scales": [1.0], "horizon": 1.0, "grid_size": 65}
LINEAR_SYSTEM = {"x0": [1.0], "fields": [{"kind": "zero"}, {"kind": "linear", "matrix": [[1.0]]}]}


def _write(tmp_path, payload, name="config.json"):
    target = tmp_path / name
    target.write_text(json.dumps(payload), encoding="utf-8")
    return target


def _rows(filename):
    with open(filename, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def test_expand_reproduces_linear_levels(tmp_path):
    config = _write(tmp_path, {
        "experiment": "expand",
        "path": SMOOTH_PATH,
        "system": LINEAR_SYSTEM,
        "parameters": {"k_max": 3},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["outputs"] == ["coefficients.csv", "levels.csv"]
    assert manifest["experiment"] == "expand"
    assert manifest["config"]["parameters"]["k_max"] == 3

    coefficients = _rows(out / "coefficients.csv")
    assert coefficients[0] == ["word", "j", "value"]
    assert ["1-1", "1", "1"] in coefficients
    assert ["0-1", "1", "0"] in coefficients

    levels = _rows(out / "levels.csv")
    assert levels[0] == ["k", "t", "j", "value"]
    assert len(levels) == 1 + 3 * 65
    for k, t, _, value in levels[1:]:
        # g_k = y^k / k! with y = t
        assert float(value) == pytest.approx(float(t) ** int(k) / math.factorial(int(k)), abs=1e-4)
    assert (out / "levels.csv").read_bytes().count(b"\r") == 0


def test_compare_writes_one_row_per_time_and_order(tmp_path):
    config = _write(tmp_path, {
        "experiment": "compare",
        "path": SMOOTH_PATH,
        "system": LINEAR_SYSTEM,
        "parameters": {"N": 3, "k_max": 3, "M": 1.0, "gamma": 0.0, "time_points": 4},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    rows = _rows(out / "compare.csv")
    assert rows[0] == ["t", "N", "error", "bound", "closed_form", "inside_window"]
    assert len(rows) == 1 + 4 * 3
    for _, _, error, bound, closed_form, inside in rows[1:]:
        assert inside == "true"
        assert float(error) <= float(bound) <= float(closed_form)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["convergence_window"]["crossed"] is False
    assert "tails.csv" not in manifest["outputs"]


def test_invalid_alpha_is_reported(tmp_path):
    config = _write(tmp_path, {
        "experiment": "bound",
        "path": SMOOTH_PATH,
        "system": LINEAR_SYSTEM,
        "parameters": {"alpha": 0.5},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) != 0
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["error"] == "ConfigError"
    assert "alpha" in record["message"]
    assert not (out / "manifest.json").exists()


def test_json_syntax_error_reports_position(tmp_path):
    config = tmp_path / "broken.json"
    config.write_text('{"experiment": "solve",\n  "path": }\n', encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 2
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["line"] == 2
    assert record["column"] == 11


def test_domain_error_during_run_leaves_error_record(tmp_path):
    path = dict(SMOOTH_PATH, beta_hint=0.6)
    config = _write(tmp_path, {
        "experiment": "bound",
        "path": path,
        "system": LINEAR_SYSTEM,
        "parameters": {"alpha": 0.25},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 1
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["experiment"] == "bound"
    assert record["error"] == "DomainError"


def test_validate_prints_normalized_config(tmp_path, capsys):
    config = _write(tmp_path, {"experiment": "solve", "path": SMOOTH_PATH, "system": LINEAR_SYSTEM})
    assert main(["validate", "--config", str(config)]) == 0
    echoed = json.loads(capsys.readouterr().out)
    assert echoed["parameters"]["alpha"] == 0.25
    assert echoed["parameters"]["scheme"] == "trapezoid"

    missing = _write(tmp_path, {"experiment": "solve", "path": SMOOTH_PATH}, name="missing.json")
    assert main(["validate", "--config", str(missing)]) == 2
    assert "system" in capsys.readouterr().err


def test_bad_thread_count(tmp_path):
    config = _write(tmp_path, {"experiment": "solve", "path": SMOOTH_PATH, "system": LINEAR_SYSTEM})
    assert main(["run", "--config", str(config), "--threads", "0", "--out", str(tmp_path / "out")]) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("YOUNG_TAYLOR_OUTPUT_DIR", str(target))
    config = _write(tmp_path, {
        "experiment": "solve",
        "path": SMOOTH_PATH,
        "system": LINEAR_SYSTEM,
        "output_dir": str(tmp_path / "from-config"),
    })
    assert main(["run", "--config", str(config)]) == 0
    assert (target / "solution.csv").is_file()
    assert not (tmp_path / "from-config").exists()


def test_solve_with_plot(tmp_path):
    pytest.importorskip("matplotlib")
    config = _write(tmp_path, {"experiment": "solve", "path": SMOOTH_PATH, "system": LINEAR_SYSTEM})
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out), "--plot"]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["outputs"] == ["solution.csv", "solution.png"]
    assert manifest["picard"]["defect"] < 1e-9
    rows = _rows(out / "solution.csv")
    assert rows[0] == ["t", "x1"]
    assert float(rows[-1][1]) == pytest.approx(math.e, rel=1e-4)


def test_magnus_and_mc_l2_runs(tmp_path):
    fbm = {"kind": "fbm", "hurst": 0.75, "dimension": 2, "horizon": 0.5, "grid_size": 65, "seed": 4}
    heisenberg = {"generators": [[[0, 1, 0], [0, 0, 0], [0, 0, 0]], [[0, 0, 0], [0, 0, 1], [0, 0, 0]]]}
    magnus = _write(tmp_path, {"experiment": "magnus", "path": fbm, "lie": heisenberg,
                               "parameters": {"k_max": 2}}, name="magnus.json")
    assert main(["run", "--config", str(magnus), "--out", str(tmp_path / "magnus")]) == 0
    manifest = json.loads((tmp_path / "magnus" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["magnus"]["max_picard_error"] < 1e-10
    assert "magnus_check.csv" in manifest["outputs"]

    mc = _write(tmp_path, {
        "experiment": "mc-l2",
        "path": dict(fbm, dimension=1, grid_size=33),
        "system": LINEAR_SYSTEM,
        "monte_carlo": {"replicates": 120, "words": [[1], [1, 1]], "orders": [1, 2]},
    }, name="mc.json")
    assert main(["run", "--config", str(mc), "--out", str(tmp_path / "mc")]) == 0
    manifest = json.loads((tmp_path / "mc" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["outputs"] == ["l2.csv", "truncation.csv"]
    assert manifest["seeds"] == list(range(4, 124))
    assert manifest["l2"]["all_passed"] is True


def test_mc_l2_truncation_bound_uses_fitted_growth(tmp_path):
    fbm = {"kind": "fbm", "hurst": 0.75, "dimension": 1, "horizon": 0.5, "grid_size": 33, "seed": 4}
    system = {"x0": [1.0], "fields": [{"kind": "zero"}, {"kind": "linear", "matrix": [[3.0]]}]}
    config = _write(tmp_path, {
        "experiment": "mc-l2",
        "path": fbm,
        "system": system,
        "monte_carlo": {"replicates": 60, "words": [[1]], "orders": [1, 2, 3]},
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    fit = manifest["growth_fit"]
    # P_(1...1) = 3^k, so M = 1 would understate every coefficient
    assert fit["M"] == pytest.approx(3.0)
    assert fit["gamma"] == 0.0
    assert fit["admissible"] is True
    assert fit["convention"] == "factorial"

    t = manifest["l2"]["t"]
    rows = _rows(out / "truncation.csv")
    assert rows[0] == ["N", "rms", "rms_upper", "bound", "pass"]
    for N, _, _, bound, _ in rows[1:]:
        expected = probabilistic_remainder(int(N), t, 0.75, 3.0, 0.0, 1, "l2").value
        assert float(bound) == pytest.approx(expected, rel=1e-12)


def test_unexpected_error_returns_nonzero(tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text("t,y1\n0.0,0.0\n0.5,not-a-number\n1.0,1.0\n", encoding="utf-8")
    config = _write(tmp_path, {
        "experiment": "solve",
        "path": {"kind": "file", "file": str(broken)},
        "system": LINEAR_SYSTEM,
    })
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 1
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["experiment"] == "solve"
    assert record["error"] == "ValueError"


def test_reruns_are_byte_identical(tmp_path):
    fbm = {"kind": "fbm", "hurst": 0.75, "dimension": 1, "horizon": 0.5, "grid_size": 129, "seed": 3,
           "beta_hint": 0.9}
    config = _write(tmp_path, {
        "experiment": "compare",
        "path": fbm,
        "system": dict(LINEAR_SYSTEM, C=2.0),
        "parameters": {"N": 3, "k_max": 3, "M": 1.0, "gamma": 0.0},
    })
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", "--config", str(config), "--out", str(first)]) == 0
    assert main(["run", "--config", str(config), "--out", str(second), "--threads", "2"]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    assert "tails.csv" in names
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()
