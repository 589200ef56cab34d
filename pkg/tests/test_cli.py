import csv
import json
import os

import numpy as np
import pytest

from dispersive_lab.cli import Settings, _parse_list, emit_report, experiment_config, main, run
from dispersive_lab.errors import ConfigError, EmptyReport
from dispersive_lab.experiments import ExperimentConfig, ExperimentResult, fit_power_law


def _write(path, text):
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _synthetic(name, exponent, target=-0.5):
    x = np.geomspace(10, 1000, 6)
    fit = fit_power_law(np.column_stack([x, 2 * x**exponent]))
    cfg = ExperimentConfig(name=name, kind="decay", a=0.5, t_list=tuple(x), target=target)
    return ExperimentResult(cfg, fit, cfg.passes(fit.exponent))


# --------------------------------------------------------------------------
# configuration parsing
# --------------------------------------------------------------------------

def test_missing_config_exits_one(tmp_path, capsys):
    code = main(["jacobian", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_unknown_bundled_config_exits_one(tmp_path):
    assert main(["jacobian", "--config", "bundled:nope", "--out", str(tmp_path)]) == 1


def test_usage_error_exits_one(tmp_path):
    assert main(["jacobian"]) == 1
    assert main(["no-such-command"]) == 1


def test_bad_number_reports_line_and_field(tmp_path, capsys):
    cfg = _write(tmp_path / "c.ini", "[jacobian]\na_list = 2\ny_list = 1, oops\n")
    assert run("jacobian", cfg, out=str(tmp_path / "o")) == 1
    err = capsys.readouterr().err
    assert "line 3" in err and "y_list" in err


def test_override_splits_on_last_dot(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[experiment.one]\nkind = decay\na = 0.5\n")
    s = Settings.load(cfg, ["experiment.one.a=2", "experiment.one.t_list=geom:1:8:4"])
    assert s.number("experiment.one", "a") == 2.0
    assert s.numbers("experiment.one", "t_list") == pytest.approx((1, 2, 4, 8))


@pytest.mark.parametrize("bad", ["novalue", "=3", "section=3", ".key=3"])
def test_malformed_override_rejected(tmp_path, bad):
    cfg = _write(tmp_path / "c.ini", "[a]\nb = 1\n")
    with pytest.raises(ConfigError):
        Settings.load(cfg, [bad])


def test_list_syntax():
    assert _parse_list("1, 2.5,2^-3") == (1.0, 2.5, 0.125)
    assert _parse_list("geom:1:100:3") == pytest.approx((1, 10, 100))
    for bad in ("", "geom:0:1:3", "geom:1:2", "1, nan"):
        with pytest.raises(ValueError):
            _parse_list(bad)


def test_unknown_experiment_key_rejected(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[experiment.x]\nkind = decay\na = 0.5\nt_list = 1,2,3,4\ncolour = red\n")
    with pytest.raises(ConfigError, match="colour"):
        experiment_config(Settings.load(cfg), "experiment.x")


def test_invalid_experiment_value_is_config_error(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[experiment.x]\nkind = sideways\na = 0.5\nt_list = 1,2,3,4\n")
    with pytest.raises(ConfigError, match="sideways"):
        experiment_config(Settings.load(cfg), "experiment.x")


def test_digest_ignores_formatting(tmp_path):
    a = _write(tmp_path / "a.ini", "[s]\nx = 1\ny = 2\n")
    b = _write(tmp_path / "b.ini", "# comment\n[s]\ny = 2\n\nx = 1\n")
    assert Settings.load(a).digest() == Settings.load(b).digest()
    assert Settings.load(a, ["s.x=3"]).digest() != Settings.load(a).digest()


# --------------------------------------------------------------------------
# pipelines
# --------------------------------------------------------------------------

def test_jacobian_a2_min_is_one(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[jacobian]\na = 2\ny_list = 1\n")
    out = tmp_path / "o"
    assert run("jacobian", cfg, out=str(out)) == 0
    text = (out / "jacobian.csv").read_text()
    assert text.startswith("# tool=dispersive-lab")
    assert "config_sha256=" in text
    (row,) = _rows(out / "jacobian.csv")
    assert float(row["min_value"]) == pytest.approx(1.0, rel=1e-8)


def test_jacobian_failure_exits_two_with_true_argmin(tmp_path, capsys):
    cfg = _write(tmp_path / "c.ini", "[jacobian]\na = 3\ny_list = 1\n")
    assert run("jacobian", cfg, out=str(tmp_path / "o")) == 2
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    (fail,) = report["failures"]
    assert fail["check"] == "jacobian_endpoint"
    assert fail["argmin"] == pytest.approx(-1.0, abs=1e-6)
    assert fail["min_value"] == pytest.approx(0.620403, rel=1e-5)


def test_propagate_and_sharpness_pass(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[propagate]\nn = 1024\nxi_max = 30\ntimes = 1, 50\n"
                                     "[sharpness]\na = 2\ny_list = 1\n")
    out = tmp_path / "o"
    assert run("propagate", cfg, out=str(out)) == 0
    assert {"propagate.csv", "snapshot_t1.csv", "snapshot_t50.csv"} <= set(os.listdir(out))
    assert run("sharpness", cfg, out=str(out)) == 0
    doc = json.loads((out / "sharpness.json").read_text())
    assert doc["lhs"] == pytest.approx(doc["rhs"], rel=1e-6)


def test_kernel_fresnel_only(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[kernel]\nx_list = 0.01, 1, 100\n")
    out = tmp_path / "o"
    assert run("kernel", cfg, out=str(out)) == 0
    rows = _rows(out / "fresnel.csv")
    assert len(rows) == 3 and all(float(r["abs_k2"]) <= 8 for r in rows)


def test_lowfreq_threshold(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[lowfreq]\ngamma = -0.2\nq_list = 3, 4\n")
    out = tmp_path / "o"
    assert run("lowfreq", cfg, out=str(out)) == 0
    rows = _rows(out / "lq.csv")
    assert [r["convergent"] for r in rows] == ["false", "true"]


def test_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[jacobian]\na_list = 0.5, 2\ny_list = 0.5, 1\n")
    run("jacobian", cfg, out=str(tmp_path / "a"))
    run("jacobian", cfg, out=str(tmp_path / "b"))
    assert (tmp_path / "a" / "jacobian.csv").read_bytes() == (tmp_path / "b" / "jacobian.csv").read_bytes()


def test_unwritable_output_exits_one(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[jacobian]\na = 2\ny_list = 1\n")
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("jacobian", cfg, out=str(blocker / "sub")) == 1


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def test_emit_report_empty_raises(tmp_path):
    with pytest.raises(EmptyReport):
        emit_report([], str(tmp_path), {}, {})


def test_emit_report_two_experiments(tmp_path):
    results = [_synthetic("first", -0.5), _synthetic("second", -0.3)]
    written = emit_report(results, str(tmp_path), {"s": {"k": "v"}}, {"tool": "x"})
    assert sorted(os.listdir(tmp_path)) == ["first.csv", "report.json", "second.csv"]
    assert written == ["first.csv", "second.csv", "report.json"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["artifacts"] == ["first.csv", "second.csv"]
    assert [f["pass"] for f in doc["fits"]] == [True, False]
    assert doc["fits"][0]["exponent"] == pytest.approx(-0.5, abs=1e-12)
    rows = _rows(tmp_path / "first.csv")
    assert len(rows) == 6


def test_emit_report_byte_identical(tmp_path):
    results = [_synthetic("first", -0.5)]
    for sub in ("a", "b"):
        os.makedirs(tmp_path / sub)
        emit_report(results, str(tmp_path / sub), {"s": {}}, {"tool": "x"})
    for name in ("first.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_merges_inputs(tmp_path, capsys):
    for name, e in (("one", -0.5), ("two", -0.3)):
        os.makedirs(tmp_path / name)
        emit_report([_synthetic(name, e)], str(tmp_path / name), {}, {"config_sha256": name})
    cfg = _write(tmp_path / "r.ini", "[report]\ninputs = one/report.json, two/report.json\n")
    assert run("report", cfg, out=str(tmp_path / "merged")) == 2
    doc = json.loads((tmp_path / "merged" / "report.json").read_text())
    assert doc["artifacts"] == ["one/one.csv", "two/two.csv"]
    assert [f["name"] for f in doc["fits"]] == ["one", "two"]
    assert "two" in capsys.readouterr().out


def test_report_missing_input_exits_one(tmp_path):
    cfg = _write(tmp_path / "r.ini", "[report]\ninputs = absent.json\n")
    assert run("report", cfg, out=str(tmp_path / "o")) == 1


def test_experiment_subcommand_small(tmp_path):
    cfg = _write(tmp_path / "c.ini", "[experiment.lin]\nkind = decay\na = 0.5\ncurve = linear\n"
                                     "t_list = geom:10:1000:6\ntarget = -0.5\ntolerance = 0.05\n")
    out = tmp_path / "o"
    assert run("experiment", cfg, out=str(out), threads=2) == 0
    assert sorted(os.listdir(out)) == ["lin.csv", "report.json"]
    doc = json.loads((out / "report.json").read_text())
    assert doc["config"]["experiment.lin"]["curve"] == "linear"
