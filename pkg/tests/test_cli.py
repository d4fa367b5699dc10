import importlib
import json

import pandas as pd
import pytest

from backend.errors import SchemaViolation, UsageError
from backend.settings import log_level_name
from backend.spatial_kernels import KernelFamily
from frontend.app import EXIT_NUMERICAL, EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, main, parse_config, run
from frontend.config_file import parse_config_text
from frontend.output import render_json, validate_document

HEAT_FILE = """
[kernel]
family = "heat"
alpha = 0.5
d = 1

[time]
hurst = 0.8
"""


# ---------------------------------------------------------
# PARSING
# ---------------------------------------------------------
def test_riesz_example_parses():
    config = parse_config(["existence", "--kernel", "riesz", "--alpha", "1", "--dim", "4",
                           "--hurst", "0.8"])
    assert config.kernel.family is KernelFamily.RIESZ
    assert config.kernel.d == 4 and config.hurst == 0.8
    assert config.format == "csv" and config.output is None


@pytest.mark.parametrize("argv, match", [
    ([], "missing command"),
    (["integrate"], "unknown command"),
    (["existence", "--kernel", "riesz", "--alpha", "5", "--dim", "3"], "0 < alpha < d"),
    (["existence", "--hurst", "0.4"], "Hurst index"),
    (["covariance", "--t1", "1.0"], "--t1 --x1"),
    (["verify", "--only", "everything"], "unknown checks"),
    (["norm", "--scan", "5:3"], "K0 < K1"),
    (["kernel", "--dim", "2", "--x", "1.0"], "2 coordinates"),
    (["norm", "--frobnicate"], "unrecognized"),
])
def test_usage_errors(argv, match):
    with pytest.raises(UsageError, match=match):
        parse_config(argv)


def test_config_file_values_and_flag_override():
    config = parse_config(["norm"], file_text=HEAT_FILE)
    assert config.kernel.family is KernelFamily.HEAT and config.hurst == 0.8
    config = parse_config(["norm", "--hurst", "0.9"], file_text=HEAT_FILE)
    assert config.hurst == 0.9 and config.kernel.alpha == 0.5


def test_config_file_from_disk(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(HEAT_FILE)
    assert parse_config(["norm", "--config", str(path)]).kernel.family is KernelFamily.HEAT


@pytest.mark.parametrize("text, match", [
    ("[kernel]\ncolour = 1\n", "unknown key"),
    ("[plots]\nwidth = 3\n", "unknown config section"),
    ("[grid]\ntimes = 2.5\n", "integer"),
    ("[quadrature]\nsingularity_split = 1\n", "true or false"),
    ("[kernel\n", "not valid TOML"),
])
def test_config_file_errors(text, match):
    with pytest.raises(UsageError, match=match):
        parse_config_text(text)


# ---------------------------------------------------------
# RUNS
# ---------------------------------------------------------
def test_existence_json(tmp_path):
    out = tmp_path / "existence.json"
    code = main(["existence", "--kernel", "riesz", "--alpha", "1", "--dim", "4", "--hurst", "0.8",
                 "--format", "json", "--output", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["success"] is True and doc["command"] == "existence"
    assert doc["result"]["admissible"] is True
    assert doc["result"]["threshold"] == 0.75
    assert doc["inputs"]["d"] == 4


def test_existence_table_csv(tmp_path):
    out = tmp_path / "table.csv"
    assert main(["existence", "--table", "--hurst", "0.8", "--output", str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.startswith("# command=existence\n")
    frame = pd.read_csv(out, comment="#")
    assert len(frame) == 14
    assert {"family", "d", "critical"} <= set(frame.columns)


def test_white_norm_below_threshold_exits_3(tmp_path, capsys):
    out = tmp_path / "norm.json"
    code = main(["norm", "--kernel", "white", "--dim", "3", "--hurst", "0.7", "--format", "json",
                 "--output", str(out)])
    assert code == EXIT_THRESHOLD
    assert not out.exists()
    err = capsys.readouterr().err
    err = json.loads(err[err.index("{"):])
    assert err["success"] is False and err["exit_code"] == EXIT_THRESHOLD


def test_usage_error_exits_1(capsys):
    assert main(["covariance"]) == EXIT_USAGE
    assert "error: covariance needs" in capsys.readouterr().err


def test_white_norm_csv(capsys):
    assert main(["norm", "--kernel", "white", "--dim", "1", "--hurst", "0.75"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "norm_squared.value" in out.splitlines()[-2]


def test_covariance_run(tmp_path):
    out = tmp_path / "cov.json"
    code = main(["covariance", "--kernel", "heat", "--alpha", "0.5", "--t1", "1.0", "--x1", "0.0",
                 "--t2", "0.5", "--x2", "1.0", "--format", "json", "--output", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["result"]["covariance"]["value"] > 0
    assert doc["result"]["covariance"]["converged"] is True


def test_simulation_is_reproducible_across_threads(tmp_path):
    argv = ["simulate", "--kernel", "heat", "--alpha", "0.5", "--grid-times", "2", "--grid-sites",
            "2", "--draws", "20", "--seed", "42"]
    one, many = tmp_path / "one.csv", tmp_path / "many.csv"
    assert main(argv + ["--threads", "1", "--output", str(one)]) == EXIT_OK
    assert main(argv + ["--threads", "3", "--output", str(many)]) == EXIT_OK
    assert one.read_bytes() == many.read_bytes()
    frame = pd.read_csv(one, comment="#")
    assert list(frame.columns) == ["draw", "stream_id", "t0_x0", "t0_x1", "t1_x0", "t1_x1"]
    assert len(frame) == 20


def test_verify_subset(tmp_path):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--only", "existence_table", "--output", str(out)]) == EXIT_OK
    frame = pd.read_csv(out, comment="#")
    assert frame["check"].tolist() == ["existence_table"]
    assert bool(frame["passed"].iloc[0])


def test_run_maps_config_to_exit_codes():
    config = parse_config(["norm", "--kernel", "riesz", "--alpha", "1", "--dim", "4",
                           "--hurst", "0.75"])
    assert run(config) == EXIT_THRESHOLD


# ---------------------------------------------------------
# JSON SCHEMA
# ---------------------------------------------------------
@pytest.mark.parametrize("argv", [
    ["existence", "--kernel", "poisson", "--alpha", "1", "--dim", "2", "--hurst", "0.8"],
    ["existence", "--table", "--hurst", "0.8"],
    ["kernel", "--kernel", "heat", "--alpha", "0.5", "--x", "1.0", "--xi", "1.0", "--t", "1.0",
     "--r", "0.25", "--s", "0.5"],
    ["kernel", "--kernel", "riesz", "--alpha", "1", "--dim", "2", "--xi", "1,0"],
    ["norm", "--kernel", "white", "--dim", "1", "--hurst", "0.75"],
    ["norm", "--kernel", "heat", "--alpha", "0.5", "--hurst", "0.8"],
    ["norm", "--kernel", "riesz", "--alpha", "1", "--dim", "4", "--hurst", "0.6", "--scan", "3:6"],
    ["covariance", "--kernel", "heat", "--alpha", "0.5", "--t1", "1.0", "--x1", "0.0",
     "--t2", "0.5", "--x2", "1.0"],
    ["simulate", "--kernel", "heat", "--alpha", "0.5", "--grid-times", "2", "--grid-sites", "2",
     "--draws", "5"],
    ["verify", "--only", "existence_table"],
])
def test_json_documents_match_the_schema(tmp_path, argv):
    out = tmp_path / "doc.json"
    assert main(argv + ["--format", "json", "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert validate_document(doc) is doc
    assert doc["command"] == argv[0]
    assert doc["inputs"]["command"] == argv[0]


def test_error_document_matches_the_schema(capsys):
    code = main(["norm", "--kernel", "white", "--dim", "3", "--hurst", "0.7", "--format", "json"])
    assert code == EXIT_THRESHOLD
    err = capsys.readouterr().err
    doc = json.loads(err[err.index("{"):])
    validate_document(doc)
    assert doc["inputs"]["hurst"] == 0.7


@pytest.mark.parametrize("mutate", [
    lambda doc: doc["result"].pop("constants"),
    lambda doc: doc["result"]["constants"]["kernel"].pop("alpha_f"),
    lambda doc: doc["result"]["covariance"].pop("error_estimate"),
    lambda doc: doc["inputs"].pop("seed"),
    lambda doc: doc.update(command="integrate"),
])
def test_schema_rejects_incomplete_documents(tmp_path, mutate):
    out = tmp_path / "cov.json"
    assert main(["covariance", "--kernel", "heat", "--alpha", "0.5", "--t1", "1.0", "--x1", "0.0",
                 "--t2", "0.5", "--x2", "1.0", "--format", "json", "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    mutate(doc)
    with pytest.raises(SchemaViolation):
        validate_document(doc)


def test_nan_ratios_are_allowed_in_scans():
    doc = {"success": True, "command": "norm",
           "inputs": parse_config(["norm", "--scan", "3:4"]).inputs(),
           "result": {"exponent": -0.6, "convergent": False,
                      "scan": [{"epsilon": 0.125, "value": 1.0, "error_estimate": 0.0,
                                "converged": True, "increment_ratio": "nan",
                                "predicted_ratio": "nan"}]}}
    validate_document(json.loads(render_json(doc)))


def test_an_invalid_document_is_reported_as_a_numerical_failure(monkeypatch, tmp_path, capsys):
    from frontend import app

    def empty_table(config):
        _, frame = app.cmd_existence(config)
        return {"table": []}, frame

    monkeypatch.setitem(app.HANDLERS, "existence", empty_table)
    out = tmp_path / "bad.json"
    code = main(["existence", "--format", "json", "--output", str(out)])
    assert code == EXIT_NUMERICAL
    assert not out.exists()
    assert "result" in capsys.readouterr().err


# ---------------------------------------------------------
# LOG LEVEL
# ---------------------------------------------------------
def test_log_level_flag_is_validated():
    assert parse_config(["existence", "--log-level", "info"]).log_level == "INFO"
    with pytest.raises(UsageError, match="log level"):
        parse_config(["existence", "--log-level", "LOUD"])


@pytest.mark.parametrize("raw, expected", [
    ("debug", "DEBUG"), (" Error ", "ERROR"), ("LOUD", "WARNING"), ("", "WARNING"), (None, "WARNING"),
])
def test_log_level_names_fall_back_to_warning(raw, expected):
    assert log_level_name(raw) == expected


def test_bad_log_level_in_the_environment_falls_back(monkeypatch):
    import backend.settings as settings

    monkeypatch.setenv("FRACHEAT_LOG_LEVEL", "VERBOSE")
    try:
        assert importlib.reload(settings).LOG_LEVEL == "WARNING"
    finally:
        monkeypatch.undo()
        importlib.reload(settings)
