import csv
import json

import pytest

from qpl.cli import EXIT_CONFIG, EXIT_OK, EXIT_PIPELINE, main
from qpl.config import RunConfig
from qpl.errors import ConfigError


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--output", str(out)])
    return code, out


def test_oracle_outputs(tmp_path):
    code, out = _run(tmp_path, "oracle", "--box-N", "60")
    assert code == EXIT_OK
    doc = json.loads((out / "oracle.json").read_text())
    assert doc["status"] == "ok"
    assert all("source" in s for s in doc["sections"])
    rows = list(csv.reader((out / "oracle.csv").open()))
    assert rows[0] == ["index", "E", "mass_0", "mass_01", "center", "source"]
    assert len(rows) == 122


def test_eigen_csv_header(tmp_path):
    code, out = _run(tmp_path, "eigen", "--n-max", "80")
    assert code == EXIT_OK
    header = (out / "eigen.csv").read_text().splitlines()[0]
    assert header == "n,u_n,log_env,source"
    doc = json.loads((out / "eigen.json").read_text())
    assert doc["sections"][0]["source"] == "eigen.energy_for_phase"


def test_deterministic(tmp_path):
    texts = []
    for k in range(2):
        code, out = _run(tmp_path / str(k), "induct", "--scales", "2")
        assert code == EXIT_OK
        texts.append(((out / "induct.json").read_bytes(), (out / "induct.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_pipeline_failure_exit(tmp_path, capsys):
    code, _ = _run(tmp_path, "eigen", "--lambda", "0")
    assert code == EXIT_PIPELINE
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "NoLocalizedState" and err["kind"] == "pipeline"


def test_config_error_names_field(tmp_path, capsys):
    code, _ = _run(tmp_path, "spectrum", "--tau", "1")
    assert code == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "tau"


def test_bad_flags(capsys):
    assert main(["spectrum", "--alpha", "nonsense"]) == EXIT_CONFIG
    assert main(["nosuchcommand"]) == EXIT_CONFIG
    assert main(["measure", "--N", "500"]) == EXIT_CONFIG
    assert main(["oracle", "--box-N", "40"]) == EXIT_CONFIG


def test_config_file_and_override(tmp_path, capsys):
    cfg = RunConfig(lam=8.0, q=55)
    path = tmp_path / "run.json"
    path.write_text(cfg.to_json())
    assert RunConfig.load(path) == cfg
    assert main(["spectrum", "--config", str(path), "--q", "34"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["lambda"] == 8.0 and doc["config"]["q"] == 34
    assert doc["sections"][0]["values"]["q"] == 34


def test_config_validation():
    with pytest.raises(ConfigError) as exc:
        RunConfig(lam=-1.0)
    assert exc.value.field == "lambda"
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"lambda": 3.0, "bogus": 1})
    assert exc.value.field == "bogus"


def test_csv_stdout(capsys):
    assert main(["spectrum", "--q", "21", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "piece,E_lo,E_hi,source"
