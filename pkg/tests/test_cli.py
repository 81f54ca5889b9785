import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from spinbath_qfi.cli import JSON_SCHEMAS, run
from spinbath_qfi.config import ConfigError, load_config, parse_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[model]
n_spins = 8
g = 0.05
temperature = 0.6

[time]
t_min = 0.001
t_max = 10.0
n_grid = 64

[sweep]
values = [0.3, 0.6, 1.0]
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sweep_csv_columns(capsys, small_config):
    code, out, _ = invoke(capsys, "sweep", "--config", str(small_config))
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["T", "t_star_corr", "fq_corr", "t_star_unc", "fq_unc"]
    assert len(rows) == 4 and all(len(r) == 5 for r in rows)
    assert [float(r[0]) for r in rows[1:]] == [0.3, 0.6, 1.0]


def test_shipped_sweep_config_is_valid():
    cfg = load_config(CONFIG_DIR / "temperature_sweep_g0p01.toml")
    assert cfg.spec.n_spins == 50 and cfg.spec.g == 0.01 and len(cfg.sweep_values) == 20


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.stem)
def test_every_shipped_config_loads(path):
    load_config(path)


@pytest.mark.parametrize("command", ["dynamics", "qfi", "optimize", "sweep"])
def test_json_matches_schema(capsys, small_config, command):
    code, out, _ = invoke(capsys, command, "--config", str(small_config), "--format", "json")
    assert code == 0
    jsonschema.validate(json.loads(out), JSON_SCHEMAS[command])


@pytest.mark.parametrize("command", ["dynamics", "qfi", "optimize", "sweep"])
def test_csv_parseable(capsys, small_config, command):
    code, out, _ = invoke(capsys, command, "--config", str(small_config), "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    width = len(rows[0])
    assert len(rows) > 1 and all(len(r) == width for r in rows)
    assert "\r" not in out


@pytest.mark.parametrize("command", ["qfi", "sweep"])
def test_byte_identical_output(tmp_path, small_config, command):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert run([command, "--config", str(small_config), "--output", str(a)]) == 0
    assert run([command, "--config", str(small_config), "--output", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seventeen_significant_digits(capsys, small_config):
    _, out, _ = invoke(capsys, "qfi", "--config", str(small_config))
    for line in out.splitlines()[1:]:
        for field in line.split(","):
            assert field == "nan" or field == "%.17g" % float(field)


def test_pipeline_flag(capsys, small_config):
    _, out, _ = invoke(capsys, "qfi", "--config", str(small_config), "--pipeline", "uncorr")
    assert out.splitlines()[0] == "t,fq_unc"


def test_verify_exit_zero(capsys):
    code, out, err = invoke(capsys, "verify")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, JSON_SCHEMAS["verify"])
    assert doc["passed"] and "FAIL" not in err


def test_negative_temperature_exit_one(capsys, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[model]\ntemperature = -1\n")
    code, out, err = invoke(capsys, "qfi", "--config", str(path))
    assert code == 1 and out == ""
    assert "model.temperature" in err


@pytest.mark.parametrize(
    "text, field",
    [
        ("[model]\nfoo = 1\n", "model.foo"),
        ("[nonsense]\n", "nonsense"),
        ('[estimate]\nparameter = "omega"\n', "estimate.parameter"),
        ("[time]\nt_max = -3\n", "time.t_max"),
        ('[output]\nformat = "xml"\n', "output.format"),
        ("[model]\nn_spins = 2.5\n", "model.n_spins"),
        ("[sweep]\nstart = 0.1\n", "sweep.num"),
        ("[model\n", "malformed"),
    ],
)
def test_config_errors_name_the_field(capsys, tmp_path, text, field):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    code, _, err = invoke(capsys, "optimize", "--config", str(path))
    assert code == 1 and field in err


def test_missing_sweep_table(capsys):
    code, _, err = invoke(capsys, "sweep")
    assert code == 1 and "sweep" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = invoke(capsys, "qfi", "--config", str(tmp_path / "none.toml"))
    assert code == 1 and "cannot read" in err


def test_computational_failure_exit_two(capsys, tmp_path):
    path = tmp_path / "collapse.toml"
    path.write_text('[model]\ndelta = 0.0\npreparation = [0.0, 0.0, 1.0]\nn_spins = 4\n[estimate]\nparameter = "coupling"\n')
    code, _, err = invoke(capsys, "optimize", "--config", str(path))
    assert code == 2 and "OptimizationError" in err


def test_bad_argument_exit_one(capsys):
    assert run(["qfi", "--format", "xml"]) == 1
    assert run(["bogus"]) == 1


def test_parse_config_defaults():
    cfg = parse_config({})
    assert cfg.parameter == "temperature" and cfg.pipelines == ("corr", "unc")
    with pytest.raises(ConfigError, match="sweep"):
        parse_config({"sweep": {"values": [1.0], "num": 3}})


def test_console_script(small_config):
    proc = subprocess.run(
        [sys.executable, "-m", "spinbath_qfi.cli", "optimize", "--config", str(small_config)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    jsonschema.validate(json.loads(proc.stdout), JSON_SCHEMAS["optimize"])
