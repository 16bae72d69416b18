import json

import pytest

from src.dynamics.records import save_record
from src.errors import AccuracyError, ArtifactError, ConfigError, DivergenceError
from src.harness.config import INPUT_KINDS
from src.run_lab import build_parser, exit_code_for, main, resolve_config
from tests.conftest import make_record


@pytest.fixture
def record_csv(tmp_path):
    return str(save_record(tmp_path / "rec.csv", make_record([0.0, 0.5, 1.0], [0.4, 0.3, 0.2])))


def test_gen_config_writes_once(tmp_path):
    path = tmp_path / "lab.ini"
    assert main(["gen-config", "--template", "desk", "--file", str(path)]) == 0
    assert "[network]" in path.read_text()
    assert main(["gen-config", "--file", str(path)]) == 4
    assert main(["--overwrite", "gen-config", "--file", str(path)]) == 0


def test_gen_config_to_stdout(capsys):
    assert main(["gen-config"]) == 0
    assert "N = 4096" in capsys.readouterr().out


def test_compare_identical_records_converges(tmp_path, record_csv):
    out = tmp_path / "cmp"
    code = main(["--out", str(out), "compare", "--sgd-csv", record_csv, "--ode-csv", record_csv,
                 "--tau", "0.5", "--figure", "fig3"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "converged"
    assert report["errors"]["eps_g"] == 0.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "compare"
    assert (out / "fig3_eps_g.csv").exists()


def test_compare_needs_both_records(tmp_path, record_csv):
    assert main(["--out", str(tmp_path / "x"), "compare", "--sgd-csv", record_csv]) == 2


def test_compare_outside_the_time_range(tmp_path, record_csv):
    assert main(["--out", str(tmp_path / "x"), "compare", "--sgd-csv", record_csv, "--ode-csv", record_csv,
                 "--tau", "3.0"]) == 2


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sgd]\neta = 0.2\n", encoding="utf-8")
    assert main(["--config", str(bad), "ode"]) == 2


def test_input_overrides():
    args = build_parser().parse_args(["--input-kind", "mixture", "--standardize", "none", "ode"])
    config = resolve_config(args)
    assert config.input.kind == "mixture"
    assert config.input.standardize == "none"
    assert config.config_hash() != resolve_config(build_parser().parse_args(["ode"])).config_hash()


def test_input_kind_choices_match_the_config_model():
    for kind in (k for k in INPUT_KINDS if k != "file"):
        args = build_parser().parse_args(["--input-kind", kind, "ode"])
        assert resolve_config(args).input.kind == kind
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--input-kind", "lattice", "ode"])


def test_file_input_without_matrix_exits_2(tmp_path):
    assert main(["--out", str(tmp_path / "o"), "--input-kind", "file", "sgd"]) == 2


def test_exit_codes():
    assert exit_code_for(DivergenceError(step=3)) == 3
    assert exit_code_for(AccuracyError(0.1, 1e-3, 1e-7)) == 3
    assert exit_code_for(ArtifactError("exists")) == 4
    assert exit_code_for(FileNotFoundError("x")) == 4
    assert exit_code_for(ConfigError("bad")) == 2
    assert exit_code_for(RuntimeError("?")) == 1


@pytest.mark.slow
def test_sgd_command_writes_runs(tmp_path):
    config = tmp_path / "tiny.ini"
    config.write_text(
        "[network]\nN = 32\nD = 16\n[sgd]\nsteps = 64\nstride = 16\np_eval = 1000\n[seeds]\nsgd = 1, 2\n",
        encoding="utf-8",
    )
    out = tmp_path / "sgd"
    assert main(["--config", str(config), "--out", str(out), "sgd"]) == 0
    assert (out / "sgd_seed_1.csv").exists() and (out / "sgd_average.csv").exists()
    assert (out / "initial_state" / "network.json").exists()
    assert main(["--config", str(config), "--out", str(out), "sgd"]) == 4
