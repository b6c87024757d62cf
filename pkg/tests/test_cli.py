#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Tests for the command-line surface: outputs, files and exit codes
"""
import sys
import math
import re
import json
import logging
from pathlib import Path

import pytest
from click.testing import CliRunner

# Add the project root to the path so we can import our modules
project_root = str(Path(__file__).parent.parent.absolute())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from main import run
from app.cli.cli import cli
from app.schemas.run import SuiteResult
from app.services import verification

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

ADAPT_CONFIG = """
# short two-frequency run
omega1_true = 0.3
omega2_true = 0.7
time = 5
rounds = {rounds}
initial_guess_1 = 0.63
initial_guess_2 = 0.39
grid_points = 11
segments = 50
seed = 7
"""


ROW = re.compile(r"^[a-z_0-9]+,")


def _rows(text):
    return dict(line.split(",", 1) for line in text.splitlines() if ROW.match(line))


@pytest.fixture
def adapt_config(tmp_path):
    def write(rounds=2, text=ADAPT_CONFIG):
        path = tmp_path / f"adapt_{rounds}.conf"
        path.write_text(text.format(rounds=rounds), encoding="utf-8")
        return str(path)

    return write


def test_qfim_at_optimal_probe(capsys):
    assert run(["qfim", "--omega1", "0.3", "--omega2", "0.7", "--time", "5"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows["trace_inverse"]) == pytest.approx(0.09463, abs=1e-5)
    assert rows["singular"] == "false"


def test_qfim_at_singular_time_exits_2(capsys):
    t = repr(4 * math.pi)
    assert run(["qfim", "--omega1", "0.6", "--omega2", "0.8", "--time", t, "--probe", "basis:1"]) == 2
    captured = capsys.readouterr()
    rows = _rows(captured.out)
    assert rows["singular"] == "true"
    assert "trace_inverse" not in rows
    assert "error: RABI_003" in captured.err


def test_missing_option_exits_1(capsys):
    assert run(["qfim", "--omega1", "0.3", "--omega2", "0.7"]) == 1
    assert "--time" in capsys.readouterr().err


def test_invalid_values_exit_1(capsys):
    assert run(["bounds", "--time", "-1", "--omega-plus", "0.1"]) == 1
    assert "error: RABI_001" in capsys.readouterr().err
    assert run(["qfim", "--omega1", "0.3", "--omega2", "0.7", "--time", "5", "--probe", "basis:9"]) == 1
    assert run(["compare", "--format", "parquet"]) == 1


def test_compare_writes_table_and_summary(capsys):
    assert run(["compare", "--omega-plus", "0.1", "--m", "1"]) == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "omega_plus_t,joint_bound,separate_bound"
    assert len(lines) == 401
    assert lines[-1].split(",")[1] == "inf"
    summary = _rows(captured.err)
    assert float(summary["crossover_omega_plus_t"]) == pytest.approx(3.4285, abs=1e-3)


def test_compare_to_file_prints_summary(tmp_path, capsys):
    target = tmp_path / "compare.csv"
    assert run(["compare", "--steps", "8", "--output", str(target)]) == 0
    assert len(target.read_text(encoding="utf-8").splitlines()) == 9
    assert "half_pi_joint_bound" in _rows(capsys.readouterr().out)


def test_robustness_table(capsys):
    assert run(["robustness", "--time", "5", "--m", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "delta_omega_plus,inverse_total_variance"
    assert len(lines) == 102
    assert lines[1].startswith("0,")
    assert float(lines[1].split(",")[1]) == pytest.approx(25.0)


def test_multilevel_and_bounds(capsys):
    assert run(["multilevel", "--levels", "3"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows["ratio"]) == pytest.approx(3.0)
    assert run(["bounds", "--time", "5", "--omega-plus", "0.3", "--delta-omega", "0.3"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows["controlled_bound"]) == pytest.approx(0.044213, abs=1e-6)


def test_adapt_is_byte_identical_across_runs(adapt_config, tmp_path):
    config = adapt_config()
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    assert run(["adapt", "--config", config, "--output", str(first)]) == 0
    assert run(["adapt", "--config", config, "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,omega1_hat,omega2_hat,norm_inv_variance,seed"
    assert len(lines) == 3
    assert lines[1].startswith("1,") and lines[1].endswith(",7")
    assert Path(f"{first}.meta.json").exists()


def test_adapt_with_seed_list_and_summary(adapt_config, tmp_path):
    output = tmp_path / "seeds.csv"
    summary = tmp_path / "summary.csv"
    args = ["adapt", "--config", adapt_config(), "--seeds", "1,2", "--workers", "2"]
    assert run(args + ["--output", str(output), "--summary", str(summary)]) == 0
    seeds = [line.rsplit(",", 1)[1] for line in output.read_text(encoding="utf-8").splitlines()[1:]]
    assert seeds == ["1", "1", "2", "2"]
    assert summary.read_text(encoding="utf-8").startswith("step,omega1_median,omega2_median,proxy_median")
    metadata = json.loads(Path(f"{output}.meta.json").read_text(encoding="utf-8"))
    assert sorted(metadata["alias_check_steps"]) == ["1", "2"]
    assert "trust_region" in metadata


def test_adapt_zero_rounds_prints_header_only(adapt_config, capsys):
    assert run(["adapt", "--config", adapt_config(rounds=0)]) == 0
    assert capsys.readouterr().out == "step,omega1_hat,omega2_hat,norm_inv_variance,seed\n"


def test_adapt_bad_config_exits_1(adapt_config, capsys):
    config = adapt_config(text=ADAPT_CONFIG + "colour = blue\n")
    assert run(["adapt", "--config", config]) == 1
    err = capsys.readouterr().err
    assert "error: RABI_004" in err
    assert "colour" in err
    assert run(["adapt", "--config", "/nonexistent/adapt.conf"]) == 1
    assert run(["adapt", "--config", adapt_config(), "--seeds", "1,x"]) == 1


def test_verify_quick(capsys):
    assert run(["verify", "--quick", "--suite", "multilevel", "--suite", "properties"]) == 0
    out = capsys.readouterr().out
    assert "PASS multilevel" in out
    assert "PASS properties" in out


def test_verify_failure_exits_3(monkeypatch, capsys):
    def failing(rng, quick=False):
        return SuiteResult(name="multilevel", passed=False, max_error=1.0, checks=1)

    monkeypatch.setitem(verification.SUITES, "multilevel", failing)
    assert run(["verify", "--quick", "--suite", "multilevel"]) == 3
    captured = capsys.readouterr()
    assert "FAIL multilevel" in captured.out
    assert "error: RABI_005" in captured.err


def test_metrics_file(tmp_path):
    target = tmp_path / "metrics.prom"
    assert run(["--metrics-file", str(target), "multilevel", "--levels", "2"]) == 0
    text = target.read_text(encoding="utf-8")
    assert 'rabiest_commands_total{command="multilevel"}' in text


def test_help_and_version():
    runner = CliRunner()
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ["qfim", "compare", "robustness", "adapt", "multilevel", "verify", "bounds"]:
        assert name in result.output
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "1.0.0" in result.output
    assert run(["--help"]) == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
