#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Tests for the result tables and their CSV, Parquet and metadata exports
"""
import sys
import json
import math
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add the project root to the path so we can import our modules
project_root = str(Path(__file__).parent.parent.absolute())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.core.errors import InputValidationError
from app.schemas.adaptive import AdaptiveConfig
from app.schemas.rabi import RabiParameters
from app.services.adaptive_loop import run_seeds
from app.services.closed_form import optimal_probe_state
from app.services.experiments import ExperimentService, format_float

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


@pytest.fixture
def service():
    return ExperimentService()


@pytest.fixture(scope="module")
def traces():
    config = AdaptiveConfig(
        omega_true=(0.3, 0.7), t=5.0, segments=50, rounds=2, initial_guess=(0.63, 0.39), grid_points=11
    )
    return run_seeds(config, [1, 2])


def test_format_float_round_trips():
    for value in [0.1, 1 / 3, 12.5, 1e-17]:
        assert float(format_float(value)) == value
    assert format_float(math.inf) == "inf"


def test_qfim_report_at_optimal_probe(service):
    omega = RabiParameters.of(0.3, 0.7)
    rows = dict(service.qfim_report(omega, 5.0, optimal_probe_state(omega, 5.0)))
    assert rows["trace_inverse"] == pytest.approx(0.09463, abs=1e-5)
    assert rows["trace_inverse"] == pytest.approx(rows["min_trace_inverse"], rel=1e-8)
    assert rows["commutation_residual"] < 1e-10
    assert not rows["singular"]
    assert list(rows)[:4] == ["j_11", "j_12", "j_21", "j_22"]


def test_compare_table(service):
    df = service.compare_table(omega_plus=0.1, m=1)
    assert list(df.columns) == ["omega_plus_t", "joint_bound", "separate_bound"]
    assert len(df) == 400
    quarter = df.iloc[99]
    assert quarter["omega_plus_t"] == pytest.approx(math.pi / 2)
    assert quarter["joint_bound"] == pytest.approx(0.0045264, abs=1e-7)
    assert quarter["separate_bound"] == pytest.approx(0.0081057, abs=1e-7)
    assert math.isinf(df.iloc[-1]["joint_bound"])
    with pytest.raises(InputValidationError):
        service.compare_table(omega_plus=0.0)


def test_compare_summary(service):
    summary = service.compare_summary(omega_plus=0.1)
    assert summary["crossover_omega_plus_t"] == pytest.approx(3.4285, abs=1e-3)
    assert summary["crossover_time"] == pytest.approx(34.285, abs=1e-2)
    assert summary["half_pi_joint_bound"] < summary["half_pi_separate_bound"]


def test_robustness_table(service):
    df = service.robustness_table(t=5.0, m=1, offset_max=1.0, steps=100)
    assert list(df.columns) == ["delta_omega_plus", "inverse_total_variance"]
    assert len(df) == 101
    assert df.iloc[0]["inverse_total_variance"] == pytest.approx(25.0)
    assert df.iloc[30]["inverse_total_variance"] == pytest.approx(22.62, abs=5e-3)
    assert df["inverse_total_variance"].is_monotonic_decreasing


def test_multilevel_and_bounds_reports(service):
    rows = dict(service.multilevel_report(4, 5.0, 1))
    assert rows["qfim_diagonal_max_error"] < 1e-10
    assert rows["ratio"] == pytest.approx(4.0)

    bounds = dict(service.bounds_report(1, 5.0, 0.3, delta_omega=0.3))
    assert bounds["controlled_bound"] == pytest.approx(0.044213, abs=1e-6)
    assert bounds["regime"] in ("joint-wins", "separate-wins", "tie")


def test_render_rows(service):
    text = service.render_rows([("a", 0.5), ("flag", True), ("levels", 3), ("name", "x")])
    assert text == "a,0.5\nflag,true\nlevels,3\nname,x\n"


def test_csv_text_format(service):
    df = pd.DataFrame({"x": [0.1, math.inf], "y": [1.0, math.nan]})
    text = service.to_csv_text(df)
    assert text == "x,y\n0.10000000000000001,1\ninf,nan\n"


def test_export_csv_to_file_and_stdout(service, tmp_path, capsys):
    df = service.compare_table(steps=4)
    target = tmp_path / "compare.csv"
    service.export(df, str(target))
    assert target.read_text(encoding="utf-8") == service.to_csv_text(df)
    service.export(df)
    assert capsys.readouterr().out == service.to_csv_text(df)
    with pytest.raises(InputValidationError):
        service.export_csv(df, str(tmp_path / "missing" / "out.csv"))


def test_export_parquet(service, tmp_path):
    df = service.robustness_table(steps=10)
    target = tmp_path / "robustness.parquet"
    service.export(df, str(target), "parquet")
    restored = pd.read_parquet(target)
    pd.testing.assert_frame_equal(restored, df)
    with pytest.raises(InputValidationError):
        service.export(df, None, "parquet")


def test_write_metadata_sidecar(service, tmp_path):
    target = tmp_path / "adapt.csv"
    path = service.write_metadata({"seed": 3, "note": "Ω₊"}, str(target))
    assert path == f"{target}.meta.json"
    assert json.loads(Path(path).read_text(encoding="utf-8")) == {"seed": 3, "note": "Ω₊"}


def test_write_metadata_reports_unwritable_path(service, tmp_path):
    target = tmp_path / "missing" / "adapt.csv"
    with pytest.raises(InputValidationError) as excinfo:
        service.write_metadata({"seed": 3}, str(target))
    assert "--output" in excinfo.value.resolution


def test_adaptive_table(service, traces):
    df = service.adaptive_table(traces)
    assert list(df.columns) == ["step", "omega1_hat", "omega2_hat", "norm_inv_variance", "seed"]
    assert df["step"].tolist() == [1, 2, 1, 2]
    assert df["seed"].tolist() == [1, 1, 2, 2]
    assert df["seed"].dtype == np.uint64
    assert df["omega1_hat"].between(-2.0, 2.0).all()


def test_adaptive_table_without_rounds(service):
    config = AdaptiveConfig(omega_true=(0.3, 0.7), t=5.0, rounds=0, grid_points=5, segments=10)
    df = service.adaptive_table(run_seeds(config, [0]))
    assert len(df) == 0
    assert service.to_csv_text(df) == "step,omega1_hat,omega2_hat,norm_inv_variance,seed\n"


def test_ensemble_summary(service, traces):
    df = service.ensemble_summary(traces)
    assert df["step"].tolist() == [1, 2]
    assert df["controlled_level"].iloc[0] == pytest.approx(12.5)
    assert df["separate_level"].iloc[0] == pytest.approx(6.25)
    assert df["uncontrolled_joint_level"].iloc[0] == pytest.approx(10.567, abs=1e-3)
    single = service.ensemble_summary(traces[:1])
    assert single["seed_norm_inv_variance"].isna().all()
    with pytest.raises(InputValidationError):
        service.ensemble_summary([])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
