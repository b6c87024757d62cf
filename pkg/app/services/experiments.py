import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.errors import InfiniteBoundError, InputValidationError
from app.schemas.adaptive import AdaptiveTrace
from app.schemas.estimation import BUDGET_CONVENTION
from app.schemas.quantum import QuantumState
from app.schemas.rabi import RabiParameters
from app.services import closed_form
from app.services.adaptive_loop import multilevel_controlled_qfim, robustness_curve
from app.services.qfim_engine import check_weak_commutation, qfim_pure, state_derivatives

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """Shortest round-trip-safe rendering used in reports and CSV"""
    return settings.CSV_FLOAT_FORMAT % value


class ExperimentService:
    """
    Builds the result tables behind each command as pandas DataFrames
    and exports them as CSV or Parquet
    """

    def qfim_report(self, omega: RabiParameters, t: float, probe: QuantumState) -> List[Tuple[str, Any]]:
        """
        QFIM entries and diagnostics for one probe, ending with Tr(J⁻¹)

        Args:
            omega: Two or more Rabi frequencies
            t: Evolution time
            probe: Input state

        Returns:
            (key, value) rows; the trace-inverse row is omitted when J is singular
        """
        derivs = state_derivatives(omega, t, probe)
        result = qfim_pure(derivs)
        rows: List[Tuple[str, Any]] = []
        for i in range(result.size):
            for j in range(result.size):
                rows.append((f"j_{i + 1}{j + 1}", float(result.matrix[i, j])))
        rows.append(("commutation_residual", check_weak_commutation(derivs)))
        rows.append(("condition_number", result.condition_number))
        rows.append(("singular", result.singular))
        if omega.count == 2:
            try:
                rows.append(("min_trace_inverse", closed_form.min_trace_inverse(omega.omega_plus, t)))
            except InfiniteBoundError:
                rows.append(("min_trace_inverse", math.inf))
        if not result.singular:
            rows.append(("trace_inverse", result.trace_inverse()))
        return rows

    def compare_table(
        self,
        omega_plus: float = 0.1,
        m: int = 1,
        xmax: float = 2 * math.pi,
        steps: int = 400,
    ) -> pd.DataFrame:
        """Joint and separate bounds on an Ω₊t grid xmax·(1..steps)/steps"""
        if not omega_plus > 0 or not xmax > 0 or steps < 1:
            raise InputValidationError(
                f"Invalid range: omega_plus={omega_plus}, xmax={xmax}, steps={steps}",
                resolution="Use omega_plus > 0, xmax > 0 and steps >= 1",
            )
        xs = xmax * np.arange(1, steps + 1) / steps
        joint = []
        separate = []
        for x in xs:
            t = x / omega_plus
            try:
                joint.append(closed_form.joint_bound(m, t, omega_plus))
            except InfiniteBoundError:
                joint.append(math.inf)
            separate.append(closed_form.separate_bound(m, t))
        return pd.DataFrame({"omega_plus_t": xs, "joint_bound": joint, "separate_bound": separate})

    def compare_summary(self, omega_plus: float = 0.1, m: int = 1) -> Dict[str, float]:
        """Crossover point and the Ω₊t = π/2 comparison"""
        t_half = (math.pi / 2) / omega_plus
        x_star = closed_form.crossover_point()
        return {
            "crossover_omega_plus_t": x_star,
            "crossover_time": x_star / omega_plus,
            "half_pi_joint_bound": closed_form.joint_bound(m, t_half, omega_plus),
            "half_pi_separate_bound": closed_form.separate_bound(m, t_half),
        }

    def robustness_table(self, t: float = 5.0, m: int = 1, offset_max: float = 1.0, steps: int = 100) -> pd.DataFrame:
        if offset_max < 0 or steps < 1:
            raise InputValidationError(f"Invalid offset range: offset_max={offset_max}, steps={steps}")
        curve = robustness_curve(np.linspace(0.0, offset_max, steps + 1), t, m)
        return pd.DataFrame(curve, columns=["delta_omega_plus", "inverse_total_variance"])

    def adaptive_table(self, traces: Sequence[AdaptiveTrace], levels: int = 2) -> pd.DataFrame:
        """One row per (seed, step), concatenated in the given trace order"""
        hat_columns = [f"omega{i + 1}_hat" for i in range(levels)]
        records: List[Dict[str, Any]] = []
        seeds: List[int] = []
        for trace in traces:
            for step, (estimate, proxy) in enumerate(zip(trace.estimates, trace.norm_inv_variance), start=1):
                row: Dict[str, Any] = {"step": step}
                row.update(dict(zip(hat_columns, estimate)))
                row["norm_inv_variance"] = proxy
                records.append(row)
                seeds.append(trace.seed)
        df = pd.DataFrame(records, columns=["step"] + hat_columns + ["norm_inv_variance"])
        df["step"] = df["step"].astype("int64")
        df["seed"] = pd.Series(seeds, dtype="uint64")
        return df

    def ensemble_summary(self, traces: Sequence[AdaptiveTrace]) -> pd.DataFrame:
        """
        Per-step medians over seeds, with reference levels

        seed_norm_inv_variance is 1/(M·ΣVar) from the spread of the estimates
        across seeds (M = k·step); it needs at least two seeds.
        """
        if not traces:
            raise InputValidationError("ensemble_summary needs at least one trace")
        config = traces[0].config
        levels = config.levels
        steps = min(len(trace.estimates) for trace in traces)
        reference = closed_form.inverse_variance_levels(RabiParameters(omegas=config.omega_true), config.t)
        rows = []
        for step in range(steps):
            estimates = np.array([trace.estimates[step] for trace in traces])
            proxies = np.array([trace.norm_inv_variance[step] for trace in traces])
            row: Dict[str, Any] = {"step": step + 1}
            for i in range(levels):
                row[f"omega{i + 1}_median"] = float(np.median(estimates[:, i]))
            row["proxy_median"] = float(np.median(proxies))
            shots = config.shots_per_round * (step + 1)
            if len(traces) > 1:
                spread = float(np.sum(np.var(estimates, axis=0, ddof=1)))
                row["seed_norm_inv_variance"] = math.inf if spread == 0 else 1.0 / (shots * spread)
            else:
                row["seed_norm_inv_variance"] = math.nan
            for name, value in reference.items():
                row[f"{name}_level"] = value
            rows.append(row)
        return pd.DataFrame(rows)

    def multilevel_report(self, l: int, t: float, m: int) -> List[Tuple[str, Any]]:
        result = multilevel_controlled_qfim(l, t)
        bounds = closed_form.multilevel_bounds(l, m, t)
        diagonal_error = float(np.max(np.abs(np.diag(result.matrix) - t * t)))
        return [
            ("levels", l),
            ("qfim_diagonal_max_error", diagonal_error),
            ("qfim_off_diagonal_max", result.max_off_diagonal()),
            ("commutation_residual", result.max_residual()),
            ("joint_bound", bounds.joint),
            ("separate_bound", bounds.separate),
            ("ratio", bounds.ratio),
        ]

    def bounds_report(self, m: int, t: float, omega_plus: float, delta_omega: float = 0.0) -> List[Tuple[str, Any]]:
        report = closed_form.bound_report(m, t, omega_plus, (delta_omega,))
        return [
            ("joint_bound", report.joint),
            ("separate_bound", report.separate),
            ("controlled_bound", report.controlled),
            ("regime", report.regime),
            ("ratio", report.ratio),
            ("convention", BUDGET_CONVENTION),
        ]

    def render_rows(self, rows: Sequence[Tuple[str, Any]]) -> str:
        lines = []
        for key, value in rows:
            if isinstance(value, float):
                value = format_float(value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key},{value}")
        return "\n".join(lines) + "\n"

    def to_csv_text(self, df: pd.DataFrame) -> str:
        return df.to_csv(
            index=False,
            float_format=settings.CSV_FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="nan",
        )

    def export_csv(self, df: pd.DataFrame, output: Optional[str] = None) -> None:
        """
        Write a table as CSV to a file, or to stdout when no path is given

        Args:
            df: Table to export
            output: Destination path
        """
        text = self.to_csv_text(df)
        if output is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        try:
            with open(output, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as e:
            raise InputValidationError(f"Cannot write {output}: {e}", resolution="Check the --output path")
        logger.info(f"Exported {len(df)} rows to {output}")

    def export_parquet(self, df: pd.DataFrame, output: str) -> None:
        try:
            df.to_parquet(output, index=False, engine="pyarrow", compression=settings.PARQUET_COMPRESSION)
        except OSError as e:
            raise InputValidationError(f"Cannot write {output}: {e}", resolution="Check the --output path")
        logger.info(f"Exported {len(df)} rows to {output} (parquet)")

    def export(self, df: pd.DataFrame, output: Optional[str] = None, output_format: str = "csv") -> None:
        if output_format == "parquet":
            if output is None:
                raise InputValidationError("Parquet output needs --output")
            self.export_parquet(df, output)
        else:
            self.export_csv(df, output)

    def write_metadata(self, metadata: Dict[str, Any], output: Optional[str] = None) -> Optional[str]:
        """
        Write run metadata as JSON next to the output file, or to stderr

        Returns:
            The sidecar path, or None when written to stderr
        """
        text = json.dumps(metadata, indent=2, sort_keys=True, ensure_ascii=False, default=str)
        if output is None:
            sys.stderr.write(text + "\n")
            return None
        path = Path(f"{output}.meta.json")
        try:
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            raise InputValidationError(f"Cannot write {path}: {e}", resolution="Check the --output path")
        return str(path)


# Global experiment service instance
experiment_service = ExperimentService()
