"""Tidy CSV data behind each figure; nothing is rendered here.

Trajectory figures take a mapping label -> RunRecord (the ODE included) and
produce one long-format panel per quantity:
    <tag>_eps_g.csv   t, series, value
    <tag>_Q.csv       t, series, entry, value   (likewise R and v)
Diagnostic figures take a DiagnosticResult and produce <tag>.csv: the sweep
table plus a fit_value column evaluated from the per-D log-log fits when present.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Union

import numpy as np
import pandas as pd

from ..dynamics.records import record_to_frame
from ..errors import ParameterError
from ..models import RunRecord
from .artifacts import write_table
from .diagnostics import DiagnosticResult

logger = logging.getLogger(__name__)

TRAJECTORY_FIGURES = ("fig3", "fig4", "fig5", "figm", "affine")
DIAGNOSTIC_FIGURES = {"fig2": "w1", "fig6": "third-moment", "fig7": "ks-scaling", "fig8": "residuals"}
FIGURE_TAGS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "figm", "affine")
PANELS = ("eps_g", "Q", "R", "v")


def trajectory_panels(records: Mapping[str, RunRecord]) -> Dict[str, pd.DataFrame]:
    if not records:
        raise ParameterError("No records to tabulate")
    frames = []
    for label, record in records.items():
        frame = record_to_frame(record)
        frame.insert(1, "series", label)
        frames.append(frame)
    wide = pd.concat(frames, ignore_index=True)
    panels = {"eps_g": wide[["t", "series", "eps_g"]].rename(columns={"eps_g": "value"})}
    for quantity in PANELS[1:]:
        cols = [c for c in wide.columns if c.startswith(f"{quantity}_")]
        panels[quantity] = wide.melt(id_vars=["t", "series"], value_vars=cols, var_name="entry",
                                     value_name="value")
    return panels


def _fit_overlay(table: pd.DataFrame, summary: dict) -> pd.DataFrame:
    fits = summary.get("fits") or {}
    by_quantity = "quantity" in table.columns and bool(set(fits) & set(table["quantity"].unique()))
    table = table.copy()
    values = []
    for _, row in table.iterrows():
        per_D = fits.get(row["quantity"], {}) if by_quantity else fits
        fit = per_D.get(str(int(row["D"])), {})
        if "slope" in fit:
            values.append(float(np.exp(fit["intercept"]) * row["m_over_D"] ** fit["slope"]))
        else:
            values.append(float("nan"))
    table["fit_value"] = values
    return table


def diagnostic_panel(tag: str, result: DiagnosticResult) -> pd.DataFrame:
    expected = DIAGNOSTIC_FIGURES[tag]
    if result.name != expected:
        raise ParameterError(f"{tag} needs the {expected!r} diagnostic, got {result.name!r}")
    if result.table.empty:
        raise ParameterError(f"Diagnostic {result.name} has an empty table")
    if "m_over_D" in result.table.columns:
        return _fit_overlay(result.table, result.summary)
    return result.table.copy()


def emit_plot_data(tag: str, data: Union[Mapping[str, RunRecord], DiagnosticResult], directory,
                   overwrite: bool = False) -> List[Path]:
    """Write the panel CSVs of one figure; every panel is built before any file is written."""
    if tag not in FIGURE_TAGS:
        raise ParameterError(f"Unknown figure tag {tag!r}; expected one of {FIGURE_TAGS}")
    directory = Path(directory)
    if tag in DIAGNOSTIC_FIGURES:
        if not isinstance(data, DiagnosticResult):
            raise ParameterError(f"{tag} is built from a diagnostic result")
        frames = {tag: diagnostic_panel(tag, data)}
    else:
        if isinstance(data, DiagnosticResult):
            raise ParameterError(f"{tag} is built from run records")
        frames = {f"{tag}_{panel}": frame for panel, frame in trajectory_panels(data).items()}
    paths = [write_table(directory / f"{name}.csv", frame, overwrite) for name, frame in frames.items()]
    logger.info(f"Plot data for {tag}: {len(paths)} panel(s) in {directory}")
    return paths
