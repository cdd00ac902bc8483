import logging
import os
from typing import List

import pandas as pd

from ..errors import UnwritablePathError
from ..models.learning_models import EpochRecord
from ..models.report_models import ScoreReport, ScoreRow

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["condition", "system", "file_id", "cep", "fwseg_snr", "srmr"]
METRIC_COLUMNS = ["cep", "fwseg_snr", "srmr"]


def rows_frame(rows: List[ScoreRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=SCORE_COLUMNS)
    # Unscored metrics arrive as None
    return frame.astype({name: float for name in METRIC_COLUMNS})


def aggregate_rows(rows: List[ScoreRow]) -> List[ScoreRow]:
    """Arithmetic mean of every metric per (condition, system), in first-seen order"""
    if not rows:
        return []
    frame = rows_frame(rows)
    means = frame.groupby(["condition", "system"], sort=False)[METRIC_COLUMNS].mean()
    aggregate = []
    for (condition, system), values in means.iterrows():
        scores = {name: (None if pd.isna(value) else float(value)) for name, value in values.items()}
        aggregate.append(ScoreRow(condition=condition, system=system, **scores))
    return aggregate


def format_table(report: ScoreReport) -> str:
    frame = rows_frame(report.aggregate).drop(columns=["file_id"])
    title = f"Experiment: {report.experiment}" if report.experiment else "Scores"
    return title + "\n" + frame.to_string(index=False, float_format=lambda v: f"{v:.3f}")


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise UnwritablePathError(f"Cannot create {directory}: {e}")


def write_report(report: ScoreReport, csv_path: str) -> str:
    """Per-file rows to csv_path, aggregate rows next to it; returns the human-readable table"""
    _ensure_parent(csv_path)
    root, ext = os.path.splitext(csv_path)
    try:
        rows_frame(report.rows).to_csv(csv_path, index=False)
        rows_frame(report.aggregate).drop(columns=["file_id"]).to_csv(f"{root}_mean{ext or '.csv'}", index=False)
    except OSError as e:
        raise UnwritablePathError(f"Cannot write report {csv_path}: {e}")
    logger.info(f"Report written to {csv_path} ({len(report.rows)} rows)")
    return format_table(report)


def write_training_log(history: List[EpochRecord], path: str) -> None:
    _ensure_parent(path)
    frame = pd.DataFrame(
        [record.model_dump() for record in history],
        columns=["epoch", "loss", "accuracy", "validation_accuracy"],
    )
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise UnwritablePathError(f"Cannot write training log {path}: {e}")
