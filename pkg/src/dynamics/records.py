"""RunRecord <-> CSV.

One row per snapshot with columns t, eps_g, Q_k_l..., R_k_m..., T_m_n..., v_k...
in row-major index order. SGD and ODE records share this layout exactly.
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from ..constants import CSV_FLOAT_FORMAT
from ..errors import ArtifactError
from ..models import OrderParams, RunRecord

logger = logging.getLogger(__name__)


def record_columns(K: int, M: int) -> List[str]:
    cols = ["t", "eps_g"]
    cols += [f"Q_{k}_{l}" for k in range(K) for l in range(K)]
    cols += [f"R_{k}_{m}" for k in range(K) for m in range(M)]
    cols += [f"T_{m}_{n}" for m in range(M) for n in range(M)]
    cols += [f"v_{k}" for k in range(K)]
    return cols


def record_to_frame(record: RunRecord) -> pd.DataFrame:
    if not record.snapshots:
        raise ArtifactError("Cannot tabulate an empty RunRecord")
    first = record.snapshots[0]
    K, M = first.R.shape
    rows = [
        np.concatenate([[snap.t, snap.eps_g], snap.Q.ravel(), snap.R.ravel(), snap.T.ravel(), snap.v.ravel()])
        for snap in record.snapshots
    ]
    return pd.DataFrame(np.vstack(rows), columns=record_columns(K, M))


def frame_to_record(frame: pd.DataFrame, config=None, seeds=None) -> RunRecord:
    K = sum(1 for c in frame.columns if c.startswith("v_"))
    M = sum(1 for c in frame.columns if c.startswith("T_")) ** 0.5
    M = int(round(M))
    expected = record_columns(K, M)
    if list(frame.columns) != expected:
        raise ArtifactError(f"Unexpected record columns {list(frame.columns)[:6]}...")
    snapshots = []
    for row in frame.itertuples(index=False):
        values = np.asarray(row, dtype=float)
        i = 2
        Q = values[i:i + K * K].reshape(K, K)
        i += K * K
        R = values[i:i + K * M].reshape(K, M)
        i += K * M
        T = values[i:i + M * M].reshape(M, M)
        i += M * M
        snapshots.append(OrderParams(t=values[0], Q=Q, R=R, T=T, v=values[i:i + K].copy(), eps_g=values[1]))
    return RunRecord(config=config or {}, seeds=seeds or {}, snapshots=snapshots)


def save_record(path, record: RunRecord, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise ArtifactError(f"{path} exists; pass overwrite to replace it")
    path.parent.mkdir(parents=True, exist_ok=True)
    record_to_frame(record).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT,
                                   lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(record.snapshots)} snapshots to {path}")
    return path


def load_record(path) -> RunRecord:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise ArtifactError(f"Could not read record {path}: {e}") from e
    return frame_to_record(frame)
