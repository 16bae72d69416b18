"""Matrix and spec persistence.

Matrices go to CSV (header c_0..c_{D-1}) or to a raw little-endian float64
file behind a 16-byte header: magic "HMMC", u32 rows, u32 cols, u32 reserved.
Specs are stored as JSON with a kind tag.
"""

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..constants import CSV_FLOAT_FORMAT
from ..errors import ArtifactError
from .specs import BlockMixtureSpec, MixtureSpec, ScalarLawSpec

logger = logging.getLogger(__name__)

MAGIC = b"HMMC"
HEADER_DTYPE = np.dtype([("magic", "S4"), ("P", "<u4"), ("D", "<u4"), ("reserved", "<u4")])
SPEC_KINDS = {cls.__name__: cls for cls in (MixtureSpec, BlockMixtureSpec, ScalarLawSpec)}


def save_matrix(path, matrix) -> Path:
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".csv":
        frame = pd.DataFrame(matrix, columns=[f"c_{j}" for j in range(matrix.shape[1])])
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    else:
        header = np.zeros(1, dtype=HEADER_DTYPE)
        header["magic"] = MAGIC
        header["P"], header["D"] = matrix.shape
        with open(path, "wb") as fh:
            fh.write(header.tobytes())
            fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    logger.debug(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {path}")
    return path


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return pd.read_csv(path).to_numpy(dtype=float)
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise ArtifactError(f"{path}: file shorter than the matrix header")
    header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != MAGIC:
        raise ArtifactError(f"{path}: bad magic {header['magic']!r}")
    P, D = int(header["P"]), int(header["D"])
    body = raw[HEADER_DTYPE.itemsize:]
    if len(body) != 8 * P * D:
        raise ArtifactError(f"{path}: expected {8 * P * D} payload bytes for {P}x{D}, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(P, D).astype(float)


def save_spec(path, spec: Union[MixtureSpec, BlockMixtureSpec, ScalarLawSpec]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"kind": type(spec).__name__, "spec": spec.model_dump(mode="json")}
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def load_spec(path):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("kind")
    if kind not in SPEC_KINDS:
        raise ArtifactError(f"{path}: unknown spec kind {kind!r}")
    return SPEC_KINDS[kind].model_validate(payload["spec"])
