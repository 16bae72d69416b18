import json
import logging
from pathlib import Path

import numpy as np

from ..distributions.matrix_io import load_matrix, save_matrix
from ..errors import ArtifactError
from ..models import NetworkConfig, NetworkState
from .model import check_shapes

logger = logging.getLogger(__name__)

MATRICES = ("teacher_W", "teacher_v", "W", "v", "F")
MANIFEST = "network.json"


def save_state(directory, state: NetworkState) -> Path:
    """One HMMC file per matrix plus a JSON manifest with the config."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in MATRICES:
        save_matrix(directory / f"{name}.bin", np.atleast_2d(getattr(state, name)))
    manifest = {"config": state.config.model_dump(), "files": {name: f"{name}.bin" for name in MATRICES}}
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    logger.info(f"Saved network state to {directory}")
    return directory


def load_state(directory) -> NetworkState:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise ArtifactError(f"No {MANIFEST} in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    config = NetworkConfig.model_validate(manifest["config"])
    arrays = {name: load_matrix(directory / manifest["files"][name]) for name in MATRICES}
    for name in ("teacher_v", "v"):
        arrays[name] = arrays[name].ravel()
    state = NetworkState(config=config, **arrays)
    check_shapes(state)
    return state
