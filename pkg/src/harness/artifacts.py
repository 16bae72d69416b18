"""Output directory bookkeeping.

Every subcommand writes into one directory through an ArtifactWriter:
CSV tables, RunRecords, JSON summaries, plus manifest.json (config, config
hash, seeds, file list) and timing.json (wall-clock only, so the rest of the
directory is reproducible byte for byte).
"""

import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from ..constants import CSV_FLOAT_FORMAT
from ..dynamics.records import save_record
from ..errors import ArtifactError
from ..models import RunRecord
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TIMING_NAME = "timing.json"


def write_table(path, frame: pd.DataFrame, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise ArtifactError(f"{path} exists; pass --overwrite to replace it")
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path


def write_json(path, payload: Dict[str, Any], overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise ArtifactError(f"{path} exists; pass --overwrite to replace it")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


class ArtifactWriter:
    """Single writer for one output directory."""

    def __init__(self, directory, config: ExperimentConfig, overwrite: bool = False, command: str = ""):
        self.directory = Path(directory)
        self.config = config
        self.overwrite = overwrite
        self.command = command
        self.files: List[str] = []
        self.timings: Dict[str, float] = {}
        self.extra: Dict[str, Any] = {}
        self._started = time.time()
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Cannot create output directory {self.directory}: {e}") from e

    def path(self, name: str) -> Path:
        return self.directory / name

    def _register(self, path: Path) -> Path:
        rel = str(path.relative_to(self.directory))
        if rel not in self.files:
            self.files.append(rel)
        logger.info(f"Wrote {path}")
        return path

    def table(self, name: str, frame: pd.DataFrame) -> Path:
        return self._register(write_table(self.path(name), frame, self.overwrite))

    def record(self, name: str, record: RunRecord) -> Path:
        return self._register(save_record(self.path(name), record, overwrite=self.overwrite))

    def json(self, name: str, payload: Dict[str, Any]) -> Path:
        return self._register(write_json(self.path(name), payload, self.overwrite))

    def timed(self, label: str, seconds: float):
        self.timings[label] = float(seconds)

    def note(self, key: str, value: Any):
        """Extra provenance stored in the manifest (e.g. derived seeds)."""
        self.extra[key] = value

    def finish(self, seeds: Optional[Dict[str, Any]] = None) -> Path:
        manifest = {
            "command": self.command,
            "config": self.config.model_dump(mode="json", exclude={"output"}),
            "config_hash": self.config.config_hash(),
            "seeds": seeds if seeds is not None else self.config.seeds.model_dump(),
            "files": sorted(self.files),
            **self.extra,
        }
        # manifest and timing are rewritten on every run of the same command
        write_json(self.path(MANIFEST_NAME), manifest, overwrite=True)
        timing = {
            "total_seconds": time.time() - self._started,
            "steps": self.timings,
            "argv": sys.argv,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        write_json(self.path(TIMING_NAME), timing, overwrite=True)
        logger.info(f"Manifest for {len(self.files)} artifacts written to {self.path(MANIFEST_NAME)}")
        return self.path(MANIFEST_NAME)


def load_manifest(directory) -> Dict[str, Any]:
    path = Path(directory) / MANIFEST_NAME
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"Could not read manifest {path}: {e}") from e
