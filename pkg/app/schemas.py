"""Pydantic schemas for CLI invocations and run manifests."""
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

from core.keyvalue import write_key_values

ARTIFACT_VERSION = "0.1.0"
RUN_MANIFEST_FILENAME = "run_manifest.txt"


class Subcommand(str, Enum):
    GEN_DATA = "gen-data"
    TRAIN = "train"
    EVAL_KNN = "eval-knn"
    EVAL_PROBE = "eval-probe"
    VERIFY = "verify"
    EXPORT_JOINT = "export-joint"
    GRADCHECK = "gradcheck"
    SWEEP = "sweep"


class CommandSpec(BaseModel):
    """One parsed invocation."""
    subcommand: Subcommand
    config_path: Optional[Path] = Field(None, description="key=value config file")
    overrides: Dict[str, Any] = Field(default_factory=dict, description="TrainConfig fields set by flags")
    out_dir: Path = Field(..., description="Output directory")
    dataset: str = Field("synthetic", description="synthetic, idx:<images>,<labels> or csv:<path>")
    checkpoint: Optional[Path] = None
    options: Dict[str, Any] = Field(default_factory=dict, description="Subcommand-specific flags")


class RunManifest(BaseModel):
    """Written beside every command's outputs."""
    subcommand: Subcommand
    artifact_version: str = ARTIFACT_VERSION
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    dataset: str
    config: Dict[str, Any] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)

    def write(self, directory: Path) -> Path:
        values: Dict[str, object] = {
            "subcommand": self.subcommand.value,
            "artifact_version": self.artifact_version,
            "created_at": self.created_at,
            "dataset": self.dataset,
        }
        values.update({f"config.{k}": v for k, v in self.config.items()})
        values.update({f"option.{k}": v for k, v in self.options.items() if v is not None})
        return write_key_values(Path(directory) / RUN_MANIFEST_FILENAME, values)
