"""
Pydantic Schemas for Experiment Configuration and Run Manifests
"""

import configparser
import json
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from .models.coefficients import PRESETS
from .models.mesh import Side
from .services.assembly_service import BoundarySelection
from .services.pipeline_service import AdjointMode
from .services.uq_service import SweepKind
from .utils.config import settings
from .utils.errors import ConfigError


class ExperimentId(str, Enum):
    ONE = "1"
    TWO = "2"
    CUSTOM = "custom"


# Desk-scale defaults; --paper-scale swaps in PAPER_SCALE
DESK_SCALE: Dict[str, Any] = {"fine_n": 101, "coarse_n": 51, "samples": 100}
PAPER_SCALE: Dict[str, Any] = {"fine_n": 401, "coarse_n": 201, "samples": 1000}


class BoundarySelectionSchema(BaseModel):
    """Dirichlet part Gamma as side names, optionally with `side:lo:hi` intervals"""
    sides: List[str] = Field(..., min_length=1)

    @field_validator("sides")
    @classmethod
    def known_sides(cls, v):
        names = {s.value for s in Side}
        for entry in v:
            side = entry.split(":", 1)[0].strip()
            if side not in names:
                raise ValueError(f"Unknown boundary side {side!r} (expected one of {', '.join(sorted(names))})")
        return v

    @classmethod
    def parse(cls, text: str) -> "BoundarySelectionSchema":
        return cls(sides=[s.strip() for s in text.split(",") if s.strip()])

    def to_selection(self) -> BoundarySelection:
        return BoundarySelection.parse(",".join(self.sides))


class ExperimentConfig(BaseModel):
    """Two-grid experiment and ensemble parameters"""
    experiment: ExperimentId = ExperimentId.ONE
    preset: Optional[str] = Field(None, description="Coefficient preset for experiment=custom")
    bounds: Tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    fine_n: int = Field(DESK_SCALE["fine_n"], ge=3)
    coarse_n: int = Field(DESK_SCALE["coarse_n"], ge=3)
    samples: int = Field(DESK_SCALE["samples"], ge=1)
    levels: List[float] = Field(default_factory=lambda: [0.02, 0.04, 0.06, 0.08, 0.10], min_length=1)
    sweep: SweepKind = SweepKind.BOTH
    gamma: float = Field(default_factory=lambda: settings.DEFAULT_GAMMA)
    ell: float = Field(default_factory=lambda: settings.DEFAULT_ELL, gt=0)
    adjoint_mode: AdjointMode = AdjointMode.DATA
    partial_gamma: Optional[BoundarySelectionSchema] = None
    seed: int = Field(0, ge=0)
    out_dir: Optional[str] = None
    jobs: int = Field(1, ge=1)
    bound_check_count: int = Field(10, ge=0)
    bound_grid_n: int = Field(21, ge=3)
    chaos_order: int = Field(10, ge=1)
    plots: bool = False

    @field_validator("levels")
    @classmethod
    def levels_in_unit_interval(cls, v):
        for level in v:
            if not 0.0 < level < 1.0:
                raise ValueError(f"Uncertainty levels must lie in (0, 1), got {level}")
        return v

    @field_validator("bounds")
    @classmethod
    def nondegenerate_bounds(cls, v):
        if not (v[0] < v[1] and v[2] < v[3]):
            raise ValueError(f"Degenerate domain bounds {v}")
        return v

    @model_validator(mode="after")
    def grids_nested(self):
        if (self.fine_n - 1) % (self.coarse_n - 1) != 0:
            raise ValueError(
                f"Coarse grid ({self.coarse_n} nodes) is not nested in fine grid ({self.fine_n} nodes): "
                f"(fine_n - 1) must be a multiple of (coarse_n - 1)"
            )
        if self.experiment == ExperimentId.CUSTOM and not self.preset:
            raise ValueError("experiment=custom requires a coefficient preset")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"Unknown coefficient preset {self.preset!r} (expected one of {', '.join(PRESETS)})")
        return self

    @property
    def gamma_set(self) -> Optional[BoundarySelection]:
        return self.partial_gamma.to_selection() if self.partial_gamma else None


class RunManifest(BaseModel):
    """Everything needed to replay a run, plus wall times and summary numbers"""
    config: ExperimentConfig
    versions: Dict[str, str]
    started_at: datetime
    wall_times: Dict[str, float] = Field(default_factory=dict)
    baseline_error: Optional[float] = None
    failures: int = 0
    rejections: int = 0
    artifacts: List[str] = Field(default_factory=list)


# Keys accepted in the [experiment] section of an INI config
_INI_LIST_KEYS = {"levels"}
_INI_SECTIONS = ("experiment", "grid", "ensemble")


def _parse_ini(path: Path) -> Dict[str, Any]:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r") as handle:
            parser.read_file(handle)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file {path}: {e}") from e

    values: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in _INI_SECTIONS:
            raise ConfigError(f"Unknown config section [{section}] in {path}")
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key in _INI_LIST_KEYS:
                values[key] = [float(v) for v in raw.split(",") if v.strip()]
            elif key == "partial_gamma":
                values[key] = {"sides": [s.strip() for s in raw.split(",") if s.strip()]}
            elif key == "bounds":
                values[key] = [float(v) for v in raw.split(",")]
            else:
                values[key] = raw
    return values


def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Raw config values from an INI file or a JSON run manifest

    A manifest replays its embedded config.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, "r") as handle:
            payload = json.load(handle)
        return dict(payload.get("config", payload))
    return _parse_ini(path)
