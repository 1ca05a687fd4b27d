from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, Field, field_validator
from xdg_base_dirs import xdg_config_home

CONFIG_DIR: Path = xdg_config_home() / "terrabstract"
CONFIG_FILE: Path = CONFIG_DIR / "config.yaml"


class Config(BaseModel, validate_assignment=True, validate_default=True):
    """Run-wide defaults.

    Values can be overridden in `$XDG_CONFIG_HOME/terrabstract/config.yaml`
    or by assigning to the attributes of `CONFIG`.
    """

    slope_max_deg: float = Field(45.0, gt=0, le=90)
    spacing: float = Field(2.0, gt=0)
    detour_max: float = Field(1.5, gt=1)
    vstep_max: float | None = Field(None, ge=0)
    """None means half the waypoint spacing."""
    cost_mode: Literal["unit", "euclid"] = "unit"
    elo_k_factor: float = Field(16.0, gt=0)
    elo_initial_rating: float = 1200.0
    output_root_dir: Path = Path(".")

    @field_validator("output_root_dir")
    def _make_dir(cls, path):
        """Create dirs if they don't exist yet."""
        if not path.exists():
            path.mkdir(parents=True)
        return path

    @classmethod
    def from_file(cls, path: Path = CONFIG_FILE) -> "Config":
        """Read overrides from a yaml file, falling back to defaults."""
        if not path.exists():
            return cls()
        with open(path, "r") as f:
            options = yaml.safe_load(f) or {}
        return cls(**options)


CONFIG = Config.from_file()
