"""
Runtime settings.

Defaults live on the Settings model. A YAML file overrides them: an explicit
path, then $NILREG_CONFIG, then ./nilreg.yaml. CLI flags override the file.
"""
import logging
import os
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from nilreg.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = "nilreg.yaml"


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    workers: int = Field(1, ge=1)
    max_elements: int = Field(50_000_000, gt=0)
    coset_budget: int = Field(100_000, gt=0)
    cache_dir: Optional[str] = None
    fit_tolerance: float = Field(0.4, gt=0)
    process_slack: float = Field(1.5, ge=1.0)
    critical_retries: int = Field(20, ge=1)
    realize_c0_start: float = Field(8.0, gt=1.0)
    grid_points: int = Field(8, ge=8)
    max_intervals: int = Field(20_000_000, gt=0)
    log_level: str = "INFO"
    log_every: int = Field(4, ge=1)


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Load settings from YAML, falling back to defaults when no file exists."""
    candidate = path or os.environ.get("NILREG_CONFIG")
    if candidate is None and Path(DEFAULT_CONFIG_NAME).is_file():
        candidate = DEFAULT_CONFIG_NAME
    if candidate is None:
        return Settings()

    config_path = Path(candidate)
    if not config_path.is_file():
        raise ConfigurationError(f"config file not found: {config_path}", path=config_path)
    with config_path.open("r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must contain a mapping", path=config_path)
    try:
        settings = Settings(**raw)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config {config_path}: {exc}", path=config_path) from exc
    logger.debug("loaded settings from %s", config_path)
    return settings
