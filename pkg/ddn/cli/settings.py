import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import yaml

from ddn.exceptions import DdnConfigError, DdnIOError, exception_handler
from ddn.include import PACKAGE_PATH

DEFAULTS_PATH = os.path.join(PACKAGE_PATH, "defaults.yml")
DATA_DIR_ENV = "DDN_DATA_DIR"
SECTIONS = ("model", "train")


def read_yaml(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise DdnIOError(f"config file not found: {path}")
    with exception_handler(f"reading {path}"):
        with open(path, encoding="utf-8") as f:
            try:
                content = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise DdnConfigError(f"{path} is not valid YAML: {e}")
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise DdnConfigError(f"{path} must hold a mapping with 'model' and/or 'train' sections")
    return content


@dataclass
class Settings:
    """Model and training fields from the packaged defaults, overlaid by a --config file."""

    model: Dict[str, Any] = field(default_factory=dict)
    train: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, config_path: Optional[str] = None) -> "Settings":
        settings = cls()
        settings.merge(read_yaml(DEFAULTS_PATH))
        if config_path:
            settings.merge(read_yaml(config_path), source=config_path)
        return settings

    def merge(self, content: Dict[str, Any], source: str = "defaults") -> None:
        unknown = set(content) - set(SECTIONS)
        if unknown:
            raise DdnConfigError(f"{source}: unknown sections {', '.join(sorted(unknown))}; expected model and train")
        for section in SECTIONS:
            values = content.get(section) or {}
            if not isinstance(values, dict):
                raise DdnConfigError(f"{source}: section '{section}' must be a mapping")
            getattr(self, section).update(values)

    def model_with(self, **overrides: Any) -> Dict[str, Any]:
        merged = dict(self.model)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return merged

    def train_with(self, **overrides: Any) -> Dict[str, Any]:
        merged = dict(self.train)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return merged


def data_dir(explicit: Optional[str] = None) -> str:
    return explicit or os.environ.get(DATA_DIR_ENV) or os.getcwd()
