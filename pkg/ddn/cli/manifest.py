"""
Run manifests.

Every command writes ``run_manifest.yml`` next to its artifacts: the argv it
was called with, the resolved configs, seeds, inputs, outputs, package version
and start/finish timestamps. ``ddn replay`` re-runs the recorded argv.
"""
import datetime
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml
from mashumaro import DataClassDictMixin

from ddn.__version__ import version
from ddn.exceptions import DdnConfigError, exception_handler

MANIFEST_FILE = "run_manifest.yml"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest(DataClassDictMixin):
    command: str
    argv: List[str]
    config: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    inputs: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    version: str = version
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    def add_artifact(self, path: str) -> None:
        if path not in self.artifacts:
            self.artifacts.append(str(path))

    def finish(self) -> None:
        self.finished_at = _now()

    def write(self, path: str) -> str:
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_FILE)
        with exception_handler(f"writing manifest {path}"):
            with open(path, "w", encoding="utf-8") as f:
                yaml.safe_dump(self.to_dict(), f, sort_keys=True, allow_unicode=True)
        return path


def read_manifest(path: str) -> RunManifest:
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_FILE)
    with exception_handler(f"reading manifest {path}"):
        with open(path, encoding="utf-8") as f:
            content = yaml.safe_load(f)
    try:
        return RunManifest.from_dict(content)
    except Exception as e:
        raise DdnConfigError(f"{path} is not a run manifest: {e}")
