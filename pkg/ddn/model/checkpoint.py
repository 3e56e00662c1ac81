"""
Checkpoint container.

Layout: the magic bytes ``DDN1``, an 8-byte little-endian manifest length, a
UTF-8 YAML manifest (model config, init seed, frozen chain-rule paths, named
array list with shapes, optional trainer metadata), then every listed array as
little-endian float32 in manifest order.
"""
import io
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
import yaml
from dbt.events import AdapterLogger

from ddn.chain.paths import PermutationPaths
from ddn.exceptions import DdnConfigError, DdnIOError, exception_handler
from ddn.model.config import ModelConfig
from ddn.model.network import DdnModel


logger = AdapterLogger("DDN")

MAGIC = b"DDN1"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")
_FLOAT = np.dtype("<f4")


@dataclass
class Checkpoint:
    model: DdnModel
    extra_arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)


def _manifest(model: DdnModel, arrays: Dict[str, np.ndarray], metadata: Dict[str, Any]) -> bytes:
    parameter_names = {name for name, _ in model.named_parameters()}
    buffer_names = {name for name, _ in model.named_buffers()}

    def kind(name: str) -> str:
        if name in parameter_names:
            return "parameter"
        return "buffer" if name in buffer_names else "extra"

    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "init_seed": model.seed,
        "paths": model.paths.to_dict(),
        "arrays": [
            {
                "name": name,
                "kind": kind(name),
                "shape": list(array.shape),
            }
            for name, array in arrays.items()
        ],
        "metadata": metadata,
    }
    return yaml.safe_dump(_plain(manifest), sort_keys=True).encode("utf-8")


def _plain(value):
    """Enums and tuples to YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    return value


def dumps(
    model: DdnModel,
    extra_arrays: Optional[Dict[str, np.ndarray]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> bytes:
    arrays: Dict[str, np.ndarray] = dict(model.state_dict())
    for name, array in (extra_arrays or {}).items():
        if name in arrays:
            raise DdnConfigError(f"extra array '{name}' collides with a model array")
        arrays[name] = array
    manifest = _manifest(model, arrays, dict(metadata or {}))
    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(_LENGTH.pack(len(manifest)))
    buffer.write(manifest)
    for array in arrays.values():
        buffer.write(np.ascontiguousarray(array, dtype=_FLOAT).tobytes())
    return buffer.getvalue()


def loads(payload: bytes) -> Checkpoint:
    if payload[:4] != MAGIC:
        raise DdnConfigError("not a DDN checkpoint (bad magic bytes)")
    (length,) = _LENGTH.unpack_from(payload, 4)
    offset = 4 + _LENGTH.size
    manifest = yaml.safe_load(payload[offset : offset + length].decode("utf-8"))
    offset += length
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DdnConfigError(f"unsupported checkpoint version {manifest.get('format_version')}")

    config = ModelConfig.from_dict(manifest["model_config"])
    model = DdnModel(config, seed=manifest["init_seed"])
    stored_paths = PermutationPaths.from_dict(manifest["paths"])
    if stored_paths.paths != model.paths.paths:
        raise DdnConfigError("checkpoint paths differ from the paths rebuilt from its config")

    arrays: Dict[str, np.ndarray] = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * _FLOAT.itemsize
        if offset + nbytes > len(payload):
            raise DdnIOError(f"checkpoint truncated while reading '{entry['name']}'")
        arrays[entry["name"]] = (
            np.frombuffer(payload, dtype=_FLOAT, count=count, offset=offset).astype(np.float32).reshape(shape)
        )
        offset += nbytes

    model_keys = set(model.state_dict())
    model.load_state_dict({k: v for k, v in arrays.items() if k in model_keys})
    extra = {k: v for k, v in arrays.items() if k not in model_keys}
    return Checkpoint(model=model, extra_arrays=extra, metadata=manifest.get("metadata") or {})


def save_checkpoint(
    path: str,
    model: DdnModel,
    extra_arrays: Optional[Dict[str, np.ndarray]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> None:
    payload = dumps(model, extra_arrays, metadata)
    with exception_handler(f"writing checkpoint {path}"):
        with open(path, "wb") as f:
            f.write(payload)


def load_checkpoint(path: str) -> Checkpoint:
    with exception_handler(f"reading checkpoint {path}"):
        with open(path, "rb") as f:
            payload = f.read()
    checkpoint = loads(payload)
    logger.debug(f"Loaded {len(checkpoint.model.state_dict())} arrays from {path}")
    return checkpoint

