"""Binary checkpoint format with a trailing CRC32.

Layout (all integers little-endian)::

    b"AUMC" | version u32 | header_len u32 | header (UTF-8 JSON)
    | n_params u32
    | per parameter: name_len u16 | name | dtype_len u8 | dtype | ndim u8
                     | shape u32 * ndim | nbytes u64 | payload
    | crc32 u32 over every preceding byte

The header carries the model configuration snapshot, stage index and step.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumError, ConfigError, UnsupportedVersion
from .model import AuMolModel, ModelConfig

MAGIC = b"AUMC"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    stage: int
    step: int
    arrays: dict[str, np.ndarray]
    extra: dict = field(default_factory=dict)

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.config)


def encode(ckpt: Checkpoint) -> bytes:
    header = json.dumps({"config": ckpt.config, "stage": ckpt.stage, "step": ckpt.step, "extra": ckpt.extra},
                        sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header, struct.pack("<I", len(ckpt.arrays))]
    for name, arr in ckpt.arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        payload = arr.astype(dtype, copy=False).tobytes()
        name_b, dtype_b = name.encode("utf-8"), dtype.str.encode("ascii")
        parts += [struct.pack("<H", len(name_b)), name_b, struct.pack("<B", len(dtype_b)), dtype_b,
                  struct.pack("<B", arr.ndim), struct.pack(f"<{arr.ndim}I", *arr.shape),
                  struct.pack("<Q", len(payload)), payload]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    """Parse checkpoint bytes; nothing is returned unless the CRC validates."""
    if len(blob) < 4 + 8 + 4 + 4:
        raise ChecksumError(f"{source}: checkpoint truncated ({len(blob)} bytes)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError(f"{source}: CRC32 mismatch, checkpoint is corrupt or truncated")
    if body[:4] != MAGIC:
        raise ChecksumError(f"{source}: not an AUMC checkpoint")
    version, header_len = struct.unpack_from("<II", body, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{source}: checkpoint format version {version}, this build reads {FORMAT_VERSION}")
    pos = 12
    header = json.loads(body[pos:pos + header_len].decode("utf-8"))
    pos += header_len
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n):
        (name_len,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (dtype_len,) = struct.unpack_from("<B", body, pos)
        pos += 1
        dtype = np.dtype(body[pos:pos + dtype_len].decode("ascii"))
        pos += dtype_len
        (ndim,) = struct.unpack_from("<B", body, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", body, pos)
        pos += 4 * ndim
        (nbytes,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        if name in arrays:
            raise ChecksumError(f"{source}: parameter {name} stored twice")
        arrays[name] = np.frombuffer(body[pos:pos + nbytes], dtype=dtype).reshape(shape).copy()
        pos += nbytes
    if pos != len(body):
        raise ChecksumError(f"{source}: {len(body) - pos} trailing bytes after the last parameter")
    return Checkpoint(header["config"], header["stage"], header["step"], arrays, header.get("extra", {}))


def from_model(model: AuMolModel, stage: int = 0, step: int = 0, extra: dict | None = None) -> Checkpoint:
    return Checkpoint(model.config.to_dict(), stage, step, dict(model.state_dict()), extra or {})


def save_checkpoint(path: str | Path, model: AuMolModel, stage: int = 0, step: int = 0,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(from_model(model, stage, step, extra)))
    os.replace(tmp, path)
    return path


def read_checkpoint(path: str | Path) -> Checkpoint:
    return decode(Path(path).read_bytes(), str(path))


def config_differences(expected: ModelConfig, found: dict) -> list[str]:
    want = expected.to_dict()
    keys = sorted(set(want) | set(found))
    return [k for k in keys if want.get(k) != found.get(k)]


def load_into(model: AuMolModel, ckpt: Checkpoint) -> AuMolModel:
    diff = config_differences(model.config, ckpt.config)
    if diff:
        details = ", ".join(f"{k}: model={model.config.to_dict().get(k)!r} checkpoint={ckpt.config.get(k)!r}" for k in diff)
        raise ConfigError(f"checkpoint config differs from model config ({details})")
    model.load_state_dict(ckpt.arrays)
    return model


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None) -> tuple[AuMolModel, Checkpoint]:
    """Rebuild the model stored at ``path``; with ``expected``, config fields must agree."""
    ckpt = read_checkpoint(path)
    if expected is not None:
        diff = config_differences(expected, ckpt.config)
        if diff:
            raise ConfigError(f"{path}: checkpoint differs from the requested config in {diff}")
    model = AuMolModel(ckpt.model_config())
    return load_into(model, ckpt), ckpt
