"""Binary checkpoint container for every model kind.

Layout: magic "TCKP", u16 version, u32 manifest length, JSON manifest
(tensor name -> shape/offset, model kind, spec, metadata), raw little-endian
float32 tensor data, trailing CRC32 over everything before it.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TCKP"
VERSION = 1

MODEL_KINDS = {
    "teacher",
    "transformer",
    "tcn-latent",
    "tcn-student",
    "latent-transformer",
}


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedFileError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


class UnknownModelKindError(CheckpointError):
    pass


@dataclass
class PolicyCheckpoint:
    kind: str
    spec: dict
    metadata: dict = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise UnknownModelKindError(f"unknown model kind {self.kind!r}")

    @classmethod
    def from_params(cls, kind: str, spec: dict, params: dict, metadata: dict | None = None):
        tensors = {
            name: np.ascontiguousarray(p.data if hasattr(p, "data") else p, dtype=np.float32)
            for name, p in params.items()
        }
        return cls(kind=kind, spec=spec, metadata=metadata or {}, tensors=tensors)

    def load_into(self, params: dict) -> None:
        """Copy stored tensors into a live parameter table (names must match)."""
        missing = set(params) - set(self.tensors)
        extra = set(self.tensors) - set(params)
        if missing or extra:
            raise CheckpointError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in params.items():
            stored = self.tensors[name]
            if stored.shape != p.data.shape:
                raise CheckpointError(
                    f"tensor {name!r}: stored shape {stored.shape} != model shape {p.data.shape}"
                )
            p.data = stored.astype(p.data.dtype).copy()


def save_checkpoint(ckpt: PolicyCheckpoint, path) -> None:
    names = sorted(ckpt.tensors)
    offset = 0
    entries = {}
    for name in names:
        arr = ckpt.tensors[name]
        entries[name] = {"shape": list(arr.shape), "offset": offset}
        offset += arr.size * 4
    manifest = json.dumps(
        {"kind": ckpt.kind, "spec": ckpt.spec, "metadata": ckpt.metadata, "tensors": entries},
        sort_keys=True,
    ).encode()
    body = MAGIC + struct.pack("<HI", VERSION, len(manifest)) + manifest
    for name in names:
        body += ckpt.tensors[name].astype("<f4").tobytes()
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(body)


def load_checkpoint(path) -> PolicyCheckpoint:
    raw = Path(path).read_bytes()
    if len(raw) < 14:
        raise TruncatedFileError(f"{path}: file too short ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    version, manifest_len = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {VERSION}")
    header_end = 10 + manifest_len
    if header_end > len(raw) - 4:
        raise TruncatedFileError(f"{path}: manifest extends past end of file")
    manifest = json.loads(raw[10:header_end].decode())
    data_size = 0
    for entry in manifest["tensors"].values():
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        data_size = max(data_size, entry["offset"] + count * 4)
    expected_total = header_end + data_size + 4
    if len(raw) < expected_total:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, expected {expected_total}")
    stored_crc = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{path}: CRC32 mismatch")
    kind = manifest.get("kind")
    if kind not in MODEL_KINDS:
        raise UnknownModelKindError(f"{path}: unknown model kind {kind!r}")
    data = raw[header_end:-4]
    tensors = {}
    for name, entry in manifest["tensors"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        tensors[name] = np.frombuffer(data[start:start + count * 4], dtype="<f4").reshape(shape).copy()
    return PolicyCheckpoint(kind=kind, spec=manifest["spec"], metadata=manifest["metadata"], tensors=tensors)
