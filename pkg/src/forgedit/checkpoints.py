"""Binary serialization for checkpoints and embeddings.

A checkpoint payload is a length-prefixed canonical JSON manifest
(name -> shape, dtype, role, byte offset) followed by one little-endian
float32 blob. Entries are sorted by name so identical tensor content always
produces identical bytes; round trips are bit-exact.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ContractError
from .params import ParameterRole, ParameterSnapshot

FORMAT_VERSION = 1
_HEADER = struct.Struct("<I")
_F32 = np.dtype("<f4")


def _pack(manifest: dict, blob: bytes) -> bytes:
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(len(head)) + head + blob


def _unpack(payload: bytes) -> tuple[dict, bytes]:
    if len(payload) < _HEADER.size:
        raise ContractError("payload too short to be a tensor container")
    (head_len,) = _HEADER.unpack_from(payload)
    head_end = _HEADER.size + head_len
    if len(payload) < head_end:
        raise ContractError("truncated tensor container manifest")
    try:
        manifest = json.loads(payload[_HEADER.size:head_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContractError(f"unreadable tensor container manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContractError(f"unsupported container format_version {manifest.get('format_version')!r}")
    return manifest, payload[head_end:]


def snapshot_to_bytes(snapshot: ParameterSnapshot) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(snapshot.names()):
        data = np.ascontiguousarray(snapshot[name], dtype=_F32)
        raw = data.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(data.shape),
                "dtype": "float32",
                "role": snapshot.role(name).key,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {"format_version": FORMAT_VERSION, "kind": "checkpoint", "entries": entries}
    return _pack(manifest, b"".join(chunks))


def snapshot_from_bytes(payload: bytes) -> ParameterSnapshot:
    manifest, blob = _unpack(payload)
    if manifest.get("kind") != "checkpoint":
        raise ContractError(f"container holds {manifest.get('kind')!r}, not a checkpoint")
    entries: dict[str, np.ndarray] = {}
    roles: dict[str, ParameterRole] = {}
    for entry in manifest["entries"]:
        if entry["dtype"] != "float32":
            raise ContractError(f"unsupported dtype {entry['dtype']!r} for {entry['name']!r}")
        start, end = entry["offset"], entry["offset"] + entry["nbytes"]
        if end > len(blob):
            raise ContractError(f"blob truncated at parameter {entry['name']!r}")
        data = np.frombuffer(blob[start:end], dtype=_F32).reshape(entry["shape"])
        entries[entry["name"]] = data.copy()
        roles[entry["name"]] = ParameterRole.from_key(entry["role"])
    return ParameterSnapshot(entries, roles)


def embedding_to_bytes(embedding: np.ndarray) -> bytes:
    data = np.ascontiguousarray(embedding, dtype=_F32)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "embedding",
        "dtype": "float32",
        "shape": list(data.shape),
    }
    return _pack(manifest, data.tobytes())


def embedding_from_bytes(payload: bytes) -> np.ndarray:
    manifest, blob = _unpack(payload)
    if manifest.get("kind") != "embedding":
        raise ContractError(f"container holds {manifest.get('kind')!r}, not an embedding")
    return np.frombuffer(blob, dtype=_F32).reshape(manifest["shape"]).copy()
