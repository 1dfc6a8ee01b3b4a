"""Binary named-array container shared by checkpoints and extractor weights.

Layout, all little-endian:

    magic "HSPN" | version u32 | meta length u32 | meta (UTF-8 JSON)
    then per array: name length u32 | name (UTF-8) | rank u32 | dims u32[rank]
                    | float32 data, row-major

The writer is fully deterministic (sorted-key JSON, insertion-order arrays),
so save -> load -> save round-trips byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"HSPN"
VERSION = 1


def encode_meta(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    blob = encode_meta(meta)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name, arr in arrays.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", data.ndim))
            if data.ndim:
                f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes(order="C"))


def _read_exact(f, count: int, what: str) -> bytes:
    buf = f.read(count)
    if len(buf) != count:
        raise CheckpointError(f"truncated container while reading {what}")
    return buf


def read_container(path: str | Path) -> tuple[int, dict, dict[str, np.ndarray]]:
    """Return (version, meta, arrays); arrays preserve file order."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a parameter archive (bad magic)")
        version = struct.unpack("<I", _read_exact(f, 4, "version"))[0]
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported container version {version}")
        meta_len = struct.unpack("<I", _read_exact(f, 4, "meta length"))[0]
        try:
            meta = json.loads(_read_exact(f, meta_len, "meta block").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt meta block: {exc}") from exc
        arrays: dict[str, np.ndarray] = {}
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CheckpointError("truncated container while reading entry header")
            name_len = struct.unpack("<I", head)[0]
            name = _read_exact(f, name_len, "entry name").decode("utf-8")
            rank = struct.unpack("<I", _read_exact(f, 4, "entry rank"))[0]
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "entry dims")) if rank else ()
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            raw = _read_exact(f, 4 * count, f"data of {name!r}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return version, meta, arrays
