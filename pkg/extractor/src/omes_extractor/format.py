"""Writer for the OMES embedding file format.

This is an independent implementation of the wire contract shared with
the matching harness, so files written here are the entire interface
between the two components:

    magic "OMES" | version u32 | count u32 | dim u32 | dtype u32 (0 =
    float32 LE) | normalized u32 | provenance length u32 | provenance
    UTF-8 | row-major float32 payload (count * dim * 4 bytes exactly)

All integers little-endian. Row ids go to a ``path + ".idx"`` JSON Lines
sidecar, one ``{"crop_id": ..., "row": ...}`` object per line.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"OMES"
VERSION = 1
DTYPE_F32_LE = 0
_HEADER = struct.Struct("<4sIIIIII")


def write_omes(
    matrix: np.ndarray,
    ids: Sequence[str],
    provenance: str,
    path,
    normalized: bool = False,
) -> Path:
    """Write vectors plus id sidecar atomically; returns the file path."""
    path = Path(path)
    m = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<f4")
    if m.shape[0] != len(ids):
        raise ValueError(f"{m.shape[0]} rows but {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise ValueError("row ids are not unique")
    prov = provenance.encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, m.shape[0], m.shape[1], DTYPE_F32_LE,
        1 if normalized else 0, len(prov),
    )
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header + prov + m.tobytes())
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    idx_path = Path(str(path) + ".idx")
    idx_tmp = idx_path.with_name(idx_path.name + ".tmp")
    with open(idx_tmp, "w", encoding="utf-8") as f:
        for i, crop_id in enumerate(ids):
            f.write(json.dumps({"crop_id": str(crop_id), "row": i}, sort_keys=True))
            f.write("\n")
    os.replace(idx_tmp, idx_path)
    return path


def read_omes(path) -> tuple[np.ndarray, list[str], str, bool]:
    """Minimal reader used by this package's own tests."""
    blob = Path(path).read_bytes()
    magic, version, count, dim, dtype, normalized, prov_len = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION or dtype != DTYPE_F32_LE:
        raise ValueError(f"{path}: unsupported header")
    prov_end = _HEADER.size + prov_len
    provenance = blob[_HEADER.size:prov_end].decode("utf-8")
    payload = blob[prov_end:]
    if len(payload) != count * dim * 4:
        raise ValueError(f"{path}: bad payload length")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    ids: list[str] = [""] * count
    with open(str(path) + ".idx", "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                entry = json.loads(line)
                ids[int(entry["row"])] = str(entry["crop_id"])
    return matrix, ids, provenance, bool(normalized)
