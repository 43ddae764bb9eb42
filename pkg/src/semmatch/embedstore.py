"""Bit-exact persistence for embeddings, manifests, prompts, problems, reports.

The embedding file layout (all integers unsigned 32-bit little-endian):

    offset  size  field
    0       4     magic "OMES"
    4       4     version (= 1)
    8       4     count
    12      4     dim
    16      4     dtype code (0 = IEEE-754 float32 little-endian)
    20      4     normalized flag (0/1)
    24      4     provenance byte length
    28      n     provenance, UTF-8
    28+n    -     payload: count * dim * 4 bytes, row-major

The payload length must match exactly; trailing bytes are an error. Crop
ids live in a JSON Lines sidecar at ``path + ".idx"`` with one
``{"crop_id": ..., "row": ...}`` object per line. Files are written to a
temp path and renamed, so readers never observe partial writes. Every
multi-byte field is explicitly little-endian, which keeps the decode
path correct on big-endian hosts.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .benchgen import CropRecord, MatchingProblem, PoolManifest
from .embed import EmbeddingSet
from .errors import (
    BadMagic,
    InvalidSet,
    MissingSidecar,
    NormViolation,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
)
from .evalkit import BenchmarkReport, report_csv, report_json, report_text
from .tolerances import READ_NORM_TOL
from .zeroshot import PromptSet

MAGIC = b"OMES"
VERSION = 1
DTYPE_F32_LE = 0
_HEADER = struct.Struct("<4sIIIIII")


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_embeddings(es: EmbeddingSet, path) -> None:
    """Serialize an EmbeddingSet; values are stored as float32 LE.

    Rewriting the same set produces byte-identical files. The crop-id
    index goes to ``path + ".idx"``.
    """
    path = Path(path)
    if len(es.crop_ids) != es.matrix.shape[0]:
        raise InvalidSet("crop id count does not match row count")
    payload = np.ascontiguousarray(es.matrix, dtype="<f4").tobytes()
    prov = es.provenance.encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        es.matrix.shape[0],
        es.matrix.shape[1],
        DTYPE_F32_LE,
        1 if es.normalized else 0,
        len(prov),
    )
    _atomic_write_bytes(path, header + prov + payload)
    idx_lines = "".join(
        json.dumps({"crop_id": c, "row": i}, sort_keys=True) + "\n"
        for i, c in enumerate(es.crop_ids)
    )
    _atomic_write_text(Path(str(path) + ".idx"), idx_lines)


def read_embeddings(path) -> EmbeddingSet:
    """Load an embedding file, validating header, payload size and norms."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than header")
    magic, version, count, dim, dtype, normalized, prov_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} != {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}")
    if dtype != DTYPE_F32_LE:
        raise UnsupportedDtype(f"{path}: dtype code {dtype}")
    prov_end = _HEADER.size + prov_len
    if len(blob) < prov_end:
        raise TruncatedPayload(f"{path}: provenance extends past end of file")
    provenance = blob[_HEADER.size:prov_end].decode("utf-8")
    payload = blob[prov_end:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    matrix = (
        np.frombuffer(payload, dtype="<f4")
        .reshape(count, dim)
        .astype(np.float64)
    )
    idx_path = Path(str(path) + ".idx")
    if not idx_path.exists():
        raise MissingSidecar(f"{idx_path} not found")
    ids: list[str] = [""] * count
    rows_seen = 0
    with open(idx_path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            entry = json.loads(line)
            ids[int(entry["row"])] = str(entry["crop_id"])
            rows_seen += 1
    if rows_seen != count:
        raise MissingSidecar(
            f"{idx_path}: {rows_seen} index rows for {count} embedding rows"
        )
    if normalized:
        norms = np.linalg.norm(matrix, axis=1)
        bad = np.where(np.abs(norms - 1.0) > READ_NORM_TOL)[0]
        if bad.size:
            raise NormViolation(int(bad[0]), float(norms[bad[0]]))
    return EmbeddingSet(
        matrix, tuple(ids), provenance, normalized=bool(normalized)
    )


# --- JSON Lines manifest ---

def save_manifest(pool: PoolManifest, path) -> None:
    lines = "".join(
        json.dumps(r.to_json_dict(), sort_keys=True) + "\n" for r in pool.records
    )
    _atomic_write_text(Path(path), lines)


def load_manifest(path, view_distance_path=None) -> PoolManifest:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(CropRecord.from_json_dict(json.loads(line)))
    distances = None
    if view_distance_path is not None:
        distances = load_view_distances(view_distance_path)
    return PoolManifest(tuple(records), distances)


def save_view_distances(distances: Mapping[tuple[str, int, int], float], path) -> None:
    doc = {
        f"{scene}/{va}/{vb}": float(d)
        for (scene, va, vb), d in sorted(distances.items())
    }
    _atomic_write_text(Path(path), json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_view_distances(path) -> dict[tuple[str, int, int], float]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for key, d in doc.items():
        scene, va, vb = key.rsplit("/", 2)
        a, b = int(va), int(vb)
        out[(scene, min(a, b), max(a, b))] = float(d)
    return out


# --- prompt files ---

def save_prompt_set(p: PromptSet, path) -> None:
    doc = {
        "template_mode": p.template_mode,
        "variants": {c: list(p.variants[c]) for c in p.classes},
    }
    _atomic_write_text(Path(path), json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def load_prompt_set(path) -> PromptSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    variants = {str(c): tuple(v) for c, v in doc["variants"].items()}
    return PromptSet(
        classes=tuple(variants),
        variants=variants,
        template_mode=doc.get("template_mode", "plain"),
    )


# --- problem files ---

def save_problems(problems: Sequence[MatchingProblem], path) -> None:
    lines = []
    for p in problems:
        lines.append(
            json.dumps(
                {
                    "setting_tag": p.setting_tag,
                    "instance_level": p.instance_level,
                    "source_crops": [c.to_json_dict() for c in p.source_crops],
                    "target_crops": [c.to_json_dict() for c in p.target_crops],
                    "ground_truth": sorted([t, s] for t, s in p.ground_truth),
                },
                sort_keys=True,
            )
            + "\n"
        )
    _atomic_write_text(Path(path), "".join(lines))


def load_problems(path) -> list[MatchingProblem]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            doc = json.loads(line)
            out.append(
                MatchingProblem(
                    source_crops=tuple(
                        CropRecord.from_json_dict(c) for c in doc["source_crops"]
                    ),
                    target_crops=tuple(
                        CropRecord.from_json_dict(c) for c in doc["target_crops"]
                    ),
                    ground_truth=frozenset(
                        (t, s) for t, s in doc["ground_truth"]
                    ),
                    setting_tag=doc["setting_tag"],
                    instance_level=bool(doc.get("instance_level", True)),
                )
            )
    return out


# --- reports ---

def save_report(report: BenchmarkReport, base_path) -> dict[str, Path]:
    """Write report.json / report.csv / report.txt next to ``base_path``.

    ``base_path`` is the stem; extensions are appended. Returns the
    written paths keyed by format.
    """
    base = Path(base_path)
    paths = {
        "json": base.with_suffix(".json"),
        "csv": base.with_suffix(".csv"),
        "txt": base.with_suffix(".txt"),
    }
    _atomic_write_text(paths["json"], report_json(report))
    _atomic_write_text(paths["csv"], report_csv(report))
    _atomic_write_text(paths["txt"], report_text(report))
    return paths
