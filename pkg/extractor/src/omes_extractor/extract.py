"""Batch extraction: manifest or prompt file in, OMES embedding file out.

Rows follow manifest (or prompt expansion) order exactly; vectors are
written unnormalized with provenance equal to the model id. A
``<output>.meta.json`` sidecar records the preprocessing policy and
model variant for auditability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .format import write_omes
from .models import DEFAULT_CLIP_VARIANT, Encoder, load_encoder
from .preprocess import load_crop

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

# the four ensemble formats the harness applies to every description
ENSEMBLE_TEMPLATES = (
    "A picture of a {}",
    "A picture of a {}, a product",
    "A {}, a product",
    "{}",
)


class DecodeError(RuntimeError):
    """A crop image could not be located or decoded."""

    def __init__(self, crop_id: str, message: str):
        self.crop_id = crop_id
        super().__init__(f"crop {crop_id!r}: {message}")


@dataclass(frozen=True)
class ExtractorSpec:
    """What to run: one model over one manifest (or one prompt file)."""

    model_id: str
    output: Path
    manifest: Path | None = None
    image_root: Path | None = None
    prompt_file: Path | None = None
    variant: str = DEFAULT_CLIP_VARIANT
    batch_size: int = 16
    pretrained: bool = True

    def __post_init__(self):
        wants_text = self.model_id == "clip-text"
        if wants_text and self.prompt_file is None:
            raise ValueError("clip-text needs a prompt file")
        if wants_text and self.manifest is not None:
            raise ValueError("text inputs are only valid for clip-text; "
                             "crop manifests are not")
        if not wants_text and (self.manifest is None or self.image_root is None):
            raise ValueError(f"{self.model_id} needs a manifest and an image root")
        if not wants_text and self.prompt_file is not None:
            raise ValueError(f"{self.model_id} cannot encode prompt files")


def read_manifest_rows(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def expand_prompt_file(path) -> list[tuple[str, str]]:
    """(class label, prompt string) pairs per the shared prompt-file contract."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    mode = doc.get("template_mode", "plain")
    out: list[tuple[str, str]] = []
    for label, descriptions in doc["variants"].items():
        descriptions = list(descriptions) or [label]
        if mode == "plain":
            out.extend((label, d) for d in descriptions)
        elif mode == "picture_of":
            out.extend((label, f"A picture of a {d}") for d in descriptions)
        elif mode == "ensemble":
            for d in descriptions:
                out.extend((label, t.format(d)) for t in ENSEMBLE_TEMPLATES)
        else:
            raise ValueError(f"unknown template_mode {mode!r}")
    return out


def _find_image(root: Path, image_id: str) -> Path:
    for ext in IMAGE_EXTENSIONS:
        cand = root / f"{image_id}{ext}"
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no image for {image_id!r} under {root}")


def _batched(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def extract(spec: ExtractorSpec, encoder: Encoder | None = None) -> Path:
    """Run the extraction described by ``spec``; returns the output path.

    ``encoder`` may be injected for testing; by default it is resolved
    from the model registry (downloading pretrained weights on first
    use).
    """
    if encoder is None:
        encoder = load_encoder(spec.model_id, spec.variant, spec.pretrained)

    if spec.model_id == "clip-text":
        pairs = expand_prompt_file(spec.prompt_file)
        ids = [text for _, text in pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("prompt expansion produced duplicate strings")
        blocks = [
            encoder.encode_texts(chunk) for chunk in _batched(ids, spec.batch_size)
        ]
        matrix = np.vstack(blocks)
    else:
        rows = read_manifest_rows(spec.manifest)
        ids = [str(r["crop_id"]) for r in rows]
        crops = []
        for r in rows:
            try:
                img_path = _find_image(Path(spec.image_root), str(r["image_id"]))
                crops.append(load_crop(img_path, r["bbox"]))
            except Exception as err:
                raise DecodeError(str(r["crop_id"]), str(err)) from err
        blocks = [
            encoder.encode_images(chunk) for chunk in _batched(crops, spec.batch_size)
        ]
        matrix = np.vstack(blocks)

    write_omes(matrix, ids, spec.model_id, spec.output, normalized=False)
    meta = {
        "model_id": spec.model_id,
        "variant": spec.variant if spec.model_id.startswith("clip") else None,
        "preprocessing": encoder.preprocessing,
        "pretrained": spec.pretrained,
        "rows": len(ids),
        "dim": int(matrix.shape[1]),
    }
    Path(str(spec.output) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return Path(spec.output)
