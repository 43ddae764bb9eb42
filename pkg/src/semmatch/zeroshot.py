"""Zero-shot classification over prompt confidence matrices.

Covers prompt formatting and ensembling plus top-k accuracy scoring.
Prompt text lives in configuration files, so swapping label wordings is
a data change, not a code change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import ClassMatrix, EmbeddingSet, normalize_set
from .errors import EmptyVariantList, KOutOfRange, UnknownLabel, ZeroNormVector

MODE_PLAIN = "plain"
MODE_PICTURE_OF = "picture_of"
MODE_ENSEMBLE = "ensemble"
TEMPLATE_MODES = (MODE_PLAIN, MODE_PICTURE_OF, MODE_ENSEMBLE)

# The four ensemble formats applied to every written description.
ENSEMBLE_TEMPLATES = (
    "A picture of a {}",
    "A picture of a {}, a product",
    "A {}, a product",
    "{}",
)


@dataclass(frozen=True)
class PromptSet:
    """Class labels with their written description variants."""

    classes: tuple[str, ...]
    variants: dict[str, tuple[str, ...]] = field(default_factory=dict)
    template_mode: str = MODE_PLAIN

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        filled = {}
        for c in self.classes:
            v = tuple(self.variants.get(c, (c,)))
            if not v:
                raise EmptyVariantList(f"class {c!r} has no prompt variants")
            filled[c] = v
        object.__setattr__(self, "variants", filled)
        if self.template_mode not in TEMPLATE_MODES:
            raise ValueError(f"unknown template_mode {self.template_mode!r}")


def expand_prompts(p: PromptSet) -> list[tuple[str, str]]:
    """Expand a PromptSet into (class label, prompt string) pairs.

    plain emits each description verbatim; picture_of wraps each in
    "A picture of a {...}"; ensemble applies all four ensemble formats
    to every description (around 20 prompts per class for 5
    descriptions).
    """
    out: list[tuple[str, str]] = []
    for c in p.classes:
        descriptions = p.variants[c]
        if p.template_mode == MODE_PLAIN:
            out.extend((c, d) for d in descriptions)
        elif p.template_mode == MODE_PICTURE_OF:
            out.extend((c, f"A picture of a {d}") for d in descriptions)
        else:
            for d in descriptions:
                out.extend((c, t.format(d)) for t in ENSEMBLE_TEMPLATES)
    return out


def ensemble_embed(variant_vectors: EmbeddingSet) -> EmbeddingSet:
    """Reduce per-variant prompt vectors to one unit vector per class.

    ``variant_vectors`` must carry class labels as crop_ids (repeated per
    variant). Per class the arithmetic mean of its variants is taken and
    re-normalized; class order follows first appearance.
    """
    index: dict[str, list[int]] = {}
    for i, label in enumerate(variant_vectors.crop_ids):
        index.setdefault(label, []).append(i)
    labels = list(index)
    means = np.stack(
        [variant_vectors.matrix[index[lab]].mean(axis=0) for lab in labels]
    )
    norms = np.linalg.norm(means, axis=1)
    dead = np.where(norms == 0.0)[0]
    if dead.size:
        raise ZeroNormVector(
            int(dead[0]), f"variants of class {labels[dead[0]]!r} cancel exactly"
        )
    return normalize_set(means, labels, variant_vectors.provenance)


def _rank_columns(row: np.ndarray) -> np.ndarray:
    # Descending score; equal scores keep ascending column order.
    return np.argsort(-row, kind="stable")


def topk_accuracy(c: ClassMatrix, truth: dict[str, str], k: int) -> float:
    """Percentage of rows whose true label ranks inside the top k entries."""
    n_classes = len(c.col_labels)
    if not (1 <= k <= n_classes):
        raise KOutOfRange(f"k={k} outside 1..{n_classes}")
    col_of = {lab: j for j, lab in enumerate(c.col_labels)}
    hits = 0
    for i, crop_id in enumerate(c.row_ids):
        if crop_id not in truth:
            raise UnknownLabel(f"no ground-truth label for crop {crop_id!r}")
        label = truth[crop_id]
        if label not in col_of:
            raise UnknownLabel(f"label {label!r} not among prompt columns")
        order = _rank_columns(c.entries[i])
        if col_of[label] in order[:k]:
            hits += 1
    return 100.0 * hits / len(c.row_ids)


@dataclass(frozen=True)
class ClassificationOutcome:
    """Ranked predictions per object plus top-1/top-5 accuracy."""

    ranked: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    top1_accuracy: float
    top5_accuracy: float


def classification_outcome(c: ClassMatrix, truth: dict[str, str]) -> ClassificationOutcome:
    """Full ranked outcome; top-5 falls back to top-K when K < 5."""
    ranked = []
    for i, crop_id in enumerate(c.row_ids):
        order = _rank_columns(c.entries[i])
        ranked.append(
            (
                crop_id,
                tuple((c.col_labels[j], float(c.entries[i, j])) for j in order),
            )
        )
    k5 = min(5, len(c.col_labels))
    return ClassificationOutcome(
        ranked=tuple(ranked),
        top1_accuracy=topk_accuracy(c, truth, 1),
        top5_accuracy=topk_accuracy(c, truth, k5),
    )
