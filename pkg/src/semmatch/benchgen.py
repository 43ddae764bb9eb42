"""Benchmark problem construction.

Builds matching problems in three families: same-scene view pairs of
graded difficulty (easy/medium), cross-scene pairs within or across
settings (hard/hardest), and synthetic N-way problems sampled per class
whitelist. A planted-cluster embedding generator provides a model-free
stand-in for deep features so every matcher can be exercised without
any network weights.

All stochastic operations take an explicit seed and use numpy's PCG64
generator, so output is identical across runs and platforms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .embed import EmbeddingSet
from .errors import (
    DegenerateConcepts,
    InsufficientCrops,
    MissingViewDistance,
    NTooLarge,
)

log = logging.getLogger(__name__)

NWAY_MIN_AREA = 32 * 32  # annotations smaller than this are disregarded
CONCEPT_OVERLAP_CAP = 0.9
CONCEPT_RETRIES = 32

SETTING_TAGS = ("easy", "medium", "hard", "hardest", "nway")


@dataclass(frozen=True)
class CropRecord:
    """Metadata for one segmented object crop."""

    crop_id: str
    image_id: str
    scene_id: str
    view_id: int
    setting: str
    class_label: str
    bbox: tuple[int, int, int, int]
    area_px: int
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))
        if self.area_px < 1:
            raise ValueError(f"crop {self.crop_id!r}: area_px must be >= 1")

    def to_json_dict(self) -> dict:
        d = {
            "crop_id": self.crop_id,
            "image_id": self.image_id,
            "scene_id": self.scene_id,
            "view_id": self.view_id,
            "setting": self.setting,
            "class_label": self.class_label,
            "bbox": list(self.bbox),
            "area_px": self.area_px,
        }
        for k, v in self.extra.items():
            d.setdefault(k, v)
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "CropRecord":
        known = {
            "crop_id",
            "image_id",
            "scene_id",
            "view_id",
            "setting",
            "class_label",
            "bbox",
            "area_px",
        }
        return cls(
            crop_id=str(d["crop_id"]),
            image_id=str(d["image_id"]),
            scene_id=str(d["scene_id"]),
            view_id=int(d["view_id"]),
            setting=str(d["setting"]),
            class_label=str(d["class_label"]),
            bbox=tuple(d["bbox"]),
            area_px=int(d["area_px"]),
            extra={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class MatchingProblem:
    """A source/target crop-set pair with ground-truth correspondence."""

    source_crops: tuple[CropRecord, ...]
    target_crops: tuple[CropRecord, ...]
    ground_truth: frozenset[tuple[str, str]]  # (target_id, source_id)
    setting_tag: str
    instance_level: bool = True

    def __post_init__(self):
        object.__setattr__(self, "source_crops", tuple(self.source_crops))
        object.__setattr__(self, "target_crops", tuple(self.target_crops))
        object.__setattr__(self, "ground_truth", frozenset(
            (str(t), str(s)) for t, s in self.ground_truth
        ))

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(c.crop_id for c in self.source_crops)

    @property
    def target_ids(self) -> tuple[str, ...]:
        return tuple(c.crop_id for c in self.target_crops)


def validate_problem(p: MatchingProblem) -> None:
    """Raise ValueError when a problem violates its structural invariants."""
    src = {c.crop_id: c for c in p.source_crops}
    tgt = {c.crop_id: c for c in p.target_crops}
    if len(src) != len(p.source_crops) or len(tgt) != len(p.target_crops):
        raise ValueError("duplicate crop ids within a side")
    seen_t: set[str] = set()
    seen_s: set[str] = set()
    for t, s in p.ground_truth:
        if t not in tgt or s not in src:
            raise ValueError(f"ground-truth pair ({t}, {s}) references unknown crops")
        if t in seen_t or s in seen_s:
            raise ValueError(f"crop appears in more than one ground-truth pair: ({t}, {s})")
        seen_t.add(t)
        seen_s.add(s)
        if tgt[t].class_label != src[s].class_label:
            raise ValueError(f"ground-truth pair ({t}, {s}) crosses class labels")
    if p.setting_tag not in SETTING_TAGS and p.setting_tag != "synthetic":
        raise ValueError(f"unknown setting tag {p.setting_tag!r}")


@dataclass(frozen=True)
class PoolManifest:
    """All available crop records plus optional view geometry."""

    records: tuple[CropRecord, ...]
    view_distance: Mapping[tuple[str, int, int], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.crop_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("crop_ids in manifest are not unique")

    def by_scene(self) -> dict[str, list[CropRecord]]:
        out: dict[str, list[CropRecord]] = {}
        for r in self.records:
            out.setdefault(r.scene_id, []).append(r)
        return out

    def distance(self, scene_id: str, va: int, vb: int) -> float:
        if self.view_distance is None:
            raise MissingViewDistance(f"manifest carries no view distances")
        key = (scene_id, min(va, vb), max(va, vb))
        if key not in self.view_distance:
            raise MissingViewDistance(
                f"no distance for scene {scene_id!r} views {va}/{vb}"
            )
        return float(self.view_distance[key])


def _label_pairs(
    source: Sequence[CropRecord], target: Sequence[CropRecord]
) -> frozenset[tuple[str, str]]:
    # Pair same-labelled crops across sides in annotation order; labels
    # with unequal multiplicity leave the surplus unpaired.
    by_label_s: dict[str, list[CropRecord]] = {}
    for c in source:
        by_label_s.setdefault(c.class_label, []).append(c)
    pairs = set()
    used: dict[str, int] = {}
    for t in target:
        cands = by_label_s.get(t.class_label, [])
        k = used.get(t.class_label, 0)
        if k < len(cands):
            pairs.add((t.crop_id, cands[k].crop_id))
            used[t.class_label] = k + 1
    return frozenset(pairs)


def _is_trivial(source: Sequence[CropRecord], target: Sequence[CropRecord]) -> bool:
    return len(source) == 1 and len(target) == 1


def gen_same_scene_pairs(pool: PoolManifest, mode: str) -> list[MatchingProblem]:
    """Within-scene problems over closest (easy) or farthest (medium) views.

    For every scene, all distinct-view pairs achieving the minimal
    (easy) or maximal (medium) view distance are emitted. Trivial
    one-object-per-side problems are removed; single-view scenes are
    skipped with a warning count.
    """
    if mode not in ("easy", "medium"):
        raise ValueError(f"mode must be easy or medium, got {mode!r}")
    problems: list[MatchingProblem] = []
    skipped_single_view = 0
    for scene_id in sorted(pool.by_scene()):
        crops = pool.by_scene()[scene_id]
        views: dict[int, list[CropRecord]] = {}
        for c in crops:
            views.setdefault(c.view_id, []).append(c)
        view_ids = sorted(views)
        if len(view_ids) < 2:
            skipped_single_view += 1
            continue
        scored = {
            (a, b): pool.distance(scene_id, a, b)
            for i, a in enumerate(view_ids)
            for b in view_ids[i + 1:]
        }
        pick = min(scored.values()) if mode == "easy" else max(scored.values())
        for (a, b), d in sorted(scored.items()):
            if d != pick:
                continue
            source, target = views[a], views[b]
            if _is_trivial(source, target):
                continue
            problems.append(
                MatchingProblem(
                    source_crops=tuple(source),
                    target_crops=tuple(target),
                    ground_truth=_label_pairs(source, target),
                    setting_tag=mode,
                    instance_level=True,
                )
            )
    if skipped_single_view:
        log.warning("skipped %d single-view scenes", skipped_single_view)
    return problems


def _representative_view(crops: Sequence[CropRecord]) -> list[CropRecord]:
    first = min(c.view_id for c in crops)
    return [c for c in crops if c.view_id == first]


def gen_cross_scene_pairs(pool: PoolManifest, mode: str) -> list[MatchingProblem]:
    """Cross-scene problems within one setting (hard) or across settings (hardest).

    Every scene pair sharing at least one class label yields a problem;
    each scene contributes its lowest-numbered view. Objects without a
    counterpart carry no ground-truth pair and drop out of the accuracy
    denominator downstream.
    """
    if mode not in ("hard", "hardest"):
        raise ValueError(f"mode must be hard or hardest, got {mode!r}")
    scenes = pool.by_scene()
    scene_ids = sorted(scenes)
    problems: list[MatchingProblem] = []
    for i, sa in enumerate(scene_ids):
        for sb in scene_ids[i + 1:]:
            setting_a = scenes[sa][0].setting
            setting_b = scenes[sb][0].setting
            if mode == "hard" and setting_a != setting_b:
                continue
            if mode == "hardest" and setting_a == setting_b:
                continue
            source = _representative_view(scenes[sa])
            target = _representative_view(scenes[sb])
            shared = {c.class_label for c in source} & {c.class_label for c in target}
            if not shared:
                continue
            if _is_trivial(source, target):
                continue
            problems.append(
                MatchingProblem(
                    source_crops=tuple(source),
                    target_crops=tuple(target),
                    ground_truth=_label_pairs(source, target),
                    setting_tag=mode,
                    instance_level=True,
                )
            )
    return problems


def filter_nway_pool(pool: PoolManifest) -> PoolManifest:
    """Apply the N-way pre-filter: drop tiny crops, keep first instance.

    Records with pixel area below 32*32 are disregarded; afterwards only
    the first record (annotation order) of each (image, class) survives.
    """
    kept: list[CropRecord] = []
    seen: set[tuple[str, str]] = set()
    for r in pool.records:
        if r.area_px < NWAY_MIN_AREA:
            continue
        key = (r.image_id, r.class_label)
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    return PoolManifest(tuple(kept), pool.view_distance)


def gen_nway(
    pool: PoolManifest,
    n: int,
    class_whitelist: Iterable[str],
    rng_seed,
) -> MatchingProblem:
    """One synthetic N-way problem: n classes, one source/target crop each.

    The pool must already be pre-filtered (see :func:`filter_nway_pool`).
    Labels are drawn uniformly without replacement from the sorted
    whitelist; per label two distinct crops are drawn uniformly. Output
    is a pure function of (pool, n, whitelist, seed).
    """
    whitelist = sorted(set(class_whitelist))
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(whitelist):
        raise NTooLarge(f"n={n} exceeds whitelist of {len(whitelist)} classes")
    by_label: dict[str, list[CropRecord]] = {}
    for r in pool.records:
        if r.class_label in set(whitelist):
            by_label.setdefault(r.class_label, []).append(r)
    for lab in whitelist:
        cands = by_label.get(lab, [])
        if len({c.image_id for c in cands}) < 2:
            raise InsufficientCrops(
                f"class {lab!r} has fewer than 2 usable crops from distinct images"
            )
    rng = np.random.default_rng(rng_seed)
    labels = [whitelist[i] for i in rng.choice(len(whitelist), size=n, replace=False)]
    source: list[CropRecord] = []
    target: list[CropRecord] = []
    gt = set()
    for lab in labels:
        cands = by_label[lab]
        a, b = rng.choice(len(cands), size=2, replace=False)
        source.append(cands[a])
        target.append(cands[b])
        gt.add((cands[b].crop_id, cands[a].crop_id))
    return MatchingProblem(
        source_crops=tuple(source),
        target_crops=tuple(target),
        ground_truth=frozenset(gt),
        setting_tag="nway",
        instance_level=False,
    )


def gen_nway_batch(
    pool: PoolManifest,
    n: int,
    class_whitelist: Iterable[str],
    seed: int,
    count: int,
) -> list[MatchingProblem]:
    """Independent N-way problems; problem i depends only on (seed, i)."""
    return [
        gen_nway(pool, n, class_whitelist, rng_seed=[int(seed), i])
        for i in range(count)
    ]


class PlantedPool(NamedTuple):
    manifest: PoolManifest
    crop_embeddings: EmbeddingSet
    prompt_embeddings: EmbeddingSet


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def planted_class_labels(classes: int, distractor_classes: int = 0) -> tuple[list[str], list[str]]:
    real = [f"class{i:02d}" for i in range(classes)]
    distractors = [f"distractor{i:02d}" for i in range(distractor_classes)]
    return real, distractors


def gen_planted_pool(
    classes: int,
    crops_per_class: int,
    dim: int,
    intra_class_noise: float,
    rng_seed,
    distractor_classes: int = 0,
) -> PlantedPool:
    """Synthetic embedding pool with one planted concept per class.

    Every class receives a random unit concept vector (pairwise inner
    products bounded away from 1); each crop embedding is the normalized
    concept plus isotropic gaussian noise. The noise scale is calibrated
    so ``intra_class_noise`` equals the RMS norm of the noise component
    inside the concept subspace — the part that confuses classification —
    making the parameter meaningful independently of ``dim``. Prompt
    proxies are the concept vectors themselves (distractor concepts get
    prompts but no crops), so the pool drives every matcher without any
    ML model.
    """
    if classes < 2:
        raise ValueError("classes must be >= 2")
    if dim < classes:
        raise ValueError("dim must be >= classes")
    if intra_class_noise < 0:
        raise ValueError("intra_class_noise must be >= 0")
    rng = np.random.default_rng(rng_seed)
    total = classes + distractor_classes
    concepts = None
    for _ in range(CONCEPT_RETRIES):
        cand = _unit_rows(rng.standard_normal((total, dim)))
        overlap = np.abs(cand @ cand.T - np.eye(total)).max()
        if overlap <= CONCEPT_OVERLAP_CAP:
            concepts = cand
            break
    if concepts is None:
        raise DegenerateConcepts(
            f"could not draw {total} concepts with overlap <= {CONCEPT_OVERLAP_CAP}"
        )
    real, distractors = planted_class_labels(classes, distractor_classes)
    sigma = intra_class_noise / np.sqrt(classes)  # per-component std
    records: list[CropRecord] = []
    vectors: list[np.ndarray] = []
    ids: list[str] = []
    for i, lab in enumerate(real):
        noise = rng.standard_normal((crops_per_class, dim))
        block = concepts[i] + sigma * noise
        block = _unit_rows(block)
        for j in range(crops_per_class):
            crop_id = f"{lab}_crop{j:03d}"
            records.append(
                CropRecord(
                    crop_id=crop_id,
                    image_id=f"img_{lab}_{j:03d}",
                    scene_id=f"scene_{lab}_{j:03d}",
                    view_id=0,
                    setting="synthetic",
                    class_label=lab,
                    bbox=(0, 0, 64, 64),
                    area_px=4096,
                )
            )
            ids.append(crop_id)
            vectors.append(block[j])
    crop_set = EmbeddingSet(
        np.stack(vectors), tuple(ids), "planted-visual", normalized=True
    )
    prompt_set = EmbeddingSet(
        concepts, tuple(real + distractors), "planted-text", normalized=True
    )
    return PlantedPool(PoolManifest(tuple(records)), crop_set, prompt_set)


def degrade_embeddings(
    es: EmbeddingSet,
    extra_noise: float,
    concept_count: int,
    rng_seed,
) -> EmbeddingSet:
    """Independent extra view noise on an embedding set, renormalized.

    Uses the same noise calibration as :func:`gen_planted_pool`
    (``extra_noise`` is measured in concept-subspace RMS units, hence the
    ``concept_count``). Provenance gains a ``-degraded`` suffix.
    """
    rng = np.random.default_rng(rng_seed)
    sigma = extra_noise / np.sqrt(concept_count)
    noisy = es.matrix + sigma * rng.standard_normal(es.matrix.shape)
    return EmbeddingSet(
        _unit_rows(noisy),
        es.crop_ids,
        es.provenance + "-degraded",
        normalized=True,
    )
