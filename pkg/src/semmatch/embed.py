"""Core embedding types and similarity-matrix algebra.

Every featurizer in the harness produces vectors that are L2-normalized
here before any similarity is computed, so a single inner-product code
path serves colour histograms, deep visual features and text prompts
alike. Matrix orientation is fixed throughout the package: similarity
rows are target objects, columns are source objects.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyPromptSet,
    NonFiniteInput,
    NotNormalized,
    PromptSetMismatch,
    ZeroNormVector,
)
from .tolerances import NORM_TOL


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureVector:
    """A single real-valued feature vector."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.atleast_1d(self.values)))
        if self.values.ndim != 1 or self.values.size == 0:
            raise DimensionMismatch("feature vector must be 1-D and nonempty")
        if not np.isfinite(self.values).all():
            raise NonFiniteInput("feature vector contains NaN or Inf")

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class EmbeddingSet:
    """An ordered collection of same-dimension vectors with provenance.

    ``matrix`` has one row per crop id. When ``normalized`` is set every
    row must be unit length within :data:`~semmatch.tolerances.NORM_TOL`.
    """

    matrix: np.ndarray
    crop_ids: tuple[str, ...]
    provenance: str
    normalized: bool

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "crop_ids", tuple(str(c) for c in self.crop_ids))
        if m.shape[0] != len(self.crop_ids):
            raise DimensionMismatch(
                f"{m.shape[0]} vectors but {len(self.crop_ids)} crop ids"
            )
        if not np.isfinite(m).all():
            raise NonFiniteInput(f"embedding set {self.provenance!r} contains NaN/Inf")
        if self.normalized and m.shape[0]:
            norms = np.linalg.norm(m, axis=1)
            bad = np.where(np.abs(norms - 1.0) > NORM_TOL)[0]
            if bad.size:
                raise NotNormalized(
                    f"row {bad[0]} of {self.provenance!r} has norm {norms[bad[0]]:.8f}"
                )

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def vector(self, i: int) -> FeatureVector:
        return FeatureVector(self.matrix[i])

    def row_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.crop_ids)}

    def rows_for(self, ids: Sequence[str]) -> "EmbeddingSet":
        """Sub-set in the requested id order. KeyError names a missing id."""
        index = self.row_index()
        picks = [index[str(i)] for i in ids]
        return replace(
            self,
            matrix=self.matrix[picks],
            crop_ids=tuple(str(i) for i in ids),
        )

    def with_ids(self, ids: Sequence[str]) -> "EmbeddingSet":
        return replace(self, crop_ids=tuple(str(i) for i in ids))


@dataclass(frozen=True)
class ClassMatrix:
    """Object-by-prompt confidence matrix of raw inner products."""

    entries: np.ndarray
    row_ids: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries, dtype=np.float64))
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if e.shape != (len(self.row_ids), len(self.col_labels)):
            raise DimensionMismatch(
                f"entries {e.shape} vs {len(self.row_ids)} rows x {len(self.col_labels)} labels"
            )


@dataclass(frozen=True)
class SimilarityMatrix:
    """Target-by-source similarity; rows are targets, columns sources."""

    entries: np.ndarray
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries, dtype=np.float64))
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))
        if e.shape != (len(self.row_ids), len(self.col_ids)):
            raise DimensionMismatch(
                f"entries {e.shape} vs {len(self.row_ids)} rows x {len(self.col_ids)} cols"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def sim_from_array(entries, row_ids=None, col_ids=None) -> SimilarityMatrix:
    """Build a SimilarityMatrix from a bare array, defaulting ids to indices."""
    e = np.atleast_2d(np.asarray(entries, dtype=np.float64))
    rows = tuple(str(i) for i in range(e.shape[0])) if row_ids is None else tuple(row_ids)
    cols = tuple(str(j) for j in range(e.shape[1])) if col_ids is None else tuple(col_ids)
    return SimilarityMatrix(e, rows, cols)


def normalize_set(
    raw: Iterable[Sequence[float]] | np.ndarray,
    crop_ids: Sequence[str] | None = None,
    provenance: str = "raw",
) -> EmbeddingSet:
    """L2-normalize a collection of raw vectors into an EmbeddingSet.

    Each output row is the input divided by its L2 norm; input order is
    preserved. Zero-norm rows are hard errors (a zero embedding indicates
    an extraction bug upstream), as are non-finite entries and ragged
    dimensions.
    """
    rows = [np.asarray(r, dtype=np.float64) for r in raw]
    if not rows:
        raise DimensionMismatch("cannot normalize an empty collection")
    dim = rows[0].shape
    for i, r in enumerate(rows):
        if r.ndim != 1 or r.shape != dim:
            raise DimensionMismatch(f"vector {i} has shape {r.shape}, expected {dim}")
    m = np.stack(rows)
    if not np.isfinite(m).all():
        i = int(np.where(~np.isfinite(m).all(axis=1))[0][0])
        raise NonFiniteInput(f"vector {i} contains NaN or Inf")
    # scale each row by its max |entry| first so norms of very small or
    # very large vectors neither underflow nor overflow
    scale = np.max(np.abs(m), axis=1, keepdims=True)
    zero = np.where(scale[:, 0] == 0.0)[0]
    if zero.size:
        raise ZeroNormVector(int(zero[0]))
    scaled = m / scale
    norms = np.linalg.norm(scaled, axis=1)
    if crop_ids is None:
        crop_ids = tuple(str(i) for i in range(m.shape[0]))
    return EmbeddingSet(
        scaled / norms[:, None], tuple(crop_ids), provenance, normalized=True
    )


def normalized_copy(es: EmbeddingSet) -> EmbeddingSet:
    """Renormalize an existing set, keeping ids and provenance."""
    if len(es) == 0:
        return replace(es, normalized=True)
    out = normalize_set(es.matrix, es.crop_ids, es.provenance)
    return out


def concat_sets(sets: Sequence[EmbeddingSet]) -> EmbeddingSet:
    """Stack several sets with the same provenance/dimension; ids must stay unique."""
    if not sets:
        raise DimensionMismatch("nothing to concatenate")
    dim = sets[0].dim
    prov = sets[0].provenance
    norm = all(s.normalized for s in sets)
    for s in sets[1:]:
        if s.dim != dim:
            raise DimensionMismatch(f"dim {s.dim} != {dim}")
    ids: list[str] = []
    for s in sets:
        ids.extend(s.crop_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate crop ids across concatenated sets")
    return EmbeddingSet(
        np.vstack([s.matrix for s in sets]), tuple(ids), prov, normalized=norm
    )


def _require_normalized(es: EmbeddingSet, role: str):
    if not es.normalized:
        raise NotNormalized(f"{role} set {es.provenance!r} is not normalized")


def visual_similarity(source: EmbeddingSet, target: EmbeddingSet) -> SimilarityMatrix:
    """Similarity straight from visual descriptors: entry (n, m) = <target_n, source_m>."""
    _require_normalized(source, "source")
    _require_normalized(target, "target")
    if source.dim != target.dim:
        raise DimensionMismatch(f"source dim {source.dim} != target dim {target.dim}")
    entries = target.matrix @ source.matrix.T
    return SimilarityMatrix(entries, target.crop_ids, source.crop_ids)


def classify_matrix(
    objects: EmbeddingSet,
    prompts: EmbeddingSet,
    softmax: bool = False,
) -> ClassMatrix:
    """Confidence of each object against each semantic prompt.

    Entries are raw inner products <v_i, s_k>; no temperature softmax is
    applied by default. ``softmax=True`` row-normalizes with exp for
    experimentation only and is never used by the stock matchers.
    """
    _require_normalized(objects, "object")
    _require_normalized(prompts, "prompt")
    if len(prompts) == 0:
        raise EmptyPromptSet("prompt set is empty")
    if objects.dim != prompts.dim:
        raise DimensionMismatch(f"object dim {objects.dim} != prompt dim {prompts.dim}")
    entries = objects.matrix @ prompts.matrix.T
    if softmax:
        shifted = np.exp(entries - entries.max(axis=1, keepdims=True))
        entries = shifted / shifted.sum(axis=1, keepdims=True)
    return ClassMatrix(entries, objects.crop_ids, prompts.crop_ids)


def semantic_similarity(c_source: ClassMatrix, c_target: ClassMatrix) -> SimilarityMatrix:
    """Object-to-object similarity through the shared prompt space: C_target @ C_source^T."""
    if c_source.col_labels != c_target.col_labels:
        raise PromptSetMismatch(
            f"prompt columns differ: {c_target.col_labels} vs {c_source.col_labels}"
        )
    entries = c_target.entries @ c_source.entries.T
    return SimilarityMatrix(entries, c_target.row_ids, c_source.row_ids)
