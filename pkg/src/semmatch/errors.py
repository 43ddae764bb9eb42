"""Exception types shared across the harness.

Every data-level failure raises a named subclass of :class:`SemMatchError`
so callers (and the CLI exit-code mapping) can distinguish usage mistakes
from bad inputs.
"""

from __future__ import annotations


class SemMatchError(Exception):
    """Base class for all harness errors."""


# --- embedding algebra ---

class ZeroNormVector(SemMatchError):
    """A vector with zero (or near-zero) L2 norm where a direction is required."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"vector at index {index} has zero norm")


class DimensionMismatch(SemMatchError):
    """Vectors or matrices of incompatible dimensionality."""


class NonFiniteInput(SemMatchError):
    """Input contains NaN or infinite entries."""


class NotNormalized(SemMatchError):
    """An operation requiring unit-norm embeddings received a raw set."""


class EmptyPromptSet(SemMatchError):
    """A classification step was given zero prompt vectors."""


class PromptSetMismatch(SemMatchError):
    """Two classification matrices disagree on prompt labels or their order."""


# --- colour histograms ---

class ChannelOutOfRange(SemMatchError):
    """An RGB channel value fell outside [0, 255]."""


# --- matching ---

class EmptyMatrix(SemMatchError):
    """Assignment requested on a similarity matrix with no rows or columns."""


class NonFiniteEntry(SemMatchError):
    """Similarity matrix contains NaN or infinite entries."""


# --- zero-shot classification ---

class EmptyVariantList(SemMatchError):
    """A prompt class has no description variants."""


class UnknownLabel(SemMatchError):
    """A ground-truth label is missing from the prompt columns (or vice versa)."""


class KOutOfRange(SemMatchError):
    """top-k requested with k larger than the number of classes."""


# --- benchmark generation ---

class MissingViewDistance(SemMatchError):
    """The manifest lacks a view-distance entry needed for pairing."""


class InsufficientCrops(SemMatchError):
    """A class has fewer usable crops than problem construction requires."""


class NTooLarge(SemMatchError):
    """An N-way problem was requested with N exceeding the class whitelist."""


class DegenerateConcepts(SemMatchError):
    """Planted concept vectors could not be drawn with bounded pairwise overlap."""


# --- evaluation ---

class ForeignCropId(SemMatchError):
    """An assignment references a crop id not present in the problem."""


class MissingEmbedding(SemMatchError):
    """No embedding row exists for a referenced crop or prompt id."""

    def __init__(self, missing_id: str, store: str = ""):
        self.missing_id = missing_id
        where = f" in {store!r}" if store else ""
        super().__init__(f"no embedding for id {missing_id!r}{where}")


class MethodConfigError(SemMatchError):
    """A benchmark method specification is incomplete or inconsistent."""


# --- embedding store ---

class EmbedStoreError(SemMatchError):
    """Base class for embedding-file format errors."""


class BadMagic(EmbedStoreError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(EmbedStoreError):
    """File header declares a version this reader does not understand."""


class UnsupportedDtype(EmbedStoreError):
    """File header declares a dtype code this reader does not understand."""


class TruncatedPayload(EmbedStoreError):
    """Payload length does not equal count * dim * itemsize."""


class NormViolation(EmbedStoreError):
    """A file flagged as normalized contains a row violating unit norm."""

    def __init__(self, row: int, norm: float):
        self.row = row
        self.norm = norm
        super().__init__(f"row {row} flagged normalized but has norm {norm:.6g}")


class MissingSidecar(EmbedStoreError):
    """The .idx sidecar for an embedding file is absent or inconsistent."""


class InvalidSet(EmbedStoreError):
    """An embedding set failed validation before writing."""
