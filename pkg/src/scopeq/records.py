"""Core record types shared across the pipeline.

FrameTensor carries raw model input (vector or small grid). FrameRecord is
one timestamped frame of a procedure stream, holding either a raw tensor or
a precomputed embedding. ProcedureAnnotation holds the withdrawal interval
plus polyp-visibility and exclusion intervals.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

__all__ = [
    "FrameTensor",
    "FrameRecord",
    "ProcedureAnnotation",
    "group_by_procedure",
]

_LAYOUTS = ("vector", "grid")


@dataclass(frozen=True)
class FrameTensor:
    values: np.ndarray
    layout_tag: str = "vector"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.layout_tag not in _LAYOUTS:
            raise SchemaError(f"unknown layout_tag {self.layout_tag!r}")
        want = 1 if self.layout_tag == "vector" else 2
        if values.ndim != want:
            raise SchemaError(
                f"{self.layout_tag} layout expects {want}-d values, got {values.ndim}-d"
            )
        if values.size == 0:
            raise SchemaError("empty frame tensor")
        if not np.all(np.isfinite(values)):
            raise SchemaError("non-finite values in frame tensor")
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class FrameRecord:
    procedure_id: str
    frame_idx: int
    timestamp_ms: int
    embedding: np.ndarray | None = None
    frame: FrameTensor | None = None
    excluded: bool = False

    def __post_init__(self):
        if (self.embedding is None) == (self.frame is None):
            raise SchemaError(
                f"frame_idx {self.frame_idx}: exactly one of embedding/frame required"
            )
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=float)
            if emb.ndim != 1 or emb.size == 0:
                raise SchemaError(
                    f"frame_idx {self.frame_idx}: embedding must be a nonempty vector"
                )
            if not np.all(np.isfinite(emb)):
                raise SchemaError(f"frame_idx {self.frame_idx}: non-finite embedding")
            object.__setattr__(self, "embedding", emb)


def _check_intervals(name: str, intervals) -> list:
    out = []
    for pair in intervals:
        start, end = int(pair[0]), int(pair[1])
        if start >= end:
            raise SchemaError(f"{name} interval [{start}, {end}) is not well-ordered")
        out.append((start, end))
    return out


@dataclass(frozen=True)
class ProcedureAnnotation:
    procedure_id: str
    withdrawal_start_ms: int
    withdrawal_end_ms: int
    polyp_events: list = field(default_factory=list)
    exclusion_intervals: list = field(default_factory=list)

    def __post_init__(self):
        if self.withdrawal_start_ms >= self.withdrawal_end_ms:
            raise SchemaError(
                f"procedure {self.procedure_id}: withdrawal interval "
                f"[{self.withdrawal_start_ms}, {self.withdrawal_end_ms}] is empty"
            )
        object.__setattr__(
            self, "polyp_events", _check_intervals("polyp_events", self.polyp_events)
        )
        object.__setattr__(
            self,
            "exclusion_intervals",
            _check_intervals("exclusion_intervals", self.exclusion_intervals),
        )


def group_by_procedure(records) -> dict:
    """Group FrameRecords by procedure_id, preserving order within each."""
    out: dict = {}
    for rec in records:
        out.setdefault(rec.procedure_id, []).append(rec)
    return out
