"""
Pydantic descriptors for periodic coefficient segments
"""
from enum import Enum
from typing import List

from pydantic import BaseModel, Field, field_validator, model_validator


# ============================================================================
# Segment descriptors
# ============================================================================

class SegmentKind(str, Enum):
    CONSTANT = "constant"
    POLYNOMIAL = "polynomial"
    TRIG = "trig"
    SAMPLED = "sampled"


class SegmentSpec(BaseModel):
    """One smooth piece of a 1-periodic coefficient on [start, end) within [0, 1]"""
    start: float = Field(0.0, ge=0.0, lt=1.0, description="Left end of the piece")
    end: float = Field(1.0, gt=0.0, le=1.0, description="Right end of the piece")
    kind: SegmentKind = Field(SegmentKind.CONSTANT, description="Evaluator family")
    value: float = Field(0.0, description="Constant value (kind=constant)")
    coefficients: List[float] = Field(
        default_factory=list, description="Ascending powers of (x - start) (kind=polynomial)"
    )
    a0: float = Field(0.0, description="Mean term (kind=trig)")
    cos: List[float] = Field(default_factory=list, description="cos(2 pi m x) amplitudes, m = 1, 2, ...")
    sin: List[float] = Field(default_factory=list, description="sin(2 pi m x) amplitudes, m = 1, 2, ...")
    x: List[float] = Field(default_factory=list, description="Sample abscissae (kind=sampled)")
    y: List[float] = Field(default_factory=list, description="Sample values (kind=sampled)")

    @model_validator(mode="after")
    def check_piece(self):
        if self.start >= self.end:
            raise ValueError(f"segment start {self.start} must be below end {self.end}")
        if self.kind == SegmentKind.POLYNOMIAL and not self.coefficients:
            raise ValueError("polynomial segment needs at least one coefficient")
        if self.kind == SegmentKind.SAMPLED:
            if len(self.x) != len(self.y) or len(self.x) < 2:
                raise ValueError("sampled segment needs matching x and y with at least 2 points")
            if any(b <= a for a, b in zip(self.x, self.x[1:])):
                raise ValueError("sampled segment x must be strictly increasing")
            if self.x[0] > self.start + 1e-12 or self.x[-1] < self.end - 1e-12:
                raise ValueError("sampled segment x must cover [start, end]")
        return self


def constant_segments(value: float) -> List[SegmentSpec]:
    return [SegmentSpec(start=0.0, end=1.0, kind=SegmentKind.CONSTANT, value=value)]


class CoefficientsSpec(BaseModel):
    """The [coefficients] section: p and q as lists of segments"""
    p: List[SegmentSpec] = Field(default_factory=lambda: constant_segments(1.0))
    q: List[SegmentSpec] = Field(default_factory=lambda: constant_segments(0.0))

    @field_validator("p", "q")
    @classmethod
    def validate_tiling(cls, segments: List[SegmentSpec]):
        if not segments:
            raise ValueError("at least one segment is required")
        ordered = sorted(segments, key=lambda s: s.start)
        if abs(ordered[0].start) > 1e-14:
            raise ValueError("segments must start at 0")
        for left, right in zip(ordered, ordered[1:]):
            if abs(left.end - right.start) > 1e-14:
                raise ValueError(f"segments must tile [0, 1): gap or overlap at {left.end}")
        if abs(ordered[-1].end - 1.0) > 1e-14:
            raise ValueError("segments must end at 1")
        return ordered
