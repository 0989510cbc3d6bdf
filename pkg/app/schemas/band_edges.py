"""
Band edge enums and serializable edge/lacuna records
"""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class EdgeSide(str, Enum):
    MINUS = "minus"
    PLUS = "plus"

    @property
    def sign(self) -> int:
        """+1 for a right lacuna end (gap below), -1 for a left end (gap above)"""
        return 1 if self is EdgeSide.PLUS else -1


class EdgeParity(str, Enum):
    PERIODIC = "periodic"
    ANTIPERIODIC = "antiperiodic"


class EdgeSelector(BaseModel):
    """Edge picked by index and side"""
    n: int = Field(..., ge=0, description="Edge index")
    side: EdgeSide = Field(..., description="minus or plus")


class BandEdgeDTO(BaseModel):
    n: int
    side: EdgeSide
    parity: EdgeParity
    mu: float
    ddot: float
    degenerate: bool
    theta1p_edge: float
    theta2_edge: float


class LacunaDTO(BaseModel):
    n: int = Field(..., description="0 for the semi-infinite lacuna")
    left: Optional[float] = Field(None, description="None for the semi-infinite lacuna")
    right: float
    degenerate: bool
