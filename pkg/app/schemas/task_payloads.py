# app/schemas/task_payloads.py
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from app.schemas.band_edges import EdgeSide


class EdgeRef(BaseModel):
    """Enough to rebuild a BandEdge without rescanning"""
    n: int = Field(..., description="Edge index")
    side: EdgeSide = Field(..., description="minus or plus")
    mu: float = Field(..., description="Edge location")
    degenerate: bool = Field(False, description="Closed lacuna")
    lacuna_width: Optional[float] = Field(None, description="Width of the adjacent lacuna; None if semi-infinite")


class GapJobPayload(BaseModel):
    """One (edge, epsilon) gap-eigenvalue analysis"""
    config: Dict[str, Any] = Field(..., description="ProblemConfig.model_dump()")
    edge: EdgeRef
    epsilon: float = Field(..., gt=0.0)
    job_id: str = Field(..., description="Correlation id")


class OracleJobPayload(BaseModel):
    """One (R, h) oracle run"""
    config: Dict[str, Any] = Field(..., description="ProblemConfig.model_dump()")
    epsilon: float
    R: float = Field(..., gt=0.0)
    h: float = Field(..., gt=0.0)
    window: Tuple[float, float, float, float] = Field(..., description="(lo, hi, half_height, im_center)")
    bands: Optional[List[Tuple[float, float]]] = Field(None, description="Discrete bands for the window check")
    margin: float = Field(0.0, description="Band margin")
    interior_only: bool = True
    method: str = "auto"
    job_id: str
