"""
The problem file: [coefficients], [perturbation], [run] and [oracle]
"""
from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.band_edges import EdgeSelector
from app.schemas.coefficients import CoefficientsSpec
from app.schemas.perturbation import PerturbationKind, PerturbationSpec


class KernelDumpKind(str, Enum):
    EDGE = "edge"  # G_{n,0}
    FLOQUET = "floquet"  # G_n(k) at the exact (or first-order) k
    RESOLVENT = "resolvent"  # (H0 - lam)^{-1} at the predicted eigenvalue


class RunSpec(BaseModel):
    """The [run] section"""
    epsilons: List[float] = Field(default_factory=list, description="Coupling constants to analyse")
    edges: Union[Literal["all"], List[EdgeSelector]] = Field("all", description='"all" or a list of {n, side}')
    lambda_max: float = Field(50.0, description="Upper end of the band scan")
    window: Optional[List[float]] = Field(None, description="[x_lo, x_hi] for eigenfunction samples")
    window_points: int = Field(401, ge=2, description="Eigenfunction samples in the window")
    sign_test: bool = Field(False, description="Also report the Re(k1 + eps k2) verdict")
    force: bool = Field(False, description="Solve for k even when the criterion says no")
    dump_kernels: List[KernelDumpKind] = Field(default_factory=list, description="Kernels written as CSV")
    dump_points: int = Field(41, ge=2, description="Target points per kernel dump")

    @field_validator("epsilons")
    @classmethod
    def check_epsilons(cls, values: List[float]):
        for eps in values:
            if not eps > 0.0:
                raise ValueError(f"epsilon={eps} must be positive")
        return values

    @field_validator("window")
    @classmethod
    def check_window(cls, window: Optional[List[float]]):
        if window is not None and (len(window) != 2 or window[0] >= window[1]):
            raise ValueError("window must be [x_lo, x_hi] with x_lo < x_hi")
        return window


class OracleSpec(BaseModel):
    """The [oracle] section"""
    R: Optional[float] = Field(None, gt=0.0, description="Half-width of the box; derived from the prediction when absent")
    h: float = Field(1.0 / 64.0, gt=0.0, description="Coarsest grid step")
    refinements: int = Field(3, ge=1, le=5, description="Number of h-halvings in the convergence study")
    window_halfwidth: Optional[float] = Field(None, gt=0.0, description="Half-width of the search window")
    windows: List[List[float]] = Field(default_factory=list, description="Explicit [lo, hi] windows")
    half_height: float = Field(1.0, gt=0.0, description="|Im lambda| bound of every window")
    method: Literal["auto", "dense", "shift_invert"] = Field("auto", description="Eigensolver")

    @field_validator("windows")
    @classmethod
    def check_windows(cls, windows: List[List[float]]):
        for window in windows:
            if len(window) != 2 or window[0] >= window[1]:
                raise ValueError("each window must be [lo, hi] with lo < hi")
        return windows


class ProblemConfig(BaseModel):
    coefficients: CoefficientsSpec = Field(default_factory=CoefficientsSpec)
    perturbation: PerturbationSpec = Field(default_factory=lambda: PerturbationSpec(q_lo=-1.0, q_hi=1.0))
    run: RunSpec = Field(default_factory=RunSpec)
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    output_dir: Optional[str] = Field(None, description="Where CSV and reports go; --out overrides")

    @model_validator(mode="after")
    def check_embedded_epsilon(self):
        pert = self.perturbation
        if pert.kind == PerturbationKind.EMBEDDED_EXAMPLE and pert.epsilon is None and not self.run.epsilons:
            raise ValueError("embedded_example needs perturbation.epsilon or run.epsilons")
        return self

    @property
    def embedded_epsilon(self) -> Optional[float]:
        if self.perturbation.kind != PerturbationKind.EMBEDDED_EXAMPLE:
            return None
        return self.perturbation.epsilon if self.perturbation.epsilon is not None else self.run.epsilons[0]
