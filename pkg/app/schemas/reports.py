"""
Serializable results: gap-eigenvalue reports, oracle tables and the embedded demo
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.band_edges import EdgeSide
from app.schemas.perturbation import NoEmbeddedVerdict


class ExistenceVerdict(str, Enum):
    YES = "yes"
    NO = "no"
    INDETERMINATE = "indeterminate"


class ComplexDTO(BaseModel):
    re: float
    im: float

    @classmethod
    def of(cls, value: Optional[complex]) -> Optional["ComplexDTO"]:
        if value is None:
            return None
        value = complex(value)
        return cls(re=value.real, im=value.imag)


class EigenfunctionSummaryDTO(BaseModel):
    window: List[float] = Field(..., description="[x_lo, x_hi] of the sampled window")
    points: int
    decay_rate: float = Field(..., description="Re kappa_n(k)")
    fitted_decay_right: Optional[float] = Field(None, description="Log-slope of |psi| at integer shifts right of Q")
    fitted_decay_left: Optional[float] = Field(None, description="Log-slope of |psi| at integer shifts left of Q")
    first_order_difference: float = Field(..., description="Window L2 norm of psi - phi - eps G0 L phi")
    equation_residual: float


class GapEigenvalueReportDTO(BaseModel):
    """One (edge, epsilon) analysis"""
    n: int
    side: EdgeSide
    mu: float
    ddot: float
    epsilon: float
    exists: ExistenceVerdict
    sign_verdict: Optional[ExistenceVerdict] = None
    criterion_value: ComplexDTO = Field(..., description="(phi, A(eps,0) L phi)")
    k1: ComplexDTO
    k2: ComplexDTO
    lambda_order1: ComplexDTO
    lambda_order2: ComplexDTO
    lambda_from_resolvent: ComplexDTO = Field(..., description="mu -+ eps^2 (A L phi, phi)^2 / (4|ddot|)")
    k_exact: Optional[ComplexDTO] = None
    lambda_exact: Optional[ComplexDTO] = None
    k_iterations: Optional[int] = None
    eigenfunction: Optional[EigenfunctionSummaryDTO] = None
    no_embedded: NoEmbeddedVerdict
    notes: List[str] = Field(default_factory=list)


class OracleEigenvalueDTO(BaseModel):
    R: float
    h: float
    value: ComplexDTO
    residual: float
    tail_mass: float
    separation: float = Field(..., description="Distance to the next-nearest eigenvalue of the matrix")


class ConvergenceRowDTO(BaseModel):
    R: float
    h: float
    value: Optional[ComplexDTO] = None
    residual: Optional[float] = None
    count: int = Field(..., description="Eigenvalues found in the window")


class ConvergenceStudyDTO(BaseModel):
    rows: List[ConvergenceRowDTO]
    extrapolated: Optional[ComplexDTO] = None
    observed_order: Optional[float] = None
    error_bar: Optional[float] = None


class VerifyRowDTO(BaseModel):
    n: int
    side: EdgeSide
    epsilon: float
    exists: ExistenceVerdict
    oracle_count: int
    lambda_asymptotic: ComplexDTO
    lambda_exact: Optional[ComplexDTO] = None
    lambda_oracle: Optional[ComplexDTO] = None
    error_bar: Optional[float] = None
    error: Optional[float] = Field(None, description="|lambda_asymptotic - lambda_oracle|")
    scaled_error: Optional[float] = Field(None, description="error / eps^3")
    passed: bool
    reason: str = ""


class EmbeddedDemoDTO(BaseModel):
    alpha: float
    epsilon: float
    nu: float
    lambda_e: float
    diagnostics: Dict[str, float]
    oracle_value: Optional[ComplexDTO] = None
    oracle_extrapolated: Optional[ComplexDTO] = None
    oracle_error: Optional[float] = None
    oracle_tail_mass: Optional[float] = None
    oracle_residual: Optional[float] = None
    passed: bool
