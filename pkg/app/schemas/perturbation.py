"""
Pydantic descriptors for localized perturbations
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class ComplexValue(BaseModel):
    """Complex number written as {re, im} or a bare real"""
    re: float = 0.0
    im: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def accept_number(cls, data):
        if isinstance(data, (int, float)):
            return {"re": float(data), "im": 0.0}
        if isinstance(data, complex):
            return {"re": data.real, "im": data.imag}
        return data

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


# ============================================================================
# Profiles and kernels
# ============================================================================

class ProfileKind(str, Enum):
    INDICATOR = "indicator"
    BUMP = "bump"
    POLYNOMIAL = "polynomial"
    COSINE = "cosine"
    SAMPLED = "sampled"


class ProfileSpec(BaseModel):
    """A coefficient function on [lo, hi], zero elsewhere"""
    kind: ProfileKind = Field(ProfileKind.INDICATOR, description="Profile family")
    lo: float = Field(..., description="Left end of the profile support")
    hi: float = Field(..., description="Right end of the profile support")
    scale: ComplexValue = Field(default_factory=lambda: ComplexValue(re=1.0), description="Complex amplitude")
    coefficients: List[float] = Field(default_factory=list, description="Ascending powers of x (polynomial)")
    frequency: float = Field(1.0, description="Angular frequency (cosine)")
    phase: float = Field(0.0, description="Phase (cosine)")
    x: List[float] = Field(default_factory=list, description="Sample abscissae (sampled)")
    y: List[float] = Field(default_factory=list, description="Sample values (sampled)")

    @model_validator(mode="after")
    def check_profile(self):
        if self.lo >= self.hi:
            raise ValueError(f"profile lo={self.lo} must be below hi={self.hi}")
        if self.kind == ProfileKind.POLYNOMIAL and not self.coefficients:
            raise ValueError("polynomial profile needs coefficients")
        if self.kind == ProfileKind.SAMPLED and (len(self.x) != len(self.y) or len(self.x) < 2):
            raise ValueError("sampled profile needs matching x and y with at least 2 points")
        return self


class KernelKind(str, Enum):
    GAUSSIAN = "gaussian"
    CSV = "csv"


class KernelSpec(BaseModel):
    kind: KernelKind = Field(KernelKind.GAUSSIAN, description="Kernel family")
    beta: ComplexValue = Field(default_factory=lambda: ComplexValue(re=1.0))
    length: float = Field(1.0, gt=0.0, description="Correlation length (gaussian)")
    path: Optional[str] = Field(None, description="CSV file with columns x, y, Re, Im (csv)")

    @model_validator(mode="after")
    def check_source(self):
        if self.kind == KernelKind.CSV and not self.path:
            raise ValueError("csv kernel needs a path")
        return self


class FunctionalTermKind(str, Enum):
    VALUE = "value"
    DERIVATIVE = "derivative"
    INTEGRAL = "integral"


class FunctionalTermSpec(BaseModel):
    kind: FunctionalTermKind
    at: Optional[float] = Field(None, description="Evaluation point (value, derivative)")
    weight: ComplexValue = Field(default_factory=lambda: ComplexValue(re=1.0))
    profile: Optional[ProfileSpec] = Field(None, description="Weight function (integral)")

    @model_validator(mode="after")
    def check_term(self):
        if self.kind == FunctionalTermKind.INTEGRAL and self.profile is None:
            raise ValueError("integral term needs a profile")
        if self.kind != FunctionalTermKind.INTEGRAL and self.at is None:
            raise ValueError(f"{self.kind.value} term needs an evaluation point 'at'")
        return self


# ============================================================================
# Perturbation descriptor
# ============================================================================

class PerturbationKind(str, Enum):
    ZERO = "zero"
    DIFFERENTIAL = "differential"
    INTEGRAL_KERNEL = "integral_kernel"
    RANK_ONE = "rank_one"
    FUNCTIONAL_RANK_ONE = "functional_rank_one"
    EMBEDDED_EXAMPLE = "embedded_example"


class NoEmbeddedCondition(str, Enum):
    """Sufficient condition excluding embedded eigenvalues that the perturbation meets"""
    BOUNDED_FIRST_ORDER = "bounded_first_order"
    DIVERGENCE_FORM = "divergence_form"
    NONE = "none"


class NoEmbeddedVerdict(str, Enum):
    GUARANTEED_NONE = "guaranteed_none"
    NOT_GUARANTEED = "not_guaranteed"


class PerturbationSpec(BaseModel):
    """The [perturbation] section"""
    kind: PerturbationKind = Field(PerturbationKind.ZERO, description="Perturbation family")
    q_lo: Optional[float] = Field(None, description="Left end of Q")
    q_hi: Optional[float] = Field(None, description="Right end of Q")
    b0: Optional[ProfileSpec] = None
    b1: Optional[ProfileSpec] = None
    b2: Optional[ProfileSpec] = None
    kernel: Optional[KernelSpec] = None
    beta: ComplexValue = Field(default_factory=lambda: ComplexValue(re=1.0))
    b: Optional[ProfileSpec] = None
    functional: List[FunctionalTermSpec] = Field(default_factory=list)
    alpha: float = Field(2.0, ge=2.0, description="Exponent of the embedded example")
    epsilon: Optional[float] = Field(None, gt=0.0, description="Intrinsic epsilon of the embedded example")

    @model_validator(mode="after")
    def check_variant(self):
        kind = self.kind
        if kind == PerturbationKind.EMBEDDED_EXAMPLE:
            return self
        if self.q_lo is None or self.q_hi is None:
            raise ValueError("q_lo and q_hi are required")
        if self.q_lo >= self.q_hi:
            raise ValueError(f"q_lo={self.q_lo} must be below q_hi={self.q_hi}")
        if kind == PerturbationKind.DIFFERENTIAL and not (self.b0 or self.b1 or self.b2):
            raise ValueError("differential perturbation needs at least one of b0, b1, b2")
        if kind == PerturbationKind.INTEGRAL_KERNEL and self.kernel is None:
            raise ValueError("integral_kernel perturbation needs a kernel")
        if kind in (PerturbationKind.RANK_ONE, PerturbationKind.FUNCTIONAL_RANK_ONE) and self.b is None:
            raise ValueError(f"{kind.value} perturbation needs a profile b")
        if kind == PerturbationKind.FUNCTIONAL_RANK_ONE and not self.functional:
            raise ValueError("functional_rank_one perturbation needs functional terms")
        for name in ("b0", "b1", "b2", "b"):
            profile = getattr(self, name)
            if profile is not None and (profile.lo < self.q_lo - 1e-12 or profile.hi > self.q_hi + 1e-12):
                raise ValueError(f"profile {name} must lie inside Q = [{self.q_lo}, {self.q_hi}]")
        for term in self.functional:
            if term.at is not None and not self.q_lo <= term.at <= self.q_hi:
                raise ValueError(f"functional point {term.at} must lie inside Q")
        return self
