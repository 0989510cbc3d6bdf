# app/services/perturbation/profiles.py
"""Coefficient profiles and linear functionals used by perturbations"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import sparse
from scipy.interpolate import CubicSpline

from app.schemas.perturbation import FunctionalTermKind, FunctionalTermSpec, ProfileKind, ProfileSpec
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples

_GL4_NODES, _GL4_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class Profile:
    """Complex function on [lo, hi], zero outside"""
    lo: float
    hi: float
    fn: Callable[[np.ndarray], np.ndarray]
    length_scale: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros(x.shape, dtype=complex)
        out[inside] = self.fn(x[inside])
        return out

    @property
    def breakpoints(self) -> List[float]:
        return [self.lo, self.hi]

    def cell_average(self, x, h: float) -> np.ndarray:
        """Mean over [x - h/2, x + h/2] (4-point Gauss per cell, split at lo and hi)"""
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape, dtype=complex)
        a, b = x - 0.5 * h, x + 0.5 * h
        for left, right in ((a, np.clip(self.lo, a, b)), (np.clip(self.lo, a, b), np.clip(self.hi, a, b)),
                            (np.clip(self.hi, a, b), b)):
            width = right - left
            mid = 0.5 * (left + right)
            for node, weight in zip(_GL4_NODES, _GL4_WEIGHTS):
                total += 0.5 * weight * width * self(mid + 0.5 * width * node)
        return total / h

    @classmethod
    def from_spec(cls, spec: ProfileSpec) -> "Profile":
        scale = spec.scale.value
        length = spec.hi - spec.lo
        if spec.kind == ProfileKind.INDICATOR:
            return cls(spec.lo, spec.hi, lambda x: np.full(np.shape(x), scale, dtype=complex), length)
        if spec.kind == ProfileKind.BUMP:
            mid, half = 0.5 * (spec.lo + spec.hi), 0.5 * length

            def bump(x):
                s = (np.asarray(x) - mid) / half
                out = np.zeros(np.shape(s), dtype=complex)
                inside = np.abs(s) < 1.0
                out[inside] = scale * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
                return out

            return cls(spec.lo, spec.hi, bump, length / 4.0)
        if spec.kind == ProfileKind.POLYNOMIAL:
            poly = Polynomial(spec.coefficients)
            return cls(spec.lo, spec.hi, lambda x: scale * poly(np.asarray(x)), length)
        if spec.kind == ProfileKind.COSINE:
            freq, phase = spec.frequency, spec.phase
            scale_len = min(length, 2.0 * np.pi / abs(freq)) if freq else length
            return cls(spec.lo, spec.hi, lambda x: scale * np.cos(freq * np.asarray(x) + phase), scale_len)
        spline = CubicSpline(spec.x, spec.y)
        return cls(spec.lo, spec.hi, lambda x: scale * spline(np.asarray(x)),
                   min(length, float(np.min(np.diff(spec.x))) * 4.0))

    @classmethod
    def indicator(cls, lo: float, hi: float, scale: complex = 1.0) -> "Profile":
        return cls(lo, hi, lambda x: np.full(np.shape(x), scale, dtype=complex), hi - lo)


# ============================================================================
# Linear functionals
# ============================================================================

@dataclass(frozen=True)
class FunctionalTerm:
    kind: FunctionalTermKind
    weight: complex = 1.0
    at: Optional[float] = None
    profile: Optional[Profile] = None


class LinearFunctional:
    """l(u) = sum of weighted point values, point derivatives and integrals against profiles"""

    def __init__(self, terms: Sequence[FunctionalTerm]):
        self.terms: Tuple[FunctionalTerm, ...] = tuple(terms)

    @classmethod
    def from_specs(cls, specs: Sequence[FunctionalTermSpec]) -> "LinearFunctional":
        return cls([
            FunctionalTerm(
                kind=spec.kind,
                weight=spec.weight.value,
                at=spec.at,
                profile=Profile.from_spec(spec.profile) if spec.profile else None,
            )
            for spec in specs
        ])

    @property
    def order(self) -> int:
        return 1 if any(t.kind == FunctionalTermKind.DERIVATIVE for t in self.terms) else 0

    @property
    def uses_point_derivatives(self) -> bool:
        return self.order > 0

    @property
    def breakpoints(self) -> List[float]:
        points = [t.at for t in self.terms if t.at is not None]
        for t in self.terms:
            if t.profile is not None:
                points += t.profile.breakpoints
        return points

    def evaluate(self, grid: QuadratureGrid, u: FunctionSamples) -> np.ndarray:
        """l applied to u (vector -> scalar, matrix -> row)"""
        u.require(self.order)
        total = 0.0
        for term in self.terms:
            if term.kind == FunctionalTermKind.INTEGRAL:
                total = total + term.weight * ((grid.weights * term.profile(grid.nodes)) @ u.values)
            else:
                channel = u.values if term.kind == FunctionalTermKind.VALUE else u.first
                total = total + term.weight * (grid.interpolation_matrix([term.at])[0] @ channel)
        return np.asarray(total)

    def fd_row(self, x: np.ndarray, h: float) -> sparse.csr_matrix:
        """1 x N row approximating l on a uniform finite-difference grid"""
        n = x.size
        row = np.zeros(n, dtype=complex)
        for term in self.terms:
            if term.kind == FunctionalTermKind.INTEGRAL:
                row += term.weight * h * term.profile.cell_average(x, h)
                continue
            i = int(np.clip(np.floor((term.at - x[0]) / h), 1, n - 3))
            theta = (term.at - x[i]) / h
            if term.kind == FunctionalTermKind.VALUE:
                row[i] += term.weight * (1.0 - theta)
                row[i + 1] += term.weight * theta
            else:
                # linear interpolation of centered differences at i and i+1
                for node, share in ((i, 1.0 - theta), (i + 1, theta)):
                    row[node + 1] += term.weight * share / (2.0 * h)
                    row[node - 1] -= term.weight * share / (2.0 * h)
        return sparse.csr_matrix(row[None, :])
