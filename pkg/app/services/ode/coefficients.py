# app/services/ode/coefficients.py
"""Coefficients (p, q) of the periodic operator -(p u')' + q u"""
import logging
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from app.core.exceptions import CoefficientError, NonPositiveP
from app.schemas.coefficients import CoefficientsSpec
from app.services.ode.periodic_function import PiecewisePeriodicFn

logger = logging.getLogger(__name__)

P_NORMALIZATION_TOL = 1e-12
P_CONTINUITY_TOL = 1e-8


@dataclass(frozen=True)
class CoefficientPiece:
    """Smooth stretch [lo, hi] on which p, p' and q have fixed one-sided evaluators"""
    lo: float
    hi: float
    p: Callable
    dp: Callable
    q: Callable


@dataclass(frozen=True)
class OperatorCoefficients:
    p: PiecewisePeriodicFn
    q: PiecewisePeriodicFn
    p_floor: float
    q_min: float
    q_max: float

    @classmethod
    def build(cls, p: PiecewisePeriodicFn, q: PiecewisePeriodicFn) -> "OperatorCoefficients":
        p_samples = p.sample()
        q_samples = q.sample()

        p0 = float(p(np.array([0.0]))[0])
        if abs(p0 - 1.0) > P_NORMALIZATION_TOL:
            raise CoefficientError(
                f"p(0) = {p0!r} violates the normalization p(0) = 1",
                {"field": "coefficients.p"},
            )
        if np.min(p_samples) <= 0.0 or not np.all(np.isfinite(p_samples)):
            raise NonPositiveP(
                f"p must stay positive, found min p = {np.min(p_samples):.3e}",
                {"field": "coefficients.p"},
            )
        for point, jump in p.seam_jumps():
            if abs(jump) > P_CONTINUITY_TOL:
                raise CoefficientError(
                    f"p jumps by {jump:.3e} at x = {point}; p must be continuous",
                    {"field": "coefficients.p"},
                )
        if not np.all(np.isfinite(q_samples)):
            raise CoefficientError("q must be bounded on [0, 1]", {"field": "coefficients.q"})

        return cls(
            p=p,
            q=q,
            p_floor=float(np.min(p_samples)),
            q_min=float(np.min(q_samples)),
            q_max=float(np.max(q_samples)),
        )

    @classmethod
    def from_spec(cls, spec: CoefficientsSpec) -> "OperatorCoefficients":
        return cls.build(PiecewisePeriodicFn.from_specs(spec.p), PiecewisePeriodicFn.from_specs(spec.q))

    @classmethod
    def constant(cls, q: float = 0.0) -> "OperatorCoefficients":
        return cls.build(PiecewisePeriodicFn.constant(1.0), PiecewisePeriodicFn.constant(q))

    # ==========================================
    # Breakpoint structure
    # ==========================================

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self.p.breakpoints, self.q.breakpoints]))

    def breakpoint_images(self, a: float, b: float) -> np.ndarray:
        return np.unique(np.concatenate([self.p.breakpoint_images(a, b), self.q.breakpoint_images(a, b)]))

    def pieces(self, a: float, b: float) -> List[CoefficientPiece]:
        """Split [a, b] at every breakpoint image, in increasing order"""
        cuts = np.concatenate([[a], self.breakpoint_images(a, b), [b]])
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (lo + hi)
            shift = float(np.floor(mid))
            p_val, p_der = self.p.on_segment(int(self.p.locate(mid)), shift)
            q_val, _ = self.q.on_segment(int(self.q.locate(mid)), shift)
            pieces.append(CoefficientPiece(float(lo), float(hi), p_val, p_der, q_val))
        return pieces

    # ==========================================
    # Pointwise helpers
    # ==========================================

    def second_derivative(self, lam: complex, points, values, first, source=None) -> np.ndarray:
        """u'' from -(p u')' + (q - lam) u = source, given u and u'"""
        points = np.asarray(points, dtype=float)
        p = self.p(points)
        dp = self.p.derivative(points)
        q = self.q(points)
        rhs = (q - lam) * values - dp * first if np.ndim(values) == 1 else \
            (q - lam)[:, None] * values - dp[:, None] * first
        if source is not None:
            rhs = rhs - source
        return rhs / (p if np.ndim(values) == 1 else p[:, None])
