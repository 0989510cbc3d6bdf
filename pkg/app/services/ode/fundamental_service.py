# app/services/ode/fundamental_service.py
"""Fundamental system theta_1, theta_2 of -(p u')' + q u = lam u"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from app.config.settings import get_settings
from app.core.exceptions import GridMismatch, StepUnderflow
from app.services.ode.coefficients import OperatorCoefficients
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples

logger = logging.getLogger(__name__)

# (u, p u') data of theta_1 and theta_2 at x = 0
_INITIAL_STATE = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)


# ============================================================================
# Data types
# ============================================================================

@dataclass(frozen=True)
class MonodromyData:
    """theta_i(1, lam) and theta_i'(1, lam); p(1) = p(0) = 1 so fluxes equal derivatives"""
    lam: complex
    theta1: complex
    theta2: complex
    dtheta1: complex
    dtheta2: complex

    @property
    def discriminant(self) -> complex:
        return self.theta1 + self.dtheta2

    @property
    def determinant(self) -> complex:
        return self.theta1 * self.dtheta2 - self.dtheta1 * self.theta2

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.theta1, self.theta2], [self.dtheta1, self.dtheta2]])


@dataclass(frozen=True)
class FundamentalPair:
    lam: complex
    grid: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    flux1: np.ndarray
    flux2: np.ndarray
    p_values: np.ndarray

    @property
    def dtheta1(self) -> np.ndarray:
        return self.flux1 / self.p_values

    @property
    def dtheta2(self) -> np.ndarray:
        return self.flux2 / self.p_values

    def wronskian_residual(self) -> float:
        """max |p W - 1| over the grid"""
        return float(np.max(np.abs(self.theta1 * self.flux2 - self.flux1 * self.theta2 - 1.0)))

    def relative_wronskian_residual(self) -> float:
        """max |p W - 1| scaled by the size of the two products"""
        a = self.theta1 * self.flux2
        b = self.flux1 * self.theta2
        scale = np.maximum(1.0, np.abs(a) + np.abs(b))
        return float(np.max(np.abs(a - b - 1.0) / scale))

    def indices_of(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, points), 0, self.grid.size - 1)
        prev = np.clip(idx - 1, 0, self.grid.size - 1)
        best = np.where(np.abs(self.grid[prev] - points) < np.abs(self.grid[idx] - points), prev, idx)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(self.grid))))
        if np.any(np.abs(self.grid[best] - points) > tol):
            raise GridMismatch("sample points are not contained in the fundamental-pair grid")
        return best

    def combination(self, coeffs: OperatorCoefficients, a: complex, b: complex,
                    points: Optional[np.ndarray] = None) -> FunctionSamples:
        """Samples of a*theta_1 + b*theta_2 with two derivative channels"""
        idx = slice(None) if points is None else self.indices_of(points)
        x = self.grid[idx]
        values = a * self.theta1[idx] + b * self.theta2[idx]
        first = a * self.dtheta1[idx] + b * self.dtheta2[idx]
        second = coeffs.second_derivative(self.lam, x, values, first)
        return FunctionSamples(points=x, values=values, first=first, second=second)


# ============================================================================
# Integration core
# ============================================================================

def _rhs_factory(piece, lams: np.ndarray):
    m = lams.size

    def rhs(x, y):
        state = y.reshape(4, m)
        p = piece.p(x)
        shifted = piece.q(x) - lams
        return np.concatenate([
            state[1] / p, shifted * state[0], state[3] / p, shifted * state[2],
        ])

    return rhs


def _solve_piece(rhs, lo, hi, state, t_eval, tol, method):
    sol = solve_ivp(
        rhs, (lo, hi), state, method=method, t_eval=t_eval,
        rtol=tol, atol=tol * 1e-2,
    )
    if not sol.success:
        raise StepUnderflow(
            f"integration failed on [{lo:.6g}, {hi:.6g}]: {sol.message}",
            {"lo": lo, "hi": hi},
        )
    return sol.y


def propagate(
        coeffs: OperatorCoefficients,
        lams: Sequence[complex],
        points: Sequence[float],
        tol: Optional[float] = None,
) -> np.ndarray:
    """State (theta1, p theta1', theta2, p theta2') at every point and every lam.

    Returns an array of shape (len(points), 4, len(lams)). Integration runs from
    0 outwards in both directions and restarts at each breakpoint image, so every
    step lands on the discontinuities of p' and q.
    """
    settings = get_settings()
    tol = tol or settings.ODE_TOL
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    points = np.asarray(points, dtype=float)
    m = lams.size
    if m > 1:
        # error control is an RMS over all components
        tol = max(tol / np.sqrt(m), 1e-13)

    out = np.empty((points.size, 4, m), dtype=complex)
    start = np.tile(_INITIAL_STATE[:, None], (1, m)).ravel()
    out[points == 0.0] = start.reshape(4, m)

    for direction in (1.0, -1.0):
        mask = points * direction > 0.0
        if not np.any(mask):
            continue
        targets = np.sort(points[mask] * direction) * direction
        far = targets[-1]
        pieces = coeffs.pieces(*sorted((0.0, far)))
        if direction < 0:
            pieces = pieces[::-1]

        state = start.copy()
        cursor = 0
        for piece in pieces:
            a, b = (piece.lo, piece.hi) if direction > 0 else (piece.hi, piece.lo)
            stop = cursor
            while stop < targets.size and (targets[stop] - b) * direction <= 0.0:
                stop += 1
            t_eval = list(targets[cursor:stop])
            if not t_eval or t_eval[-1] != b:
                t_eval.append(b)
            ys = _solve_piece(_rhs_factory(piece, lams), a, b, state, t_eval, tol, settings.ODE_METHOD)
            for j in range(stop - cursor):
                hits = points == targets[cursor + j]
                out[hits] = ys[:, j].reshape(4, m)
            state = ys[:, -1]
            cursor = stop

    return out


# ============================================================================
# Service
# ============================================================================

class FundamentalService:

    @staticmethod
    def integrate_fundamental(
            coeffs: OperatorCoefficients,
            lam: complex,
            x_lo: float,
            x_hi: float,
            tol: Optional[float] = None,
            points: Optional[Sequence[float]] = None,
            count: int = 201,
    ) -> FundamentalPair:
        """theta_1, theta_2 and their fluxes on [x_lo, x_hi] (uniform grid unless `points` given)"""
        if tol is not None and tol <= 0:
            raise ValueError("tol must be positive")
        if x_hi < x_lo:
            raise ValueError(f"empty interval [{x_lo}, {x_hi}]")
        if points is None:
            grid = np.linspace(x_lo, x_hi, count)
        else:
            grid = np.asarray(points, dtype=float)
        grid = np.unique(grid)
        state = propagate(coeffs, [lam], grid, tol)[:, :, 0]
        return FundamentalPair(
            lam=complex(lam),
            grid=grid,
            theta1=state[:, 0],
            theta2=state[:, 2],
            flux1=state[:, 1],
            flux2=state[:, 3],
            p_values=coeffs.p(grid),
        )

    @staticmethod
    def monodromy(coeffs: OperatorCoefficients, lam: complex, tol: Optional[float] = None) -> MonodromyData:
        state = propagate(coeffs, [lam], [1.0], tol)[0, :, 0]
        return MonodromyData(complex(lam), state[0], state[2], state[1], state[3])

    @staticmethod
    def monodromy_batch(coeffs: OperatorCoefficients, lams: Sequence[complex],
                        tol: Optional[float] = None) -> list:
        state = propagate(coeffs, lams, [1.0], tol)[0]
        return [
            MonodromyData(complex(lam), state[0, j], state[2, j], state[1, j], state[3, j])
            for j, lam in enumerate(np.atleast_1d(lams))
        ]

    @staticmethod
    def cauchy_apply(
            coeffs: OperatorCoefficients,
            lam: complex,
            alpha: float,
            grid: QuadratureGrid,
            f: np.ndarray,
            pair: Optional[FundamentalPair] = None,
            tol: Optional[float] = None,
            targets: Optional[np.ndarray] = None,
    ) -> FunctionSamples:
        """v = integral_alpha^x (theta1(x)theta2(t) - theta1(t)theta2(x)) f(t) dt on the grid nodes.

        v solves -(p v')' + (q - lam) v = f with v(alpha) = v'(alpha) = 0.
        Evaluated at the grid nodes unless `targets` are given.
        """
        targets = grid.nodes if targets is None else np.asarray(targets, dtype=float)
        if pair is None:
            pts = np.concatenate([grid.nodes, targets, [alpha]])
            pair = FundamentalService.integrate_fundamental(coeffs, lam, min(pts.min(), 0.0),
                                                            max(pts.max(), 0.0), tol, points=pts)
        idx = pair.indices_of(grid.nodes)
        out = pair.indices_of(targets)
        th1, th2 = pair.theta1[out], pair.theta2[out]
        d1, d2 = pair.dtheta1[out], pair.dtheta2[out]

        cum = grid.cumulative_matrix(targets)
        at_alpha = grid.cumulative_matrix([alpha])[0]
        c1 = (cum - at_alpha[None, :]) @ (pair.theta1[idx] * f)
        c2 = (cum - at_alpha[None, :]) @ (pair.theta2[idx] * f)

        values = th1 * c2 - th2 * c1
        first = d1 * c2 - d2 * c1
        source = grid.interpolation_matrix(targets) @ f
        second = coeffs.second_derivative(lam, targets, values, first, source=source)
        return FunctionSamples(points=targets, values=values, first=first, second=second)
