# app/services/green/green_service.py
"""Green operators of H0 near a band edge and off the spectrum.

Every operator is returned as FunctionSamples of matrices: row i maps the
values of f on the grid nodes to u(x_i), u'(x_i) and u''(x_i).
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from app.config.settings import get_settings
from app.core.exceptions import KZero, OnSpectrum
from app.services.bands.band_service import BandEdge, BandService
from app.services.green.floquet_service import FloquetService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.ode.fundamental_service import FundamentalService
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples
from app.services.quadrature.separable_kernel import KernelTerm, assemble_kernel, kernel_table

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GreenSplitting:
    """G(k) = k^{-1} G_{-1} + regular(k)"""
    k: complex
    full: FunctionSamples
    singular: FunctionSamples
    regular: FunctionSamples
    kappa: complex
    rho: complex


@dataclass(frozen=True)
class KernelParts:
    """Separable terms of a kernel with the spectral parameter they belong to"""
    lam: complex
    upper: Tuple[KernelTerm, ...]
    lower: Tuple[KernelTerm, ...]


def _all_points(grid: QuadratureGrid, targets: Optional[np.ndarray]) -> np.ndarray:
    pts = grid.nodes if targets is None else np.concatenate([grid.nodes, targets])
    return np.unique(pts)


def _discretize(coeffs, grid, targets, parts: KernelParts) -> FunctionSamples:
    on_nodes = targets is None
    tg = grid.nodes if on_nodes else np.asarray(targets, dtype=float)
    op = assemble_kernel(grid, tg, parts.upper, parts.lower, second=on_nodes)
    if not on_nodes:
        source = grid.interpolation_matrix(tg)
        op = replace(op, second=coeffs.second_derivative(parts.lam, tg, op.values, op.first, source=source))
    return op


def _pair_at(coeffs, lam, points, tol):
    return FundamentalService.integrate_fundamental(
        coeffs, lam, min(points.min(), 0.0), max(points.max(), 0.0), tol, points=points,
    )


# ============================================================================
# Kernel builders
# ============================================================================

def edge_kernel_parts(coeffs, edge: BandEdge, grid: QuadratureGrid, targets=None, tol=None) -> KernelParts:
    """1/2 sgn(t - x) (theta1(t) theta2(x) - theta1(x) theta2(t)) at lam = mu"""
    tg = grid.nodes if targets is None else np.asarray(targets, dtype=float)
    pair = _pair_at(coeffs, edge.mu, _all_points(grid, targets), tol)
    th1 = pair.combination(coeffs, 1.0, 0.0, tg)
    th2 = pair.combination(coeffs, 0.0, 1.0, tg)
    nodes = pair.indices_of(grid.nodes)
    y1, y2 = pair.theta1[nodes], pair.theta2[nodes]
    upper = (KernelTerm(th2, y1, 0.5), KernelTerm(th1, y2, -0.5))
    lower = (KernelTerm(th2, y1, -0.5), KernelTerm(th1, y2, 0.5))
    return KernelParts(edge.mu, upper, lower)


def edge_k_kernel_parts(coeffs, edge: BandEdge, k: complex, grid: QuadratureGrid, targets=None, tol=None):
    """tau/(rho - 1/rho) phi_1(min(x, t)) phi_2(max(x, t)); also returns the Floquet data"""
    tg = grid.nodes if targets is None else np.asarray(targets, dtype=float)
    points = _all_points(grid, targets)
    floquet = FloquetService.floquet_solutions(coeffs, edge, k, points, tol)
    nodes = np.searchsorted(points, grid.nodes)
    at_targets = np.searchsorted(points, tg)
    scale = edge.tau / (floquet.rho - 1.0 / floquet.rho)
    phi1_t = floquet.first.values[nodes]
    phi2_t = floquet.second.values[nodes]
    upper = (KernelTerm(floquet.first.take(at_targets), phi2_t, scale),)
    lower = (KernelTerm(floquet.second.take(at_targets), phi1_t, scale),)
    return KernelParts(floquet.lam, upper, lower), floquet


def resolvent_kernel_parts(coeffs, lam: complex, rho: complex, grid: QuadratureGrid, targets=None, tol=None):
    """Decaying Green kernel at lam off the spectrum; symmetric in (x, t)"""
    tg = grid.nodes if targets is None else np.asarray(targets, dtype=float)
    pair = _pair_at(coeffs, lam, np.unique(np.concatenate([_all_points(grid, targets), [1.0]])), tol)
    one = pair.indices_of([1.0])[0]
    t1, t2 = pair.theta1[one], pair.theta2[one]
    d1, d2 = pair.dtheta1[one], pair.dtheta2[one]
    a_coef = (t2, -(rho - d2))
    b_coef = (rho - t1, -d1)

    th1 = pair.combination(coeffs, 1.0, 0.0, tg)
    th2 = pair.combination(coeffs, 0.0, 1.0, tg)
    a_x = pair.combination(coeffs, *a_coef, tg)
    b_x = pair.combination(coeffs, *b_coef, tg)
    nodes = pair.indices_of(grid.nodes)
    y1, y2 = pair.theta1[nodes], pair.theta2[nodes]
    a_t = a_coef[0] * y1 + a_coef[1] * y2
    b_t = b_coef[0] * y1 + b_coef[1] * y2

    scale = 1.0 / (rho - 1.0 / rho)
    upper = (KernelTerm(th1, a_t, scale), KernelTerm(th2, b_t, scale))
    lower = (KernelTerm(a_x, y1, scale), KernelTerm(b_x, y2, scale))
    return KernelParts(complex(lam), upper, lower)


# ============================================================================
# Service
# ============================================================================

class GreenService:

    @staticmethod
    def edge_green_operator(
            coeffs: OperatorCoefficients,
            edge: BandEdge,
            grid: QuadratureGrid,
            targets: Optional[np.ndarray] = None,
            tol: Optional[float] = None,
    ) -> FunctionSamples:
        """Matrices of G_{n,0}: u = G_{n,0} f solves -(p u')' + (q - mu) u = f"""
        return _discretize(coeffs, grid, targets, edge_kernel_parts(coeffs, edge, grid, targets, tol))

    @staticmethod
    def edge_green_apply(coeffs, edge, grid, f: np.ndarray, targets=None, tol=None) -> FunctionSamples:
        return GreenService.edge_green_operator(coeffs, edge, grid, targets, tol).apply_right(f)

    @staticmethod
    def singular_part(edge: BandEdge, grid: QuadratureGrid, phi_nodes: np.ndarray,
                      phi_targets: FunctionSamples) -> FunctionSamples:
        """G_{-1} f = +-(f, phi) phi / (2 sqrt|ddot|)"""
        factor = edge.sign / (2.0 * np.sqrt(abs(edge.ddot)))
        row = factor * grid.weights * np.conj(phi_nodes)
        return FunctionSamples(
            points=phi_targets.points,
            values=np.outer(phi_targets.values, row),
            first=np.outer(phi_targets.first, row),
            second=np.outer(phi_targets.second, row),
        )

    @staticmethod
    def edge_green_k(
            coeffs: OperatorCoefficients,
            edge: BandEdge,
            k: complex,
            grid: QuadratureGrid,
            targets: Optional[np.ndarray] = None,
            tol: Optional[float] = None,
    ) -> GreenSplitting:
        if complex(k) == 0:
            raise KZero("G(k) is singular at k = 0; use the edge Green operator")
        parts, floquet = edge_k_kernel_parts(coeffs, edge, k, grid, targets, tol)
        full = _discretize(coeffs, grid, targets, parts)

        eigen = BandService.edge_eigenfunction(coeffs, edge, tol)
        phi_nodes = eigen.sample(grid.nodes).values
        phi_targets = eigen.sample(grid.nodes if targets is None else targets)
        singular = GreenService.singular_part(edge, grid, phi_nodes, phi_targets)
        regular = full.combine(singular, 1.0, -1.0 / complex(k))
        return GreenSplitting(complex(k), full, singular, regular, floquet.kappa, floquet.rho)

    @staticmethod
    def resolvent_operator(
            coeffs: OperatorCoefficients,
            lam: complex,
            grid: QuadratureGrid,
            targets: Optional[np.ndarray] = None,
            avoid: Sequence[float] = (),
            tol: Optional[float] = None,
    ) -> FunctionSamples:
        """Matrices of (H0 - lam)^{-1} restricted to f supported on the grid"""
        settings = get_settings()
        for point in avoid:
            if abs(complex(lam) - point) < settings.DEGENERATE_POINT_GUARD:
                raise OnSpectrum(f"lam={lam} is within {settings.DEGENERATE_POINT_GUARD} of a closed lacuna at {point}")
        rho, _ = BandService.multiplier(coeffs, lam, tol)
        if abs(rho) - 1.0 <= settings.ON_SPECTRUM_TOL:
            raise OnSpectrum(f"lam={lam} lies on the spectrum (|rho| = {abs(rho):.12g})", {"lam": lam})
        parts = resolvent_kernel_parts(coeffs, lam, rho, grid, targets, tol)
        return _discretize(coeffs, grid, targets, parts)

    @staticmethod
    def resolvent_apply(coeffs, lam, grid, f: np.ndarray, targets=None, avoid=(), tol=None) -> FunctionSamples:
        return GreenService.resolvent_operator(coeffs, lam, grid, targets, avoid, tol).apply_right(f)

    @staticmethod
    def kernel_values(parts: KernelParts, targets: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        """K(x_i, t_j) for a kernel dump; targets must match the x-parts of `parts`"""
        return kernel_table(targets, nodes, parts.upper, parts.lower)
