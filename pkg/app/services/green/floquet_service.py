# app/services/green/floquet_service.py
"""Floquet solutions phi_{n,1}, phi_{n,2} near a band edge"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.config.settings import get_settings
from app.core.exceptions import DegenerateEdge
from app.services.bands.band_service import BandEdge, BandService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.ode.fundamental_service import FundamentalPair, FundamentalService
from app.services.quadrature.samples import FunctionSamples

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FloquetPair:
    """phi_1 grows like rho^x to the right, phi_2 decays; both solve the equation at lam = mu -+ k^2"""
    edge: BandEdge
    k: complex
    lam: complex
    rho: complex
    kappa: complex
    first: FunctionSamples
    second: FunctionSamples
    data: Tuple[complex, complex, complex, complex]  # (phi_1(0), phi_1'(0), phi_2(0), phi_2'(0))

    def periodic_parts(self) -> Tuple[np.ndarray, np.ndarray]:
        """Phi_1 = e^{-kappa x} phi_1 and Phi_2 = e^{kappa x} phi_2, (anti)periodic"""
        x = self.first.points
        return np.exp(-self.kappa * x) * self.first.values, np.exp(self.kappa * x) * self.second.values

    def wronskian(self) -> np.ndarray:
        return self.first.values * self.second.first - self.first.first * self.second.values

    def wronskian_residual(self, coeffs: OperatorCoefficients) -> float:
        expected = self.edge.tau * (1.0 / self.rho - self.rho) / coeffs.p(self.first.points)
        return float(np.max(np.abs(self.wronskian() - expected)))


def floquet_data(edge: BandEdge, rho: complex, mono) -> Tuple[complex, complex, complex, complex]:
    """Cauchy data at 0 of the two Floquet solutions, normalized as the edge eigenfunction"""
    settings = get_settings()
    t1, t2, d1, d2 = mono.theta1, mono.theta2, mono.dtheta1, mono.dtheta2
    tau = edge.tau
    if max(abs(edge.theta2_edge), abs(edge.theta1p_edge)) < settings.EDGE_ZERO_TOL:
        raise DegenerateEdge(f"theta_2 and theta_1' vanish at mu={edge.mu}")
    if abs(edge.theta2_edge) >= abs(edge.theta1p_edge):
        root = np.sqrt(complex(tau * t2))
        return root, root * (rho - t1) / t2, root, root * (1.0 / rho - t1) / t2
    root = np.sqrt(complex(-tau * d1))
    return root * (rho - d2) / d1, root, root * (1.0 / rho - d2) / d1, root


class FloquetService:

    @staticmethod
    def floquet_solutions(
            coeffs: OperatorCoefficients,
            edge: BandEdge,
            k: complex,
            points,
            tol: Optional[float] = None,
            pair: Optional[FundamentalPair] = None,
    ) -> FloquetPair:
        if edge.degenerate:
            raise DegenerateEdge(f"edge n={edge.n} {edge.side.value} is degenerate")
        k = complex(k)
        lam = edge.lam_of_k(k)
        points = np.asarray(points, dtype=float)
        mono = FundamentalService.monodromy(coeffs, lam, tol)
        if k == 0:
            rho, kappa = complex(edge.parity_sign), 0j
        else:
            rho, kappa = BandService.edge_rho_from_discriminant(edge, k, mono.discriminant)
        a1, b1, a2, b2 = floquet_data(edge, rho, mono)

        if pair is None:
            pair = FundamentalService.integrate_fundamental(
                coeffs, lam, min(points.min(), 0.0), max(points.max(), 0.0), tol, points=points,
            )
        first = pair.combination(coeffs, a1, b1, points)
        second = pair.combination(coeffs, a2, b2, points)
        return FloquetPair(edge, k, lam, rho, kappa, first, second, (a1, b1, a2, b2))
