# app/services/bands/band_service.py
"""Hill discriminant, band edges, multipliers and edge eigenfunctions"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from app.config.settings import get_settings
from app.core.exceptions import ConfigError, DegenerateEdge, KTooLarge, ScanTooCoarse
from app.schemas.band_edges import BandEdgeDTO, EdgeParity, EdgeSide, LacunaDTO
from app.services.ode.coefficients import OperatorCoefficients
from app.services.ode.fundamental_service import FundamentalService, MonodromyData, propagate
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples

logger = logging.getLogger(__name__)


# ============================================================================
# Data types
# ============================================================================

@dataclass(frozen=True)
class BandEdge:
    n: int
    side: EdgeSide
    mu: float
    ddot: float
    degenerate: bool
    monodromy: MonodromyData

    @property
    def parity(self) -> EdgeParity:
        return EdgeParity.PERIODIC if self.n % 2 == 0 else EdgeParity.ANTIPERIODIC

    @property
    def sign(self) -> int:
        return self.side.sign

    @property
    def parity_sign(self) -> int:
        return 1 if self.n % 2 == 0 else -1

    @property
    def tau(self) -> int:
        return self.sign * self.parity_sign

    @property
    def theta1p_edge(self) -> float:
        return float(self.monodromy.dtheta1.real)

    @property
    def theta2_edge(self) -> float:
        return float(self.monodromy.theta2.real)

    @property
    def label(self) -> str:
        return f"n{self.n}_{self.side.value}"

    def lam_of_k(self, k: complex) -> complex:
        """Spectral parameter mu -+ k^2 on the lacuna side of this edge"""
        return self.mu - self.sign * k * k

    def to_dto(self) -> BandEdgeDTO:
        return BandEdgeDTO(
            n=self.n, side=self.side, parity=self.parity, mu=self.mu, ddot=self.ddot,
            degenerate=self.degenerate, theta1p_edge=self.theta1p_edge, theta2_edge=self.theta2_edge,
        )


@dataclass(frozen=True)
class Lacuna:
    n: int
    left: Optional[float]
    right: float
    degenerate: bool

    @property
    def semi_infinite(self) -> bool:
        return self.left is None

    def to_dto(self) -> LacunaDTO:
        return LacunaDTO(n=self.n, left=self.left, right=self.right, degenerate=self.degenerate)


@dataclass(frozen=True)
class BandScan:
    edges: List[BandEdge]
    lacunas: List[Lacuna]
    lambdas: np.ndarray
    discriminants: np.ndarray
    lambda_max: float

    def edge(self, n: int, side: EdgeSide) -> BandEdge:
        for edge in self.edges:
            if edge.n == n and edge.side == side:
                return edge
        raise KeyError(f"edge n={n} side={side.value} not found below lambda_max={self.lambda_max}")

    def lacuna_of(self, edge: BandEdge) -> Lacuna:
        for lacuna in self.lacunas:
            if lacuna.n == edge.n:
                return lacuna
        raise KeyError(f"no lacuna with index {edge.n}")

    def lacuna_width(self, edge: BandEdge) -> Optional[float]:
        lacuna = self.lacuna_of(edge)
        return None if lacuna.semi_infinite else lacuna.right - lacuna.left

    @property
    def bands(self) -> List[Tuple[float, float]]:
        """Spectral bands [mu_n^+, mu_{n+1}^-] up to lambda_max"""
        lower = [e.mu for e in self.edges if e.side == EdgeSide.PLUS]
        upper = [e.mu for e in self.edges if e.side == EdgeSide.MINUS]
        bands = []
        for k, lo in enumerate(lower):
            hi = upper[k] if k < len(upper) else self.lambda_max
            bands.append((lo, hi))
        return bands


@dataclass(frozen=True)
class EdgeEigenfunction:
    """phi = a theta_1(x, mu) + b theta_2(x, mu), real, with (phi(0), phi'(0)) = (a, b)"""
    edge: BandEdge
    coeffs: OperatorCoefficients
    a: float
    b: float
    tol: Optional[float] = field(default=None, compare=False)

    def sample(self, points) -> FunctionSamples:
        points = np.asarray(points, dtype=float)
        pair = FundamentalService.integrate_fundamental(
            self.coeffs, self.edge.mu, min(points.min(), 0.0), max(points.max(), 0.0),
            self.tol, points=points,
        )
        samples = pair.combination(self.coeffs, self.a, self.b, points)
        return FunctionSamples(
            points=samples.points,
            values=samples.values.real,
            first=samples.first.real,
            second=samples.second.real,
        )

    def normalization_residual(self) -> float:
        target = abs(self.edge.theta1p_edge) + abs(self.edge.theta2_edge)
        return abs(self.a ** 2 + self.b ** 2 - target)

    def periodicity_residual(self, points) -> float:
        points = np.asarray(points, dtype=float)
        both = self.sample(np.concatenate([points, points + 1.0]))
        lookup = dict(zip(both.points, both.values))
        shifted = np.array([lookup[x + 1.0] for x in points])
        base = np.array([lookup[x] for x in points])
        return float(np.max(np.abs(shifted - self.edge.parity_sign * base)))


# ============================================================================
# Helpers
# ============================================================================

def period_grid(coeffs: OperatorCoefficients, lam: complex) -> QuadratureGrid:
    """Gauss-Legendre grid on [0, 1] resolving the oscillation at lam"""
    settings = get_settings()
    wave = np.sqrt(abs(complex(lam) - coeffs.q_min) / coeffs.p_floor + 1.0)
    max_cell = min(1.0 / settings.QUAD_CELLS_PER_UNIT, 2.0 / wave)
    return QuadratureGrid.build(0.0, 1.0, coeffs.breakpoints, max_cell=max_cell)


def _period_samples(coeffs, lam, tol=None):
    grid = period_grid(coeffs, lam)
    state = propagate(coeffs, [lam], np.concatenate([grid.nodes, [1.0]]), tol)[:, :, 0]
    theta1, theta2 = state[:-1, 0], state[:-1, 2]
    mono = MonodromyData(complex(lam), state[-1, 0], state[-1, 2], state[-1, 1], state[-1, 3])
    return grid, theta1, theta2, mono


def _scan_lambdas(lo: float, hi: float, coeffs: OperatorCoefficients, density: int) -> np.ndarray:
    step = np.pi * np.sqrt(coeffs.p_floor) / density
    s_max = np.sqrt(hi - lo)
    count = max(16, int(np.ceil(s_max / step)) + 1)
    return lo + np.linspace(0.0, s_max, count) ** 2


def _root(fun, a, b):
    return brentq(fun, a, b, xtol=get_settings().EDGE_ROOT_TOL, rtol=1e-15, maxiter=200)


# ============================================================================
# Service
# ============================================================================

class BandService:

    @staticmethod
    def discriminant(coeffs: OperatorCoefficients, lam: complex, tol: Optional[float] = None) -> complex:
        return FundamentalService.monodromy(coeffs, lam, tol).discriminant

    @staticmethod
    def discriminant_batch(coeffs: OperatorCoefficients, lams, tol: Optional[float] = None) -> np.ndarray:
        return np.array([m.discriminant for m in FundamentalService.monodromy_batch(coeffs, lams, tol)])

    @staticmethod
    def discriminant_derivative(coeffs: OperatorCoefficients, lam: complex, tol: Optional[float] = None) -> complex:
        """dD/dlam at any lam as a quadrature over one period"""
        grid, th1, th2, m = _period_samples(coeffs, lam, tol)
        integrand = m.dtheta1 * th2 ** 2 + (m.theta1 - m.dtheta2) * th1 * th2 - m.theta2 * th1 ** 2
        return complex(grid.integrate(integrand))

    @staticmethod
    def ddot_at_edge(coeffs: OperatorCoefficients, edge: BandEdge, tol: Optional[float] = None) -> float:
        """dD/dlam at an edge from the completed-square quadrature formulas"""
        settings = get_settings()
        grid, th1, th2, m = _period_samples(coeffs, edge.mu, tol)
        t1, t2 = m.theta1.real, m.theta2.real
        d1, d2 = m.dtheta1.real, m.dtheta2.real
        th1, th2 = th1.real, th2.real
        if max(abs(t2), abs(d1)) < settings.EDGE_ZERO_TOL:
            if not edge.degenerate:
                raise DegenerateEdge(
                    f"theta_2 and theta_1' both vanish at non-degenerate edge mu={edge.mu}",
                    {"n": edge.n, "side": edge.side.value},
                )
            return 0.0
        if abs(t2) >= abs(d1):
            square = (2.0 * t2 * th1 + (d2 - t1) * th2) ** 2
            return float(-grid.integrate(square) / (4.0 * t2))
        square = (2.0 * d1 * th2 + (t1 - d2) * th1) ** 2
        return float(grid.integrate(square) / (4.0 * d1))

    @staticmethod
    def find_band_edges(
            coeffs: OperatorCoefficients,
            lambda_max: float,
            tol: Optional[float] = None,
            density: Optional[int] = None,
    ) -> BandScan:
        settings = get_settings()
        if lambda_max <= coeffs.q_min:
            raise ConfigError(f"lambda_max={lambda_max} must exceed inf q = {coeffs.q_min}", {"field": "run.lambda_max"})
        density = density or settings.SCAN_POINTS_PER_PI
        lo = coeffs.q_min - 1.0
        hi = (np.sqrt(lambda_max - lo) + np.pi) ** 2 + lo

        logger.info(f"🔎 Scanning discriminant on [{lo:.4g}, {hi:.4g}] for edges up to {lambda_max}")
        last_error = None
        for attempt in range(settings.SCAN_MAX_REFINEMENTS):
            lams = _scan_lambdas(lo, hi, coeffs, density)
            values = BandService.discriminant_batch(coeffs, lams, tol)
            try:
                scan = BandService._assemble(coeffs, lams, values, lambda_max, tol)
                logger.info(f"✅ Found {len(scan.edges)} edges and {len(scan.lacunas)} lacunas "
                            f"({lams.size} scan points)")
                return scan
            except ScanTooCoarse as exc:
                last_error = exc
                density *= 2
                logger.warning(f"Scan inconsistent ({exc.message}); refining to {density} points per pi")
        raise ScanTooCoarse(
            f"edge interleaving still violated after {settings.SCAN_MAX_REFINEMENTS} refinements",
            {"last": last_error.message if last_error else ""},
        )

    @staticmethod
    def _assemble(coeffs, lams, values, lambda_max, tol) -> BandScan:
        settings = get_settings()
        d = values.real

        def disc(lam):
            return BandService.discriminant(coeffs, lam, tol).real

        if d[0] <= 2.0:
            raise ScanTooCoarse("D must exceed 2 below inf q", {"lambda": lams[0]})
        below = np.nonzero(d < 2.0)[0]
        if below.size == 0:
            raise ScanTooCoarse("no band found below the scan end; increase lambda_max")
        i0 = below[0]
        mu0 = _root(lambda lam: disc(lam) - 2.0, lams[i0 - 1], lams[i0])

        edges: List[BandEdge] = []
        lacunas: List[Lacuna] = [Lacuna(0, None, mu0, False)]
        edges.append(BandService.make_edge(coeffs, 0, EdgeSide.PLUS, mu0, False, tol))

        previous = mu0
        n = 0
        for j in range(max(i0, 1), d.size - 1):
            if (d[j] - d[j - 1]) * (d[j + 1] - d[j]) >= 0.0:
                continue
            n += 1
            sigma = 1 if n % 2 == 0 else -1
            is_max = d[j] > d[j - 1]
            if is_max != (sigma > 0):
                raise ScanTooCoarse(f"extremum of D near {lams[j]:.6g} has the wrong type for n={n}")

            def ddot(lam):
                return BandService.discriminant_derivative(coeffs, lam, tol).real

            a, b = lams[j - 1], lams[j + 1]
            fa, fb = ddot(a), ddot(b)
            if fa * fb > 0.0:
                raise ScanTooCoarse(f"cannot bracket the extremum of D near {lams[j]:.6g}")
            lam_star = _root(ddot, a, b) if fa * fb < 0.0 else (a if fa == 0.0 else b)
            excess = sigma * disc(lam_star) - 2.0
            if lam_star > lambda_max and excess <= settings.DEGENERACY_D_TOL:
                break

            target = 2.0 * sigma
            if excess > settings.DEGENERACY_D_TOL:
                left = [k for k in range(j, 0, -1) if lams[k] < lam_star and sigma * d[k] < 2.0]
                right = [k for k in range(j, d.size) if lams[k] > lam_star and sigma * d[k] < 2.0]
                if left and not right and lam_star > lambda_max:
                    break
                if not left or not right:
                    raise ScanTooCoarse(f"open lacuna near {lam_star:.6g} is not bracketed")
                mu_minus = _root(lambda lam: disc(lam) - target, lams[left[0]], lam_star)
                mu_plus = _root(lambda lam: disc(lam) - target, lam_star, lams[right[0]])
                degenerate = mu_plus - mu_minus <= settings.DEGENERACY_RTOL * max(1.0, abs(mu_minus))
            elif excess >= -1e3 * settings.DEGENERACY_D_TOL:
                mu_minus = mu_plus = lam_star
                degenerate = True
            else:
                raise ScanTooCoarse(f"extremum of D inside a band near {lam_star:.6g}")

            if mu_minus > lambda_max:
                break
            if not previous < mu_minus <= mu_plus:
                raise ScanTooCoarse(f"edge interleaving violated at n={n}")
            if degenerate:
                mu_minus = mu_plus = lam_star
            lacunas.append(Lacuna(n, mu_minus, mu_plus, degenerate))
            edges.append(BandService.make_edge(coeffs, n, EdgeSide.MINUS, mu_minus, degenerate, tol))
            if mu_plus <= lambda_max:
                edges.append(BandService.make_edge(coeffs, n, EdgeSide.PLUS, mu_plus, degenerate, tol))
            previous = mu_plus

        return BandScan(edges=edges, lacunas=lacunas, lambdas=lams, discriminants=values,
                        lambda_max=float(lambda_max))

    @staticmethod
    def make_edge(coeffs, n, side, mu, degenerate, tol) -> BandEdge:
        mono = FundamentalService.monodromy(coeffs, mu, tol)
        provisional = BandEdge(n, side, float(mu), 0.0, degenerate, mono)
        if degenerate:
            ddot = float(BandService.discriminant_derivative(coeffs, mu, tol).real)
        else:
            ddot = BandService.ddot_at_edge(coeffs, provisional, tol)
        logger.debug(f"Edge n={n} {side.value}: mu={mu:.12g} ddot={ddot:.6g} degenerate={degenerate}")
        return BandEdge(n, side, float(mu), ddot, degenerate, mono)

    @staticmethod
    def edge_eigenfunction(coeffs: OperatorCoefficients, edge: BandEdge,
                           tol: Optional[float] = None) -> EdgeEigenfunction:
        settings = get_settings()
        if edge.degenerate:
            raise DegenerateEdge(f"edge n={edge.n} {edge.side.value} is degenerate")
        m = edge.monodromy
        t1, t2, d1, d2 = m.theta1.real, m.theta2.real, m.dtheta1.real, m.dtheta2.real
        sigma, tau = edge.parity_sign, edge.tau
        if max(abs(t2), abs(d1)) < settings.EDGE_ZERO_TOL:
            raise DegenerateEdge(f"theta_2 and theta_1' vanish at mu={edge.mu}")

        if abs(t2) >= abs(d1):
            radicand = tau * t2
            root = BandService._positive_root(radicand, edge)
            return EdgeEigenfunction(edge, coeffs, root, root * (sigma - t1) / t2, tol)
        radicand = -tau * d1
        root = BandService._positive_root(radicand, edge)
        return EdgeEigenfunction(edge, coeffs, root * (sigma - d2) / d1, root, tol)

    @staticmethod
    def _positive_root(radicand: float, edge: BandEdge) -> float:
        if radicand < -1e-10:
            raise DegenerateEdge(
                f"edge data have the wrong sign (radicand {radicand:.3e}) at mu={edge.mu}",
                {"n": edge.n, "side": edge.side.value},
            )
        return float(np.sqrt(max(radicand, 0.0)))

    @staticmethod
    def multiplier(coeffs: OperatorCoefficients, lam: complex, tol: Optional[float] = None) -> Tuple[complex, complex]:
        """rho with |rho| >= 1 among the roots of rho^2 - D rho + 1, and kappa = log rho"""
        d = complex(BandService.discriminant(coeffs, lam, tol))
        return BandService.multiplier_from_discriminant(d)

    @staticmethod
    def multiplier_from_discriminant(d: complex) -> Tuple[complex, complex]:
        root = np.sqrt(d * d - 4.0 + 0j)
        first, second = 0.5 * (d + root), 0.5 * (d - root)
        rho = first if abs(first) >= abs(second) else second
        return complex(rho), complex(np.log(rho))

    @staticmethod
    def edge_multiplier(coeffs: OperatorCoefficients, edge: BandEdge, k: complex,
                        tol: Optional[float] = None) -> Tuple[complex, complex]:
        """rho_n(k) on the branch analytic in k, and kappa_n(k) = log((-1)^n rho_n(k))"""
        k = complex(k)
        sigma = edge.parity_sign
        if k == 0:
            return complex(sigma), 0j
        d = complex(BandService.discriminant(coeffs, edge.lam_of_k(k), tol))
        rho, kappa = BandService.edge_rho_from_discriminant(edge, k, d)
        leading = np.sqrt(abs(edge.ddot)) * k
        if abs(kappa - leading) > 0.5 * abs(leading):
            raise KTooLarge(
                f"k={k} is outside the edge expansion (kappa={kappa:.6g}, leading term {leading:.6g})",
                {"n": edge.n, "side": edge.side.value},
            )
        return complex(rho), kappa

    @staticmethod
    def edge_rho_from_discriminant(edge: BandEdge, k: complex, d: complex) -> Tuple[complex, complex]:
        """Root of rho^2 - D rho + 1 continuing (-1)^n (1 + sqrt|ddot| k) analytically in k"""
        sigma = edge.parity_sign
        root = np.sqrt(d * d - 4.0 + 0j)
        if (root * np.conj(k)).real < 0.0:
            root = -root
        rho = 0.5 * (d + sigma * root)
        return complex(rho), complex(np.log(sigma * rho))

    # ==========================================
    # Diagnostics
    # ==========================================

    @staticmethod
    def translation_residual(coeffs: OperatorCoefficients, lam: complex, points,
                             tol: Optional[float] = None) -> float:
        """max over points of |theta_i(x+1) - theta_i(1) theta_1(x) - theta_i'(1) theta_2(x)|"""
        points = np.asarray(points, dtype=float)
        both = np.concatenate([points, points + 1.0, [1.0]])
        pair = FundamentalService.integrate_fundamental(coeffs, lam, min(both.min(), 0.0), both.max(),
                                                        tol, points=both)
        base = pair.indices_of(points)
        shifted = pair.indices_of(points + 1.0)
        one = pair.indices_of([1.0])[0]
        t1, t2 = pair.theta1[one], pair.theta2[one]
        d1, d2 = pair.dtheta1[one], pair.dtheta2[one]
        r1 = pair.theta1[shifted] - (t1 * pair.theta1[base] + d1 * pair.theta2[base])
        r2 = pair.theta2[shifted] - (t2 * pair.theta1[base] + d2 * pair.theta2[base])
        scale = 1.0 + np.abs(pair.theta1[shifted]) + np.abs(pair.theta2[shifted])
        return float(np.max(np.maximum(np.abs(r1), np.abs(r2)) / scale))

    @staticmethod
    def degenerate_expansion(coeffs: OperatorCoefficients, lacuna: Lacuna, step: float = 1e-2,
                             tol: Optional[float] = None) -> Tuple[float, np.ndarray, np.ndarray]:
        """Fit gamma in (-1)^n D(mu + d) = 2 - gamma d^2; returns gamma, offsets and remainders"""
        sigma = 1 if lacuna.n % 2 == 0 else -1
        mu = lacuna.right
        offsets = step * np.array([-1.0, -0.5, 0.5, 1.0])
        d = BandService.discriminant_batch(coeffs, mu + offsets, tol).real
        gamma = float(np.sum((2.0 - sigma * d) * offsets ** 2) / np.sum(offsets ** 4))
        remainder = np.abs(sigma * d - (2.0 - gamma * offsets ** 2))
        return gamma, offsets, remainder
