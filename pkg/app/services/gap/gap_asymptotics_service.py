# app/services/gap/gap_asymptotics_service.py
"""Eigenvalues of H0 - eps L emerging from a band edge.

Everything reduces to the Birman-Schwinger equation on Q: with g = A(eps, k) L phi
the scalar equation k = +-eps (g, phi) / (2 sqrt|ddot|) fixes k, and the
eigenvalue is mu -+ k^2.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from app.config.settings import get_settings
from app.core.exceptions import DegenerateEdge, NoConvergence, NonDecaying, NotInvertible
from app.schemas.reports import (
    ComplexDTO,
    EigenfunctionSummaryDTO,
    ExistenceVerdict,
    GapEigenvalueReportDTO,
)
from app.services.bands.band_service import BandEdge, BandService
from app.services.green.green_service import GreenService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.perturbation.perturbation_service import PerturbationService
from app.services.perturbation.variants import FunctionalRankOnePerturbation, LocalizedPerturbation
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples

logger = logging.getLogger(__name__)

DECAY_SHIFTS = 5
SOLVE_RESIDUAL_TOL = 1e-10


# ============================================================================
# Data types
# ============================================================================

@dataclass(frozen=True)
class EdgeProblem:
    """Edge data discretized on the perturbation grid, shared by every epsilon"""
    coeffs: OperatorCoefficients
    edge: BandEdge
    pert: LocalizedPerturbation
    grid: QuadratureGrid
    phi: FunctionSamples
    l_phi: np.ndarray
    l_green0: np.ndarray  # L G_{n,0} on node values
    lacuna_width: Optional[float] = None  # None for the semi-infinite lacuna
    tol: Optional[float] = field(default=None, compare=False)

    @property
    def sign(self) -> int:
        return self.edge.sign

    @property
    def factor(self) -> float:
        """1 / (2 sqrt|ddot(mu)|)"""
        return 1.0 / (2.0 * np.sqrt(abs(self.edge.ddot)))

    def pair_with_phi(self, g: np.ndarray) -> complex:
        """(g, phi)"""
        return self.grid.inner(g, self.phi.values)


@dataclass(frozen=True)
class KCoefficients:
    k1: complex
    k2: complex
    edge: BandEdge
    epsilon: float

    @property
    def linear(self) -> complex:
        """k1 + eps k2"""
        return self.k1 + self.epsilon * self.k2

    @property
    def k_approx(self) -> complex:
        return self.epsilon * self.linear


@dataclass(frozen=True)
class KSolution:
    k: complex
    iterations: int
    g: np.ndarray


@dataclass(frozen=True)
class EigenfunctionProfile:
    points: np.ndarray
    psi: FunctionSamples
    first_order: np.ndarray  # phi + eps G0 L phi
    decay_rate: float
    fitted_decay_right: Optional[float]
    fitted_decay_left: Optional[float]
    first_order_difference: float
    equation_residual: float

    def to_dto(self) -> EigenfunctionSummaryDTO:
        return EigenfunctionSummaryDTO(
            window=[float(self.points[0]), float(self.points[-1])],
            points=int(self.points.size),
            decay_rate=self.decay_rate,
            fitted_decay_right=self.fitted_decay_right,
            fitted_decay_left=self.fitted_decay_left,
            first_order_difference=self.first_order_difference,
            equation_residual=self.equation_residual,
        )


@dataclass(frozen=True)
class GapEigenvalueReport:
    edge: BandEdge
    epsilon: float
    exists: ExistenceVerdict
    criterion_value: complex
    coefficients: KCoefficients
    lambda_order1: complex
    lambda_order2: complex
    lambda_from_resolvent: complex
    sign_verdict: Optional[ExistenceVerdict] = None
    k_exact: Optional[complex] = None
    k_iterations: Optional[int] = None
    eigenfunction: Optional[EigenfunctionProfile] = None
    notes: List[str] = field(default_factory=list)

    @property
    def lambda_exact(self) -> Optional[complex]:
        return None if self.k_exact is None else complex(self.edge.lam_of_k(self.k_exact))

    def to_dto(self, pert: LocalizedPerturbation) -> GapEigenvalueReportDTO:
        return GapEigenvalueReportDTO(
            n=self.edge.n,
            side=self.edge.side,
            mu=self.edge.mu,
            ddot=self.edge.ddot,
            epsilon=self.epsilon,
            exists=self.exists,
            sign_verdict=self.sign_verdict,
            criterion_value=ComplexDTO.of(self.criterion_value),
            k1=ComplexDTO.of(self.coefficients.k1),
            k2=ComplexDTO.of(self.coefficients.k2),
            lambda_order1=ComplexDTO.of(self.lambda_order1),
            lambda_order2=ComplexDTO.of(self.lambda_order2),
            lambda_from_resolvent=ComplexDTO.of(self.lambda_from_resolvent),
            k_exact=ComplexDTO.of(self.k_exact),
            lambda_exact=ComplexDTO.of(self.lambda_exact),
            k_iterations=self.k_iterations,
            eigenfunction=self.eigenfunction.to_dto() if self.eigenfunction else None,
            no_embedded=PerturbationService.classify_no_embedded(pert),
            notes=list(self.notes),
        )


@dataclass(frozen=True)
class FunctionalRankOneClosedForm:
    a_l_phi: np.ndarray  # b l(phi) / (1 - eps l(G0 b))
    denominator: complex
    lambda_closed: complex


# ============================================================================
# Helpers
# ============================================================================

def _verdict(value: float, threshold: float) -> ExistenceVerdict:
    if value > threshold:
        return ExistenceVerdict.YES
    if value < -threshold:
        return ExistenceVerdict.NO
    return ExistenceVerdict.INDETERMINATE


def _fit_decay(distances: np.ndarray, values: np.ndarray) -> Optional[float]:
    """Rate r in |psi| ~ exp(-r d), d the distance from Q, from samples at integer shifts"""
    magnitude = np.abs(values)
    if np.any(magnitude <= 0.0) or not np.all(np.isfinite(magnitude)):
        return None
    slope = np.polyfit(distances, np.log(magnitude), 1)[0]
    return float(-slope)


def _decay_points(problem: EdgeProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Integer shifts of a common phase right and left of Q"""
    support = problem.pert.support
    shifts = np.arange(1, DECAY_SHIFTS + 1, dtype=float)
    return support.x1 + shifts, support.x0 - shifts


class GapAsymptoticsService:

    @staticmethod
    def edge_problem(coeffs: OperatorCoefficients, edge: BandEdge, pert: LocalizedPerturbation,
                     grid: Optional[QuadratureGrid] = None, lacuna_width: Optional[float] = None,
                     tol: Optional[float] = None) -> EdgeProblem:
        if edge.degenerate:
            raise DegenerateEdge(f"edge n={edge.n} {edge.side.value} is degenerate",
                                 {"n": edge.n, "side": edge.side.value})
        grid = grid or PerturbationService.grid(pert, coeffs)
        phi = BandService.edge_eigenfunction(coeffs, edge, tol).sample(grid.nodes)
        green0 = GreenService.edge_green_operator(coeffs, edge, grid, tol=tol)
        l_phi = PerturbationService.apply(pert, grid, phi)
        l_green0 = PerturbationService.apply(pert, grid, green0)
        logger.debug(f"Edge problem {edge.label}: {grid.size} nodes on Q")
        return EdgeProblem(coeffs, edge, pert, grid, phi, np.asarray(l_phi, dtype=complex),
                           np.asarray(l_green0, dtype=complex), lacuna_width, tol)

    @staticmethod
    def k_coefficients(problem: EdgeProblem, epsilon: float) -> KCoefficients:
        """k1 = +-(L phi, phi) / (2 sqrt|ddot|), k2 = +-(L G0 L phi, phi) / (2 sqrt|ddot|)"""
        scale = problem.sign * problem.factor
        k1 = scale * problem.pair_with_phi(problem.l_phi)
        k2 = scale * problem.pair_with_phi(problem.l_green0 @ problem.l_phi)
        return KCoefficients(complex(k1), complex(k2), problem.edge, float(epsilon))

    # ==========================================
    # Birman-Schwinger solves
    # ==========================================

    @staticmethod
    def _solve(matrix: np.ndarray, epsilon: float, rhs: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
        """g with (I - eps matrix) g = rhs: Neumann series, dense solve when it does not contract"""
        settings = get_settings()
        rhs = np.asarray(rhs, dtype=complex)
        if epsilon == 0.0:
            return rhs.copy()

        scale = max(grid.norm(rhs), 1e-300)
        g, term = rhs.copy(), rhs.copy()
        previous = np.inf
        for count in range(1, settings.NEUMANN_MAX_TERMS + 1):
            term = epsilon * (matrix @ term)
            size = grid.norm(term)
            g += term
            if size <= settings.NEUMANN_TOL * scale:
                residual = grid.norm(g - epsilon * (matrix @ g) - rhs)
                if residual <= SOLVE_RESIDUAL_TOL * scale:
                    logger.debug(f"Neumann series converged after {count} terms")
                    return g
                logger.warning(f"Neumann residual {residual:.3e} above {SOLVE_RESIDUAL_TOL} relative; "
                               f"falling back to a dense solve")
                break
            if size > previous and count > 2:
                logger.warning(f"Neumann series for eps={epsilon} does not contract; falling back to a dense solve")
                break
            previous = size
        else:
            logger.warning(f"Neumann series for eps={epsilon} not converged in {count} terms; "
                           f"falling back to a dense solve")

        n = rhs.shape[0]
        if n > settings.DENSE_SOLVE_MAX_NODES:
            raise NotInvertible(
                f"dense solve on {n} nodes exceeds DENSE_SOLVE_MAX_NODES={settings.DENSE_SOLVE_MAX_NODES}",
                {"epsilon": epsilon},
            )
        system = np.eye(n) - epsilon * matrix
        condition = np.linalg.cond(system)
        if not np.isfinite(condition) or condition > settings.SINGULAR_COND:
            raise NotInvertible(
                f"I - eps L G is singular for eps={epsilon} (condition {condition:.3e})",
                {"epsilon": epsilon},
            )
        g = np.linalg.solve(system, rhs)
        residual = grid.norm(system @ g - rhs)
        if residual > SOLVE_RESIDUAL_TOL * scale:
            logger.warning(f"Dense solve residual {residual:.3e} above {SOLVE_RESIDUAL_TOL} relative")
        return g

    @staticmethod
    def resolvent_correction(problem: EdgeProblem, epsilon: float, rhs: Optional[np.ndarray] = None) -> np.ndarray:
        """A(eps, 0) rhs, i.e. g with (I - eps L G0) g = rhs (rhs defaults to L phi)"""
        rhs = problem.l_phi if rhs is None else rhs
        return GapAsymptoticsService._solve(problem.l_green0, epsilon, rhs, problem.grid)

    @staticmethod
    def _regular_matrix(problem: EdgeProblem, k: complex) -> np.ndarray:
        """L (G(k) - G_{-1}/k) on node values; L G0 at k = 0"""
        if complex(k) == 0:
            return problem.l_green0
        split = GreenService.edge_green_k(problem.coeffs, problem.edge, k, problem.grid, tol=problem.tol)
        return np.asarray(PerturbationService.apply(problem.pert, problem.grid, split.regular), dtype=complex)

    # ==========================================
    # Existence and asymptotics
    # ==========================================

    @staticmethod
    def existence_criterion(problem: EdgeProblem, epsilon: float) -> Tuple[ExistenceVerdict, complex]:
        """Verdict from +-Re (phi, A(eps,0) L phi) against 1e3 * QUADRATURE_TOL"""
        settings = get_settings()
        g = GapAsymptoticsService.resolvent_correction(problem, epsilon)
        value = problem.grid.inner(problem.phi.values, g)
        verdict = _verdict(problem.sign * value.real, settings.exist_threshold)
        logger.info(f"Existence at {problem.edge.label}, eps={epsilon}: {verdict.value} (criterion {value:.6g})")
        return verdict, complex(value)

    @staticmethod
    def sign_verdict(coefficients: KCoefficients) -> ExistenceVerdict:
        """Re(k1 + eps k2) against +-eps^{3/2}"""
        return _verdict(coefficients.linear.real, coefficients.epsilon ** 1.5)

    @staticmethod
    def lambda_from_resolvent(problem: EdgeProblem, epsilon: float, g: np.ndarray) -> complex:
        """mu -+ eps^2 (A L phi, phi)^2 / (4 |ddot|)"""
        pairing = problem.pair_with_phi(g)
        return complex(problem.edge.mu - problem.sign * epsilon ** 2 * pairing ** 2 / (4.0 * abs(problem.edge.ddot)))

    @staticmethod
    def solve_k_equation(problem: EdgeProblem, epsilon: float, seed: Optional[complex] = None) -> KSolution:
        """Damped fixed point of k = +-eps (A(eps, k) L phi, phi) / (2 sqrt|ddot|)"""
        settings = get_settings()
        scale = problem.sign * problem.factor * epsilon
        if seed is None:
            seed = GapAsymptoticsService.k_coefficients(problem, epsilon).k_approx

        def update(k: complex) -> Tuple[complex, np.ndarray]:
            g = GapAsymptoticsService._solve(
                GapAsymptoticsService._regular_matrix(problem, k), epsilon, problem.l_phi, problem.grid,
            )
            return complex(scale * problem.pair_with_phi(g)), g

        k = complex(seed)
        last_step = np.inf
        for iteration in range(1, settings.K_MAX_ITER + 1):
            k_new, g = update(k)
            step = abs(k_new - k)
            logger.debug(f"k iteration {iteration}: k={k_new:.15g} |dk|={step:.3e}")
            if not np.isfinite(step):
                break
            if problem.lacuna_width is not None and abs(k_new) ** 2 > problem.lacuna_width:
                raise NoConvergence(
                    f"k iterate {k_new:.6g} left the lacuna of width {problem.lacuna_width:.6g} for eps={epsilon}",
                    {"n": problem.edge.n, "side": problem.edge.side.value, "epsilon": epsilon},
                )
            if step <= settings.K_TOL:
                logger.info(f"k-equation at {problem.edge.label}, eps={epsilon}: k={k_new:.12g} "
                            f"in {iteration} iterations")
                return KSolution(k_new, iteration, g)
            if step > last_step:
                k = k + settings.K_DAMPING * (k_new - k)
            else:
                k = k_new
            last_step = step
        raise NoConvergence(
            f"k-equation did not converge in {settings.K_MAX_ITER} iterations for eps={epsilon}",
            {"n": problem.edge.n, "side": problem.edge.side.value, "epsilon": epsilon},
        )

    @staticmethod
    def eigenfunction_profile(problem: EdgeProblem, epsilon: float, k: complex, window: Sequence[float],
                              points: int = 401, g: Optional[np.ndarray] = None) -> EigenfunctionProfile:
        """psi = eps G(k) A(eps, k) L phi on the window, with its decay and first-order comparison"""
        k = complex(k)
        if k.real <= 0.0:
            raise NonDecaying(f"Re k = {k.real:.3e} is not positive; no decaying eigenfunction",
                              {"n": problem.edge.n, "side": problem.edge.side.value})
        coeffs, edge, grid = problem.coeffs, problem.edge, problem.grid
        if g is None:
            g = GapAsymptoticsService._solve(
                GapAsymptoticsService._regular_matrix(problem, k), epsilon, problem.l_phi, grid,
            )

        window_x = np.linspace(float(window[0]), float(window[1]), int(points))
        right, left = _decay_points(problem)
        targets = np.concatenate([window_x, right, left])
        split = GreenService.edge_green_k(coeffs, edge, k, grid, targets=targets, tol=problem.tol)
        psi_all = split.full.apply_right(epsilon * g)
        count = window_x.size
        psi = psi_all.take(slice(0, count))

        green0 = GreenService.edge_green_apply(coeffs, edge, grid, problem.l_phi, targets=window_x, tol=problem.tol)
        phi_w = BandService.edge_eigenfunction(coeffs, edge, problem.tol).sample(window_x).values
        first_order = phi_w + epsilon * green0.values
        difference = float(np.sqrt(trapezoid(np.abs(psi.values - first_order) ** 2, window_x)))

        # eigenvalue equation at the nodes of Q
        nodes = GreenService.edge_green_k(coeffs, edge, k, grid, tol=problem.tol).full.apply_right(epsilon * g)
        lam = edge.lam_of_k(k)
        x = grid.nodes
        operator = (-coeffs.p(x) * nodes.second - coeffs.p.derivative(x) * nodes.first
                    + (coeffs.q(x) - lam) * nodes.values)
        equation = operator - epsilon * PerturbationService.apply(problem.pert, grid, nodes)
        residual = float(np.max(np.abs(equation)) / max(1.0, np.max(np.abs(nodes.values))))

        support = problem.pert.support
        fitted_right = _fit_decay(right - support.x1, psi_all.values[count:count + right.size])
        fitted_left = _fit_decay(support.x0 - left, psi_all.values[count + right.size:])
        logger.info(f"Eigenfunction at {edge.label}, eps={epsilon}: Re kappa={split.kappa.real:.6g}, "
                    f"fitted right={fitted_right}, left={fitted_left}")
        return EigenfunctionProfile(
            points=window_x,
            psi=psi,
            first_order=first_order,
            decay_rate=float(split.kappa.real),
            fitted_decay_right=fitted_right,
            fitted_decay_left=fitted_left,
            first_order_difference=difference,
            equation_residual=residual,
        )

    @staticmethod
    def eigenvalue_asymptotics(
            problem: EdgeProblem,
            epsilon: float,
            window: Optional[Sequence[float]] = None,
            window_points: int = 401,
            sign_test: bool = False,
            force: bool = False,
    ) -> GapEigenvalueReport:
        """Full report for one (edge, eps): criterion, expansions, exact k and eigenfunction"""
        edge, sign = problem.edge, problem.sign
        coefficients = GapAsymptoticsService.k_coefficients(problem, epsilon)
        exists, criterion = GapAsymptoticsService.existence_criterion(problem, epsilon)
        g0 = GapAsymptoticsService.resolvent_correction(problem, epsilon)

        lambda_order1 = edge.mu - sign * (epsilon * coefficients.k1) ** 2
        lambda_order2 = edge.mu - sign * coefficients.k_approx ** 2
        lambda_resolvent = GapAsymptoticsService.lambda_from_resolvent(problem, epsilon, g0)
        notes: List[str] = []
        by_sign = GapAsymptoticsService.sign_verdict(coefficients) if sign_test else None

        k_exact, iterations, profile = None, None, None
        if exists == ExistenceVerdict.YES or force:
            solution = GapAsymptoticsService.solve_k_equation(problem, epsilon, coefficients.k_approx)
            k_exact, iterations = solution.k, solution.iterations
            if k_exact.real > 0.0:
                support = problem.pert.support
                window = window or (support.x0 - 1.0, support.x1 + 1.0)
                profile = GapAsymptoticsService.eigenfunction_profile(
                    problem, epsilon, k_exact, window, window_points, solution.g,
                )
            else:
                notes.append(f"Re k_exact = {k_exact.real:.3e}: no decaying eigenfunction")
        elif exists == ExistenceVerdict.INDETERMINATE:
            notes.append("criterion within the quadrature threshold; exact k not attempted")

        return GapEigenvalueReport(
            edge=edge,
            epsilon=float(epsilon),
            exists=exists,
            criterion_value=criterion,
            coefficients=coefficients,
            lambda_order1=complex(lambda_order1),
            lambda_order2=complex(lambda_order2),
            lambda_from_resolvent=lambda_resolvent,
            sign_verdict=by_sign,
            k_exact=k_exact,
            k_iterations=iterations,
            eigenfunction=profile,
            notes=notes,
        )

    # ==========================================
    # Closed forms
    # ==========================================

    @staticmethod
    def functional_rank_one_closed_form(problem: EdgeProblem, epsilon: float) -> FunctionalRankOneClosedForm:
        """A(eps,0) L phi = b l(phi) / (1 - eps l(G0 b)) and the matching eigenvalue"""
        pert = problem.pert
        if not isinstance(pert, FunctionalRankOnePerturbation):
            raise TypeError(f"closed form needs a functional rank-one perturbation, got {pert.kind.value}")
        grid = problem.grid
        b = pert.b(grid.nodes)
        l_phi = complex(pert.functional.evaluate(grid, problem.phi))
        green_b = GreenService.edge_green_apply(problem.coeffs, problem.edge, grid, b, tol=problem.tol)
        denominator = 1.0 - epsilon * complex(pert.functional.evaluate(grid, green_b))
        pairing = problem.pair_with_phi(b) * l_phi / denominator
        lam = problem.edge.mu - problem.sign * epsilon ** 2 * pairing ** 2 / (4.0 * abs(problem.edge.ddot))
        return FunctionalRankOneClosedForm(b * l_phi / denominator, complex(denominator), complex(lam))
