# app/services/perturbation/perturbation_service.py
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from app.config.settings import get_settings
from app.core.exceptions import ConfigError, GridMismatch, GridTooCoarse
from app.schemas.perturbation import (
    KernelKind,
    NoEmbeddedCondition,
    NoEmbeddedVerdict,
    PerturbationKind,
    PerturbationSpec,
)
from app.services.ode.coefficients import OperatorCoefficients
from app.services.perturbation.profiles import LinearFunctional, Profile
from app.services.perturbation.variants import (
    DifferentialPerturbation,
    EmbeddedExamplePerturbation,
    FunctionalRankOnePerturbation,
    IntegralKernelPerturbation,
    LocalizedPerturbation,
    RankOneKernelPerturbation,
    SupportInterval,
    ZeroPerturbation,
)
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples
from app.services.quadrature.separable_kernel import KernelTerm, assemble_kernel

logger = logging.getLogger(__name__)

MIN_NODES_PER_PERIOD = 16


@dataclass(frozen=True)
class EmbeddedWitness:
    """Compactly supported eigenfunction of H0 - eps L at lam = nu^2 (p = 1, q = 0)"""
    perturbation: EmbeddedExamplePerturbation
    grid: QuadratureGrid
    lambda_e: float
    psi: FunctionSamples
    diagnostics: Dict[str, float]

    @property
    def max_diagnostic(self) -> float:
        return max(self.diagnostics.values())


def _harmonic(nu: float, points: np.ndarray, kind: str) -> FunctionSamples:
    if kind == "cos":
        return FunctionSamples(points, np.cos(nu * points) + 0j, -nu * np.sin(nu * points) + 0j,
                               -nu ** 2 * np.cos(nu * points) + 0j)
    return FunctionSamples(points, np.sin(nu * points) + 0j, nu * np.cos(nu * points) + 0j,
                           -nu ** 2 * np.sin(nu * points) + 0j)


class PerturbationService:

    @staticmethod
    def build(spec: PerturbationSpec, epsilon: Optional[float] = None) -> LocalizedPerturbation:
        """Concrete perturbation from its descriptor (epsilon only matters for the embedded example)"""
        kind = spec.kind
        if kind == PerturbationKind.EMBEDDED_EXAMPLE:
            eps = spec.epsilon if spec.epsilon is not None else epsilon
            if eps is None:
                raise ConfigError("embedded_example needs an epsilon", {"field": "perturbation.epsilon"})
            return EmbeddedExamplePerturbation(spec.alpha, eps)

        support = SupportInterval(spec.q_lo, spec.q_hi)
        if kind == PerturbationKind.ZERO:
            return ZeroPerturbation(support)
        if kind == PerturbationKind.DIFFERENTIAL:
            profiles = [Profile.from_spec(p) if p is not None else None for p in (spec.b0, spec.b1, spec.b2)]
            return DifferentialPerturbation(support, *profiles)
        if kind == PerturbationKind.INTEGRAL_KERNEL:
            if spec.kernel.kind == KernelKind.GAUSSIAN:
                return IntegralKernelPerturbation.gaussian(support, spec.kernel.beta.value, spec.kernel.length)
            return IntegralKernelPerturbation.from_csv(support, spec.kernel.path)
        if kind == PerturbationKind.RANK_ONE:
            return RankOneKernelPerturbation(support, spec.beta.value, Profile.from_spec(spec.b))
        return FunctionalRankOnePerturbation(
            support, Profile.from_spec(spec.b), LinearFunctional.from_specs(spec.functional),
        )

    @staticmethod
    def grid(pert: LocalizedPerturbation, coeffs: Optional[OperatorCoefficients] = None,
             order: Optional[int] = None, max_cell: Optional[float] = None) -> QuadratureGrid:
        """The Q grid owned by the perturbation, split at its and the coefficients' breakpoints"""
        settings = get_settings()
        lo, hi = pert.support.q_lo, pert.support.q_hi
        breakpoints = list(pert.breakpoints())
        if coeffs is not None:
            breakpoints += list(coeffs.breakpoint_images(lo, hi))
        if max_cell is None:
            max_cell = min(1.0 / settings.QUAD_CELLS_PER_UNIT, pert.length_scale())
        grid = QuadratureGrid.build(lo, hi, breakpoints, order=order, max_cell=max_cell)
        logger.debug(f"Perturbation grid for {pert.kind.value}: {grid}")
        return grid

    @staticmethod
    def apply(pert: LocalizedPerturbation, grid: QuadratureGrid, u: FunctionSamples) -> np.ndarray:
        """L u on the grid nodes; u must be sampled on those nodes"""
        if u.points.shape != grid.nodes.shape or not np.allclose(u.points, grid.nodes, rtol=0.0, atol=1e-12):
            raise GridMismatch(f"samples do not sit on the perturbation grid {grid}")
        u.require(pert.derivative_order)
        return pert.act(grid, u)

    @staticmethod
    def classify_no_embedded(pert: LocalizedPerturbation) -> NoEmbeddedVerdict:
        if pert.no_embedded_guarantee == NoEmbeddedCondition.NONE:
            return NoEmbeddedVerdict.NOT_GUARANTEED
        return NoEmbeddedVerdict.GUARANTEED_NONE

    @staticmethod
    def estimate_operator_norm(pert: LocalizedPerturbation, grid: QuadratureGrid, n_samples: int = 50,
                               seed: int = 0, modes: int = 8) -> float:
        """Largest ratio ||L u|| / ||u||_{W^2} over random trigonometric test functions on Q"""
        rng = np.random.default_rng(seed)
        x = grid.nodes
        lo, length = grid.lo, grid.length
        freq = np.pi * np.arange(modes + 1) / length
        phase = freq[None, :] * (x - lo)[:, None]
        decay = 1.0 / (1.0 + np.arange(modes + 1) ** 2)

        worst = 0.0
        for _ in range(n_samples):
            a = (rng.standard_normal(modes + 1) + 1j * rng.standard_normal(modes + 1)) * decay
            b = (rng.standard_normal(modes + 1) + 1j * rng.standard_normal(modes + 1)) * decay
            values = np.cos(phase) @ a + np.sin(phase) @ b
            first = (-np.sin(phase) * freq) @ a + (np.cos(phase) * freq) @ b
            second = -(np.cos(phase) * freq ** 2) @ a - (np.sin(phase) * freq ** 2) @ b
            u = FunctionSamples(x, values, first, second)
            norm_u = np.sqrt(sum(grid.norm(c) ** 2 for c in (values, first, second)))
            worst = max(worst, grid.norm(pert.act(grid, u)) / norm_u)
        return float(worst)

    # ==========================================
    # Embedded eigenvalue construction
    # ==========================================

    @staticmethod
    def embedded_witness(alpha: float, epsilon: float, order: Optional[int] = None,
                         max_cell: Optional[float] = None) -> EmbeddedWitness:
        """psi = -(eps/nu) int_Q sin(nu|x - t|) xi(t) dt together with its five residuals"""
        pert = EmbeddedExamplePerturbation(alpha, epsilon)
        nu = pert.nu
        if nu < 2.0:
            raise GridTooCoarse(f"nu={nu:.6g} is below 2; epsilon={epsilon} is too large", {"nu": nu})
        grid = PerturbationService.grid(pert, order=order, max_cell=max_cell or min(0.25, 2.0 * np.pi / nu))
        nodes_per_period = grid.size * (2.0 * np.pi / nu) / grid.length
        if nodes_per_period < MIN_NODES_PER_PERIOD:
            raise GridTooCoarse(
                f"grid resolves sin(nu x) with {nodes_per_period:.1f} nodes per period (need {MIN_NODES_PER_PERIOD})",
                {"nu": nu, "nodes": grid.size},
            )

        def terms(points):
            cos_x, sin_x = _harmonic(nu, points, "cos"), _harmonic(nu, points, "sin")
            cos_t, sin_t = np.cos(nu * grid.nodes), np.sin(nu * grid.nodes)
            s = epsilon / nu
            upper = (KernelTerm(cos_x, sin_t, -s), KernelTerm(sin_x, cos_t, s))
            lower = (KernelTerm(sin_x, cos_t, -s), KernelTerm(cos_x, sin_t, s))
            return upper, lower

        xi = pert.xi(grid.nodes)
        upper, lower = terms(grid.nodes)
        psi = assemble_kernel(grid, grid.nodes, upper, lower, second=True).apply_right(xi)

        outside = np.concatenate([
            np.linspace(grid.lo - 3.0, grid.lo - 0.1, 16), np.linspace(grid.hi + 0.1, grid.hi + 3.0, 16),
        ])
        out_upper, out_lower = terms(outside)
        psi_outside = assemble_kernel(grid, outside, out_upper, out_lower).apply_right(xi)

        derivative = grid.interpolation_matrix([0.0, pert.shift]) @ psi.first
        functional = complex(pert.functional.evaluate(grid, psi))
        equation = -psi.second - epsilon * pert.act(grid, psi) - pert.eigenvalue * psi.values
        diagnostics = {
            "derivative_at_zero": float(abs(derivative[0])),
            "derivative_at_shift": float(abs(derivative[1] - epsilon)),
            "functional": float(abs(functional - 1.0)),
            "outside": float(np.max(np.abs(psi_outside.values))),
            "equation_residual": float(np.max(np.abs(equation))),
        }
        logger.info(f"Embedded witness alpha={alpha} eps={epsilon}: lambda={pert.eigenvalue:.10g}, "
                    f"max residual {max(diagnostics.values()):.3e}")
        return EmbeddedWitness(pert, grid, pert.eigenvalue, psi, diagnostics)
