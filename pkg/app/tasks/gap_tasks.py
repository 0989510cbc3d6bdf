# app/tasks/gap_tasks.py
"""Gap-eigenvalue jobs, one per (edge, epsilon)"""
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.config.settings import get_settings
from app.core.exceptions import ConfigError
from app.core.job_context import job_context, new_job_id
from app.schemas.band_edges import EdgeSide
from app.schemas.problem_config import KernelDumpKind, ProblemConfig
from app.schemas.task_payloads import EdgeRef, GapJobPayload
from app.services.bands.band_service import BandEdge, BandScan, BandService
from app.services.gap.gap_asymptotics_service import EdgeProblem, GapAsymptoticsService, GapEigenvalueReport
from app.services.green.green_service import (
    GreenService,
    edge_k_kernel_parts,
    edge_kernel_parts,
    resolvent_kernel_parts,
)
from app.services.ode.coefficients import OperatorCoefficients
from app.services.perturbation.perturbation_service import PerturbationService

logger = logging.getLogger(__name__)


def select_edges(scan: BandScan, config: ProblemConfig) -> List[EdgeRef]:
    """Requested edges as payload references; "all" skips closed lacunas"""
    if config.run.edges == "all":
        chosen = [edge for edge in scan.edges if not edge.degenerate]
    else:
        try:
            chosen = [scan.edge(sel.n, sel.side) for sel in config.run.edges]
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), {"field": "run.edges"}) from exc
    return [
        EdgeRef(n=edge.n, side=edge.side, mu=edge.mu, degenerate=edge.degenerate,
                lacuna_width=scan.lacuna_width(edge))
        for edge in chosen
    ]


def gap_payloads(config: ProblemConfig, edges: List[EdgeRef], epsilons: List[float]) -> List[Dict[str, Any]]:
    """Payloads in (edge, epsilon) order; results come back in the same order"""
    dumped = config.model_dump(mode="json")
    return [
        GapJobPayload(config=dumped, edge=ref, epsilon=eps, job_id=new_job_id(f"gap-n{ref.n}{ref.side.value}"))
        .model_dump(mode="json")
        for ref in edges
        for eps in epsilons
    ]


def rebuild(config: ProblemConfig, ref: EdgeRef, epsilon: float):
    coeffs = OperatorCoefficients.from_spec(config.coefficients)
    pert = PerturbationService.build(config.perturbation, epsilon)
    edge = BandService.make_edge(coeffs, ref.n, ref.side, ref.mu, ref.degenerate, None)
    return coeffs, pert, edge


def _table(x: np.ndarray, t: np.ndarray, values: np.ndarray) -> Dict[str, list]:
    xx, tt = np.meshgrid(x, t, indexing="ij")
    return {"x": xx.ravel().tolist(), "t": tt.ravel().tolist(),
            "re": values.real.ravel().tolist(), "im": values.imag.ravel().tolist()}


def kernel_dumps(problem: EdgeProblem, report: GapEigenvalueReport, kinds: List[KernelDumpKind],
                 points: int) -> Dict[str, Dict[str, list]]:
    """Kernel values on (targets in Q) x (grid nodes) for the requested Green operators"""
    settings = get_settings()
    coeffs, edge, grid = problem.coeffs, problem.edge, problem.grid
    targets = np.linspace(grid.lo, grid.hi, points)
    tables = {}
    for kind in kinds:
        if kind == KernelDumpKind.EDGE:
            parts = edge_kernel_parts(coeffs, edge, grid, targets)
        elif kind == KernelDumpKind.FLOQUET:
            k = report.k_exact if report.k_exact is not None else report.coefficients.k_approx
            if k == 0:
                logger.warning(f"Skipping Floquet kernel dump at {edge.label}: k = 0")
                continue
            parts, _ = edge_k_kernel_parts(coeffs, edge, k, grid, targets)
        else:
            lam = report.lambda_exact if report.lambda_exact is not None else report.lambda_order2
            rho, _ = BandService.multiplier(coeffs, lam)
            if abs(rho) - 1.0 <= settings.ON_SPECTRUM_TOL:
                logger.warning(f"Skipping resolvent kernel dump at {edge.label}: lambda={lam:.6g} is on the spectrum")
                continue
            parts = resolvent_kernel_parts(coeffs, lam, rho, grid, targets)
        tables[kind.value] = _table(targets, grid.nodes, GreenService.kernel_values(parts, targets, grid.nodes))
    return tables


def run_gap_job(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Full pipeline for one (edge, epsilon): coefficients, criterion, expansions, exact k, eigenfunction"""
    job = GapJobPayload.model_validate(payload)
    config = ProblemConfig.model_validate(job.config)
    ref, eps = job.edge, job.epsilon
    with job_context("gap", job.job_id, edge=f"n{ref.n}_{ref.side.value}", epsilon=eps):
        coeffs, pert, edge = rebuild(config, ref, eps)
        problem = GapAsymptoticsService.edge_problem(coeffs, edge, pert, lacuna_width=ref.lacuna_width)
        run = config.run
        report = GapAsymptoticsService.eigenvalue_asymptotics(
            problem, eps, window=run.window, window_points=run.window_points,
            sign_test=run.sign_test, force=run.force,
        )
        result: Dict[str, Any] = {"report": report.to_dto(pert).model_dump(mode="json")}
        profile = report.eigenfunction
        if profile is not None:
            result["eigenfunction"] = {
                "x": profile.points.tolist(),
                "re": profile.psi.values.real.tolist(),
                "im": profile.psi.values.imag.tolist(),
                "first_order_re": profile.first_order.real.tolist(),
                "first_order_im": profile.first_order.imag.tolist(),
            }
        if run.dump_kernels:
            result["kernels"] = kernel_dumps(problem, report, run.dump_kernels, run.dump_points)
        return result


def half_gap(edge: BandEdge, scan: BandScan, lambda_pred: Optional[complex] = None) -> Tuple[float, float]:
    """Part of the adjacent lacuna closer to the edge than to the opposite edge"""
    lacuna = scan.lacuna_of(edge)
    if edge.side == EdgeSide.PLUS:
        if lacuna.semi_infinite:
            spread = abs(complex(lambda_pred) - edge.mu) if lambda_pred is not None else 0.0
            return edge.mu - max(1.0, 4.0 * spread), edge.mu
        return 0.5 * (lacuna.left + lacuna.right), edge.mu
    return edge.mu, 0.5 * (lacuna.left + lacuna.right)
