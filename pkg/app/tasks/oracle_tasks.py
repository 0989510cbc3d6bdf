# app/tasks/oracle_tasks.py
"""Finite-difference oracle jobs, one per (R, h)"""
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.core.job_context import job_context, new_job_id
from app.schemas.problem_config import ProblemConfig
from app.schemas.task_payloads import OracleJobPayload
from app.services.ode.coefficients import OperatorCoefficients
from app.services.oracle.direct_oracle_service import (
    ConvergenceRow,
    DirectOracleService,
    DiscreteBands,
    OracleEigenpair,
    SpectralWindow,
)
from app.services.perturbation.perturbation_service import PerturbationService

logger = logging.getLogger(__name__)


def oracle_payloads(config: ProblemConfig, epsilon: float, window: SpectralWindow, R0: float, h0: float,
                    bands: Optional[DiscreteBands] = None, interior_only: bool = True) -> List[Dict[str, Any]]:
    dumped = config.model_dump(mode="json")
    return [
        OracleJobPayload(
            config=dumped, epsilon=epsilon, R=R, h=h,
            window=(window.lo, window.hi, window.half_height, window.im_center),
            bands=bands.bands if bands else None, margin=bands.margin if bands else 0.0,
            interior_only=interior_only, method=config.oracle.method,
            job_id=new_job_id("oracle"),
        ).model_dump(mode="json")
        for R, h in DirectOracleService.study_grid(R0, h0, config.oracle.refinements)
    ]


def run_oracle_job(payload: Dict[str, Any]) -> Dict[str, Any]:
    job = OracleJobPayload.model_validate(payload)
    config = ProblemConfig.model_validate(job.config)
    with job_context("oracle", job.job_id, R=job.R, h=job.h, epsilon=job.epsilon):
        coeffs = OperatorCoefficients.from_spec(config.coefficients)
        pert = PerturbationService.build(config.perturbation, job.epsilon)
        window = SpectralWindow(*job.window)
        bands = DiscreteBands(list(job.bands), job.margin) if job.bands is not None else None
        problem = DirectOracleService.assemble(coeffs, pert, job.epsilon, job.R, job.h)
        pairs = DirectOracleService.gap_eigenvalues(problem, window, bands, job.method, job.interior_only)
        return {
            "R": problem.R,
            "h": job.h,
            "window": list(job.window),
            "eigenpairs": [
                {"re": p.value.real, "im": p.value.imag, "residual": p.residual,
                 "tail_mass": p.tail_mass, "separation": p.separation}
                for p in pairs
            ],
        }


def rows_from_results(results: Sequence[Dict[str, Any]]) -> List[ConvergenceRow]:
    """Convergence rows without eigenvectors, in submission order"""
    rows = []
    for result in results:
        pairs = [
            OracleEigenpair(complex(p["re"], p["im"]), np.empty(0), p["residual"], p["tail_mass"], p["separation"])
            for p in result["eigenpairs"]
        ]
        rows.append(ConvergenceRow(R=result["R"], h=result["h"], eigenpairs=pairs,
                                   window=SpectralWindow(*result["window"])))
    return rows
