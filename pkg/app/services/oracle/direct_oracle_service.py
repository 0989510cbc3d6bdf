# app/services/oracle/direct_oracle_service.py
"""Finite-difference ground truth for H0 - eps L on a Dirichlet box [-R, R]"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from app.config.settings import get_settings
from app.core.exceptions import ConfigError, GridTooCoarse, WindowTouchesBand
from app.schemas.reports import ComplexDTO, ConvergenceRowDTO, ConvergenceStudyDTO, OracleEigenvalueDTO
from app.services.ode.coefficients import OperatorCoefficients
from app.services.perturbation.variants import LocalizedPerturbation

logger = logging.getLogger(__name__)

_GL4_NODES, _GL4_WEIGHTS = np.polynomial.legendre.leggauss(4)
INVERSE_ITERATIONS = 3
INTERIOR_MASS = 0.5


# ============================================================================
# Data types
# ============================================================================

@dataclass(frozen=True)
class SpectralWindow:
    """Rectangle lo <= Re z <= hi, |Im z - im_center| <= half_height"""
    lo: float
    hi: float
    half_height: float = 1.0
    im_center: float = 0.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"empty spectral window [{self.lo}, {self.hi}]")

    @property
    def center(self) -> complex:
        if self.im_center == 0.0:
            return 0.5 * (self.lo + self.hi)
        return complex(0.5 * (self.lo + self.hi), self.im_center)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (z.real >= self.lo) & (z.real <= self.hi) & (np.abs(z.imag - self.im_center) <= self.half_height)


@dataclass(frozen=True)
class DiscreteBands:
    bands: List[Tuple[float, float]]
    margin: float


@dataclass(frozen=True)
class TruncatedProblem:
    R: float
    h: float
    x: np.ndarray
    base: sparse.csr_matrix  # H0 stencil
    perturbation: sparse.csr_matrix  # L stencil
    epsilon: float
    support: Tuple[float, float]

    @property
    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.base - self.epsilon * self.perturbation)

    @property
    def size(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class OracleEigenpair:
    value: complex
    vector: np.ndarray
    residual: float
    tail_mass: float
    separation: float

    def to_dto(self, problem: TruncatedProblem) -> OracleEigenvalueDTO:
        return OracleEigenvalueDTO(
            R=problem.R, h=problem.h, value=ComplexDTO.of(self.value), residual=self.residual,
            tail_mass=self.tail_mass, separation=self.separation,
        )


@dataclass(frozen=True)
class ConvergenceRow:
    R: float
    h: float
    eigenpairs: List[OracleEigenpair]
    window: SpectralWindow

    @property
    def value(self) -> Optional[complex]:
        """Eigenvalue nearest the window center"""
        if not self.eigenpairs:
            return None
        return min(self.eigenpairs, key=lambda e: abs(e.value - self.window.center)).value

    def to_dto(self) -> ConvergenceRowDTO:
        best = None
        if self.eigenpairs:
            best = min(self.eigenpairs, key=lambda e: abs(e.value - self.window.center))
        return ConvergenceRowDTO(
            R=self.R, h=self.h, value=ComplexDTO.of(best.value) if best else None,
            residual=best.residual if best else None, count=len(self.eigenpairs),
        )


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: List[ConvergenceRow]
    extrapolated: Optional[complex] = None
    observed_order: Optional[float] = None
    error_bar: Optional[float] = None
    extrapolated_by_R: Dict[float, complex] = field(default_factory=dict)

    def to_dto(self) -> ConvergenceStudyDTO:
        return ConvergenceStudyDTO(
            rows=[row.to_dto() for row in self.rows],
            extrapolated=ComplexDTO.of(self.extrapolated),
            observed_order=self.observed_order,
            error_bar=self.error_bar,
        )


@dataclass(frozen=True)
class TwoGridEigenvalue:
    coarse: OracleEigenpair
    fine: OracleEigenpair
    extrapolated: complex


# ============================================================================
# Helpers
# ============================================================================

def _cell_average(fn, x: np.ndarray, h: float) -> np.ndarray:
    """Mean of fn over [x - h/2, x + h/2] with a 4-point Gauss rule"""
    total = np.zeros(x.shape, dtype=complex)
    for node, weight in zip(_GL4_NODES, _GL4_WEIGHTS):
        total += 0.5 * weight * fn(x + 0.5 * h * node)
    return total


def _flux_stencil(coeffs: OperatorCoefficients, x: np.ndarray, h: float, wrap: Optional[int] = None):
    """-(p u')' + q u with p at midpoints; wrap = +-1 closes the cell (quasi-)periodically"""
    n = x.size
    p_half = coeffs.p(x + 0.5 * h)
    p_left = coeffs.p(x - 0.5 * h)
    q_avg = _cell_average(coeffs.q, x, h).real
    main = (p_half + p_left) / h ** 2 + q_avg
    off = -p_half[:-1] / h ** 2
    if wrap is None:
        return sparse.diags([off, main, off], [-1, 0, 1], format="csr")
    dense = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    dense[0, -1] += wrap * (-p_left[0] / h ** 2)
    dense[-1, 0] += wrap * (-p_half[-1] / h ** 2)
    return dense


def snap_half_width(R: float, h: float) -> float:
    """Smallest multiple of h not below R, so 2R/h stays an integer under halving"""
    return h * math.ceil(R / h - 1e-9)


class DirectOracleService:

    @staticmethod
    def default_half_width(lambda_predicted: complex, mu: float, x1: float) -> float:
        """30 / sqrt|lambda - mu| clamped to [x1 + 10, 2000]"""
        distance = abs(complex(lambda_predicted) - mu)
        R = 30.0 / math.sqrt(distance) if distance > 0.0 else 2000.0
        return float(min(max(R, x1 + 10.0), 2000.0))

    @staticmethod
    def assemble(coeffs: OperatorCoefficients, pert: LocalizedPerturbation, epsilon: float,
                 R: float, h: float) -> TruncatedProblem:
        settings = get_settings()
        if R <= 0.0 or h <= 0.0:
            raise ConfigError(f"R={R} and h={h} must be positive")
        if R <= pert.support.x1 or -R >= pert.support.x0:
            raise ConfigError(f"box [-{R}, {R}] must contain [{pert.support.x0}, {pert.support.x1}]")
        scale = min(1.0, pert.length_scale())
        if scale / h < settings.ORACLE_POINTS_PER_SCALE:
            raise GridTooCoarse(
                f"h={h} gives {scale / h:.1f} points on the scale {scale:.4g} "
                f"(need {settings.ORACLE_POINTS_PER_SCALE})",
                {"h": h},
            )
        n = int(round(2.0 * R / h)) - 1
        step = 2.0 * R / (n + 1)
        x = -R + step * np.arange(1, n + 1)
        base = _flux_stencil(coeffs, x, step)
        perturbation = pert.fd_matrix(x, step)
        logger.debug(f"Assembled FD oracle: R={R}, h={step:.6g}, N={n}, nnz(L)={perturbation.nnz}")
        return TruncatedProblem(
            R=float(R), h=float(step), x=x, base=sparse.csr_matrix(base, dtype=complex),
            perturbation=sparse.csr_matrix(perturbation, dtype=complex), epsilon=float(epsilon),
            support=(pert.support.q_lo, pert.support.q_hi),
        )

    @staticmethod
    def discrete_bands(coeffs: OperatorCoefficients, h: float, lambda_max: float) -> DiscreteBands:
        """Discrete bands at h; the margin is ten times the edge shift estimated from h/2"""
        bands = DirectOracleService.discrete_band_edges(coeffs, h, lambda_max)
        finer = DirectOracleService.discrete_band_edges(coeffs, 0.5 * h, lambda_max)
        shift = 0.0
        for (lo, hi), (lo2, hi2) in zip(bands, finer):
            shift = max(shift, abs(lo - lo2), abs(hi - hi2))
        return DiscreteBands(bands, 10.0 * shift * 4.0 / 3.0)

    @staticmethod
    def discrete_band_edges(coeffs: OperatorCoefficients, h: float, lambda_max: float) -> List[Tuple[float, float]]:
        """Bands of the FD operator from its periodic and antiperiodic cell problems"""
        m = max(int(round(1.0 / h)), 4)
        step = 1.0 / m
        x = step * np.arange(m)
        periodic = scipy.linalg.eigvalsh(_flux_stencil(coeffs, x, step, wrap=1).real)
        antiperiodic = scipy.linalg.eigvalsh(_flux_stencil(coeffs, x, step, wrap=-1).real)

        bands = []
        for j in range(m):
            if j % 2 == 0:
                lo, hi = periodic[j], antiperiodic[j]
            else:
                lo, hi = antiperiodic[j], periodic[j]
            if lo > lambda_max:
                break
            bands.append((float(min(lo, hi)), float(max(lo, hi))))
        return bands

    @staticmethod
    def check_window(window: SpectralWindow, bands: DiscreteBands) -> None:
        margin = bands.margin
        for lo, hi in bands.bands:
            if window.lo - margin <= hi and lo <= window.hi + margin:
                raise WindowTouchesBand(
                    f"window [{window.lo:.6g}, {window.hi:.6g}] touches the discrete band [{lo:.6g}, {hi:.6g}]",
                    {"margin": margin},
                )

    # ==========================================
    # Eigenvalues
    # ==========================================

    @staticmethod
    def _refine(matrix: sparse.csr_matrix, value: complex, vector: np.ndarray) -> Tuple[complex, np.ndarray, float]:
        """Shifted inverse iteration with a Rayleigh quotient update"""
        n = matrix.shape[0]
        shift = value + 1e-10 * (1.0 + abs(value))
        try:
            lu = sparse_linalg.splu(sparse.csc_matrix(matrix - shift * sparse.identity(n, format="csc")))
        except RuntimeError:
            lu = None
        v = vector / np.linalg.norm(vector)
        lam = value
        if lu is not None:
            for _ in range(INVERSE_ITERATIONS):
                w = lu.solve(v)
                v = w / np.linalg.norm(w)
                lam = complex(np.vdot(v, matrix @ v))
        residual = float(np.linalg.norm(matrix @ v - lam * v))
        return lam, v, residual

    @staticmethod
    def gap_eigenvalues(
            problem: TruncatedProblem,
            window: SpectralWindow,
            bands: Optional[DiscreteBands] = None,
            method: str = "auto",
            interior_only: bool = True,
    ) -> List[OracleEigenpair]:
        """Eigenpairs inside the window, refined, with tail mass outside Q and separation"""
        settings = get_settings()
        if bands is not None:
            DirectOracleService.check_window(window, bands)
        matrix = problem.matrix
        n = problem.size
        if method == "auto":
            method = "dense" if n <= settings.ORACLE_DENSE_MAX else "shift_invert"

        if method == "dense":
            values, vectors = scipy.linalg.eig(matrix.toarray())
        else:
            count = min(settings.ORACLE_EIGS_COUNT, n - 2)
            values, vectors = sparse_linalg.eigs(matrix, k=count, sigma=window.center, which="LM")
        logger.info(f"Oracle eigensolve ({method}, N={n}, R={problem.R}, h={problem.h:.6g}) "
                    f"in window [{window.lo:.6g}, {window.hi:.6g}]")

        inside_q = (problem.x >= problem.support[0]) & (problem.x <= problem.support[1])
        interior = np.abs(problem.x) <= 0.5 * problem.R
        found = []
        for index in np.nonzero(window.contains(values))[0]:
            lam, v, residual = DirectOracleService._refine(matrix, complex(values[index]), vectors[:, index])
            mass = np.abs(v) ** 2
            total = float(np.sum(mass))
            if interior_only and np.sum(mass[interior]) < INTERIOR_MASS * total:
                logger.debug(f"Discarding boundary state at {lam:.8g}")
                continue
            others = np.delete(values, index)
            separation = float(np.min(np.abs(others - lam))) if others.size else float("inf")
            if residual > settings.ORACLE_RESIDUAL_TOL * max(1.0, abs(lam)):
                logger.warning(f"Oracle residual {residual:.3e} at {lam:.10g} above tolerance")
            found.append(OracleEigenpair(
                value=lam,
                vector=v,
                residual=residual,
                tail_mass=float(np.sum(mass[~inside_q]) / total),
                separation=separation,
            ))
        found.sort(key=lambda e: (e.value.real, e.value.imag))
        return found

    # ==========================================
    # Convergence study
    # ==========================================

    @staticmethod
    def study_grid(R0: float, h0: float, refinements: int = 3) -> List[Tuple[float, float]]:
        """(R, h) pairs over R in {R0, 1.5 R0, 2 R0} and h in {h0, h0/2, h0/4, ...}"""
        pairs = []
        for factor in (1.0, 1.5, 2.0):
            R = snap_half_width(factor * R0, h0)
            for level in range(refinements):
                pairs.append((R, h0 / 2 ** level))
        return pairs

    @staticmethod
    def run_single(coeffs, pert, epsilon: float, window: SpectralWindow, R: float, h: float,
                   bands=None) -> ConvergenceRow:
        problem = DirectOracleService.assemble(coeffs, pert, epsilon, R, h)
        pairs = DirectOracleService.gap_eigenvalues(problem, window, bands)
        return ConvergenceRow(R=problem.R, h=h, eigenpairs=pairs, window=window)

    @staticmethod
    def summarize(rows: Sequence[ConvergenceRow]) -> ConvergenceStudy:
        """Richardson extrapolation in h per R, observed order and an error bar"""
        by_R: Dict[float, Dict[float, complex]] = {}
        for row in rows:
            if row.value is not None:
                by_R.setdefault(row.R, {})[row.h] = row.value

        extrapolated: Dict[float, complex] = {}
        orders: Dict[float, float] = {}
        tails: Dict[float, float] = {}
        for R, values in by_R.items():
            hs = sorted(values, reverse=True)
            if len(hs) < 3:
                continue
            coarse, mid, fine = (values[h] for h in hs[-3:])
            extrapolated[R] = (4.0 * fine - mid) / 3.0
            tails[R] = abs(mid - fine) / 12.0
            if abs(mid - fine) > 0.0 and abs(coarse - mid) > 0.0:
                orders[R] = math.log2(abs(coarse - mid) / abs(mid - fine))

        if not extrapolated:
            return ConvergenceStudy(list(rows))
        ordered = sorted(extrapolated)
        largest = ordered[-1]
        bar = tails[largest]
        if len(ordered) > 1:
            bar += abs(extrapolated[largest] - extrapolated[ordered[-2]])
        logger.info(f"Oracle extrapolation: {extrapolated[largest]:.12g} +- {bar:.3e} "
                    f"(order {orders.get(largest, float('nan')):.3f})")
        return ConvergenceStudy(
            rows=list(rows),
            extrapolated=complex(extrapolated[largest]),
            observed_order=orders.get(largest),
            error_bar=float(bar),
            extrapolated_by_R=extrapolated,
        )

    @staticmethod
    def convergence_study(coeffs, pert, epsilon: float, window: SpectralWindow, R0: float, h0: float,
                          refinements: int = 3, bands=None) -> ConvergenceStudy:
        rows = [
            DirectOracleService.run_single(coeffs, pert, epsilon, window, R, h, bands)
            for R, h in DirectOracleService.study_grid(R0, h0, refinements)
        ]
        return DirectOracleService.summarize(rows)

    @staticmethod
    def two_grid_eigenvalue(coeffs, pert, epsilon: float, window: SpectralWindow, R: float, h: float,
                            interior_only: bool = True) -> Optional[TwoGridEigenvalue]:
        """Best-localized eigenpair at h and h/2 and their h^2 extrapolation"""
        best = []
        for step in (h, 0.5 * h):
            problem = DirectOracleService.assemble(coeffs, pert, epsilon, snap_half_width(R, h), step)
            pairs = DirectOracleService.gap_eigenvalues(problem, window, method="shift_invert",
                                                        interior_only=interior_only)
            if not pairs:
                logger.warning(f"No oracle eigenvalue in [{window.lo:.6g}, {window.hi:.6g}] at h={step:.6g}")
                return None
            best.append(min(pairs, key=lambda p: p.tail_mass))
        coarse, fine = best
        extrapolated = (4.0 * fine.value - coarse.value) / 3.0
        logger.info(f"Two-grid oracle: {coarse.value:.10g} -> {fine.value:.10g}, extrapolated {extrapolated:.10g}")
        return TwoGridEigenvalue(coarse=coarse, fine=fine, extrapolated=complex(extrapolated))
