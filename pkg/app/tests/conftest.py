"""Shared operators and perturbations for the test suite"""
import numpy as np
import pytest
from scipy.optimize import brentq

from app.schemas.band_edges import EdgeSide
from app.schemas.coefficients import CoefficientsSpec, SegmentKind, SegmentSpec
from app.services.bands.band_service import BandService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.perturbation.profiles import Profile
from app.services.perturbation.variants import (
    DifferentialPerturbation,
    RankOneKernelPerturbation,
    SupportInterval,
)


@pytest.fixture(scope="session")
def free_coeffs() -> OperatorCoefficients:
    """p = 1, q = 0: D(lam) = 2 cos sqrt(lam)"""
    return OperatorCoefficients.constant(0.0)


@pytest.fixture(scope="session")
def mathieu_coeffs() -> OperatorCoefficients:
    """q = 2 cos(2 pi x)"""
    spec = CoefficientsSpec(q=[SegmentSpec(kind=SegmentKind.TRIG, cos=[2.0])])
    return OperatorCoefficients.from_spec(spec)


@pytest.fixture(scope="session")
def free_scan(free_coeffs):
    return BandService.find_band_edges(free_coeffs, 1.0)


@pytest.fixture(scope="session")
def mathieu_scan(mathieu_coeffs):
    return BandService.find_band_edges(mathieu_coeffs, 25.0)


@pytest.fixture(scope="session")
def bottom_edge(free_scan):
    return free_scan.edge(0, EdgeSide.PLUS)


@pytest.fixture(scope="session")
def unit_support() -> SupportInterval:
    return SupportInterval(-1.0, 1.0)


@pytest.fixture(scope="session")
def square_well(unit_support) -> DifferentialPerturbation:
    """L u = 1_[-1, 1] u"""
    return DifferentialPerturbation(unit_support, b0=Profile.indicator(-1.0, 1.0))


@pytest.fixture(scope="session")
def repulsive_rank_one(unit_support) -> RankOneKernelPerturbation:
    return RankOneKernelPerturbation(unit_support, -1.0, Profile.indicator(-1.0, 1.0))


@pytest.fixture(scope="session")
def square_well_k():
    return _square_well_k


def _square_well_k(epsilon: float) -> float:
    """Root of q tan q = k with q^2 = eps - k^2 (even bound state of the square well)"""
    def mismatch(k):
        q = np.sqrt(epsilon - k * k)
        return q * np.tan(q) - k

    return brentq(mismatch, 1e-12, np.sqrt(epsilon) * (1.0 - 1e-12))
