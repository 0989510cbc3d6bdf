"""
Fundamental system, monodromy data and the Cauchy operator
"""
import numpy as np
import pytest

from app.core.exceptions import CoefficientError, NonPositiveP
from app.schemas.coefficients import CoefficientsSpec, SegmentKind, SegmentSpec
from app.services.bands.band_service import BandService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.ode.fundamental_service import FundamentalService, propagate
from app.services.quadrature.quadrature_grid import QuadratureGrid


# ============================================================================
# Coefficient validation
# ============================================================================

class TestCoefficients:
    """p(0) = 1, p > 0 and continuity are enforced when coefficients are built"""

    def test_p_normalization(self):
        spec = CoefficientsSpec(p=[SegmentSpec(kind=SegmentKind.CONSTANT, value=2.0)])
        with pytest.raises(CoefficientError):
            OperatorCoefficients.from_spec(spec)

    def test_p_must_stay_positive(self):
        spec = CoefficientsSpec(p=[SegmentSpec(kind=SegmentKind.TRIG, a0=1.0, cos=[0.0], sin=[3.0])])
        with pytest.raises(NonPositiveP):
            OperatorCoefficients.from_spec(spec)

    def test_piecewise_q_bounds(self):
        spec = CoefficientsSpec(q=[
            SegmentSpec(start=0.0, end=0.5, kind=SegmentKind.CONSTANT, value=-1.0),
            SegmentSpec(start=0.5, end=1.0, kind=SegmentKind.CONSTANT, value=3.0),
        ])
        coeffs = OperatorCoefficients.from_spec(spec)
        assert coeffs.q_min == pytest.approx(-1.0)
        assert coeffs.q_max == pytest.approx(3.0)
        assert 0.5 in coeffs.breakpoints


# ============================================================================
# Fundamental solutions
# ============================================================================

class TestFundamentalSystem:

    @pytest.mark.parametrize("lam", [4.0, -1.0, 4.0 + 1.0j])
    def test_free_solutions(self, free_coeffs, lam):
        x = np.linspace(-2.0, 2.0, 41)
        pair = FundamentalService.integrate_fundamental(free_coeffs, lam, -2.0, 2.0, points=x)
        s = np.sqrt(complex(lam))
        np.testing.assert_allclose(pair.theta1, np.cos(s * x), atol=1e-7)
        np.testing.assert_allclose(pair.theta2, np.sin(s * x) / s, atol=1e-7)
        assert pair.wronskian_residual() < 1e-8

    def test_free_discriminant(self, free_coeffs):
        for lam in (0.5, 9.0, -4.0):
            expected = 2.0 * np.cos(np.sqrt(complex(lam)))
            assert BandService.discriminant(free_coeffs, lam) == pytest.approx(expected, abs=1e-8)

    def test_monodromy_determinant(self, mathieu_coeffs):
        mono = FundamentalService.monodromy(mathieu_coeffs, 3.7)
        assert abs(mono.determinant - 1.0) < 1e-8

    def test_monodromy_batch_matches_single(self, mathieu_coeffs):
        lams = [1.0, 2.5 + 0.5j, 7.0]
        batch = FundamentalService.monodromy_batch(mathieu_coeffs, lams)
        for lam, data in zip(lams, batch):
            single = FundamentalService.monodromy(mathieu_coeffs, lam)
            assert data.discriminant == pytest.approx(single.discriminant, abs=1e-8)

    def test_translation_identity(self, mathieu_coeffs):
        points = np.linspace(-1.5, 0.75, 10)
        assert BandService.translation_residual(mathieu_coeffs, 5.0, points) < 1e-8

    def test_invalid_interval(self, free_coeffs):
        with pytest.raises(ValueError):
            FundamentalService.integrate_fundamental(free_coeffs, 1.0, 1.0, 0.0)


class TestCauchyOperator:
    """v(x) = int_alpha^x (theta1(x) theta2(t) - theta1(t) theta2(x)) f(t) dt"""

    def test_constant_source_at_zero(self, free_coeffs):
        grid = QuadratureGrid.build(-1.0, 1.0)
        f = np.ones(grid.size)
        v = FundamentalService.cauchy_apply(free_coeffs, 0.0, 0.0, grid, f)
        np.testing.assert_allclose(v.values, -0.5 * grid.nodes ** 2, atol=1e-9)
        np.testing.assert_allclose(v.first, -grid.nodes, atol=1e-9)
        np.testing.assert_allclose(v.second, -np.ones(grid.size), atol=1e-9)

    def test_vanishes_at_alpha(self, mathieu_coeffs):
        grid = QuadratureGrid.build(0.0, 2.0)
        f = np.sin(3.0 * grid.nodes)
        v = FundamentalService.cauchy_apply(mathieu_coeffs, 1.5, 0.5, grid, f, targets=np.array([0.5]))
        assert abs(v.values[0]) < 1e-10
        assert abs(v.first[0]) < 1e-10


# ============================================================================
# Random piecewise coefficients
# ============================================================================

def _random_coefficients(rng: np.random.Generator) -> OperatorCoefficients:
    """Smooth positive p with p(0) = 1 and a three-piece constant q"""
    c, s = rng.uniform(0.0, 0.2), rng.uniform(-0.4, 0.4)
    p = [SegmentSpec(kind=SegmentKind.TRIG, a0=1.0 - c, cos=[0.0, c], sin=[s])]
    cuts = [0.0, float(rng.uniform(0.1, 0.45)), float(rng.uniform(0.55, 0.9)), 1.0]
    q = [
        SegmentSpec(start=a, end=b, kind=SegmentKind.CONSTANT, value=float(rng.uniform(-2.0, 2.0)))
        for a, b in zip(cuts[:-1], cuts[1:])
    ]
    return OperatorCoefficients.from_spec(CoefficientsSpec(p=p, q=q))


@pytest.fixture(scope="module")
def random_cases():
    rng = np.random.default_rng(20240611)
    cases = []
    for _ in range(20):
        coeffs = _random_coefficients(rng)
        lams = rng.uniform(0.0, 40.0, 10) + 1j * rng.uniform(-4.0, 4.0, 10)
        cases.append((coeffs, lams))
    return cases


class TestRandomCoefficients:
    """p W = 1 and holomorphy in lam for random piecewise coefficient sets"""

    points = np.linspace(-1.0, 1.0, 21)
    radius = 0.5
    circle = 16

    def _circle(self, center: complex) -> np.ndarray:
        return center + self.radius * np.exp(2j * np.pi * np.arange(self.circle) / self.circle)

    def test_wronskian(self, random_cases):
        for coeffs, lams in random_cases:
            state = propagate(coeffs, lams, self.points, tol=1e-13)
            pw = state[:, 0] * state[:, 3] - state[:, 1] * state[:, 2]
            assert np.max(np.abs(pw - 1.0)) <= 1e-9

    def test_wronskian_residual_of_pair(self, random_cases):
        coeffs, lams = random_cases[0]
        pair = FundamentalService.integrate_fundamental(coeffs, lams[0], -1.0, 1.0, tol=1e-12, points=self.points)
        assert pair.wronskian_residual() <= 1e-9
        assert pair.relative_wronskian_residual() <= pair.wronskian_residual()

    def test_cauchy_reconstruction_of_solutions(self, random_cases):
        for coeffs, lams in random_cases:
            ring = np.concatenate([self._circle(lam) for lam in lams])
            centre = propagate(coeffs, lams, self.points, tol=1e-10)
            around = propagate(coeffs, ring, self.points, tol=1e-10)
            around = around.reshape(self.points.size, 4, lams.size, self.circle)
            # mean over the circle is the value at its center
            np.testing.assert_allclose(around.mean(axis=-1), centre, rtol=0.0, atol=1e-6)

    def test_cauchy_reconstruction_of_cauchy_operator(self, random_cases):
        grid = QuadratureGrid.build(-1.0, 1.0)
        f = np.cos(3.0 * grid.nodes) + grid.nodes
        for coeffs, lams in random_cases[:5]:
            lam = lams[0]
            direct = FundamentalService.cauchy_apply(coeffs, lam, 0.0, grid, f)
            around = [FundamentalService.cauchy_apply(coeffs, z, 0.0, grid, f) for z in self._circle(lam)]
            values = np.mean([v.values for v in around], axis=0)
            first = np.mean([v.first for v in around], axis=0)
            np.testing.assert_allclose(values, direct.values, rtol=0.0, atol=1e-6)
            np.testing.assert_allclose(first, direct.first, rtol=0.0, atol=1e-6)
