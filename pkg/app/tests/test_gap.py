"""
Gap eigenvalue asymptotics at the bottom of the free spectrum
"""
from dataclasses import replace

import numpy as np
import pytest

from app.core.exceptions import DegenerateEdge, NoConvergence, NonDecaying
from app.schemas.band_edges import EdgeSide
from app.schemas.perturbation import FunctionalTermKind, NoEmbeddedVerdict
from app.schemas.reports import ExistenceVerdict
from app.services.bands.band_service import BandService
from app.services.gap.gap_asymptotics_service import GapAsymptoticsService
from app.services.perturbation.profiles import FunctionalTerm, LinearFunctional, Profile
from app.services.perturbation.variants import (
    DifferentialPerturbation,
    FunctionalRankOnePerturbation,
    RankOneKernelPerturbation,
    SupportInterval,
    ZeroPerturbation,
)


@pytest.fixture(scope="module")
def well_problem(free_coeffs, bottom_edge, square_well):
    return GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, square_well)


class TestCoefficients:
    """Square well: k1 = (1, 1) / 2 = 1 and k2 = -1/4 int int |x - t| = -2/3"""

    def test_k1_k2(self, well_problem):
        coefficients = GapAsymptoticsService.k_coefficients(well_problem, 0.1)
        assert coefficients.k1 == pytest.approx(1.0, rel=1e-9)
        assert coefficients.k2 == pytest.approx(-2.0 / 3.0, rel=1e-9)
        assert coefficients.k_approx == pytest.approx(0.1 * (1.0 - 0.1 * 2.0 / 3.0), rel=1e-9)

    def test_sign_verdict(self, well_problem):
        coefficients = GapAsymptoticsService.k_coefficients(well_problem, 0.1)
        assert GapAsymptoticsService.sign_verdict(coefficients) == ExistenceVerdict.YES


class TestExistence:

    def test_attractive_well(self, well_problem):
        verdict, value = GapAsymptoticsService.existence_criterion(well_problem, 0.1)
        assert verdict == ExistenceVerdict.YES
        assert value.real > 0.0

    def test_repulsive_rank_one(self, free_coeffs, bottom_edge, repulsive_rank_one):
        problem = GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, repulsive_rank_one)
        report = GapAsymptoticsService.eigenvalue_asymptotics(problem, 0.1)
        assert report.exists == ExistenceVerdict.NO
        assert report.k_exact is None
        assert report.eigenfunction is None

    @pytest.mark.parametrize("beta,expected", [
        (np.exp(0.25j * np.pi), ExistenceVerdict.YES),
        (np.exp(0.75j * np.pi), ExistenceVerdict.NO),
    ])
    def test_complex_rank_one_follows_re_beta(self, free_coeffs, bottom_edge, unit_support, beta, expected):
        pert = RankOneKernelPerturbation(unit_support, beta, Profile.indicator(-1.0, 1.0))
        problem = GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, pert)
        verdict, value = GapAsymptoticsService.existence_criterion(problem, 0.05)
        assert verdict == expected
        assert np.sign(value.real) == np.sign(beta.real)

    def test_zero_perturbation(self, free_coeffs, bottom_edge, unit_support):
        problem = GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, ZeroPerturbation(unit_support))
        report = GapAsymptoticsService.eigenvalue_asymptotics(problem, 0.1)
        assert report.exists == ExistenceVerdict.INDETERMINATE
        assert report.lambda_order2 == pytest.approx(bottom_edge.mu)
        assert report.notes

    def test_degenerate_edge(self, free_coeffs, square_well):
        scan = BandService.find_band_edges(free_coeffs, 12.0)
        with pytest.raises(DegenerateEdge):
            GapAsymptoticsService.edge_problem(free_coeffs, scan.edge(1, EdgeSide.PLUS), square_well)


class TestInteriorEdges:
    """q = 2 cos(2 pi x), L = b0 on [-1, 1]: the eigenvalue sits at the edge selected by the sign of b0"""

    @pytest.fixture(scope="class")
    def reports(self, mathieu_coeffs, mathieu_scan, unit_support):
        out = {}
        for scale in (1.0, -1.0):
            pert = DifferentialPerturbation(unit_support, b0=Profile.indicator(-1.0, 1.0, scale=scale))
            for side in (EdgeSide.MINUS, EdgeSide.PLUS):
                edge = mathieu_scan.edge(1, side)
                problem = GapAsymptoticsService.edge_problem(mathieu_coeffs, edge, pert,
                                                             lacuna_width=mathieu_scan.lacuna_width(edge))
                out[scale, side] = GapAsymptoticsService.eigenvalue_asymptotics(problem, 0.1)
        return out

    def test_nonnegative_b0_selects_right_edge(self, mathieu_scan, reports):
        lacuna = mathieu_scan.lacunas[1]
        assert reports[1.0, EdgeSide.MINUS].exists == ExistenceVerdict.NO
        assert reports[1.0, EdgeSide.MINUS].lambda_exact is None
        plus = reports[1.0, EdgeSide.PLUS]
        assert plus.exists == ExistenceVerdict.YES
        assert plus.lambda_exact.real == pytest.approx(10.856297, abs=1e-5)
        assert lacuna.left < plus.lambda_exact.real < lacuna.right
        mu = mathieu_scan.edge(1, EdgeSide.PLUS).mu
        assert abs(plus.lambda_order2 - plus.lambda_exact) < 0.1 * abs(plus.lambda_exact - mu)

    def test_flipped_b0_selects_left_edge(self, mathieu_scan, reports):
        lacuna = mathieu_scan.lacunas[1]
        assert reports[-1.0, EdgeSide.PLUS].exists == ExistenceVerdict.NO
        minus = reports[-1.0, EdgeSide.MINUS]
        assert minus.exists == ExistenceVerdict.YES
        assert lacuna.left < minus.lambda_exact.real < lacuna.right
        assert abs(minus.lambda_exact.imag) < 1e-10


class TestExactK:

    @pytest.mark.parametrize("epsilon", [0.2, 0.1, 0.05])
    def test_matches_square_well(self, well_problem, square_well_k, epsilon):
        solution = GapAsymptoticsService.solve_k_equation(well_problem, epsilon)
        assert solution.k.real == pytest.approx(square_well_k(epsilon), abs=1e-9)
        assert abs(solution.k.imag) < 1e-12

    @pytest.mark.parametrize("epsilon", [0.2, 0.1])
    def test_expansions_are_third_order(self, well_problem, square_well_k, epsilon):
        report = GapAsymptoticsService.eigenvalue_asymptotics(well_problem, epsilon)
        exact = -square_well_k(epsilon) ** 2
        assert report.exists == ExistenceVerdict.YES
        assert report.lambda_exact == pytest.approx(exact, abs=1e-9)
        assert abs(report.lambda_order2 - exact) < epsilon ** 3
        assert abs(report.lambda_from_resolvent - exact) < epsilon ** 3
        assert abs(report.lambda_order1 - exact) < 2.0 * epsilon ** 3

    def test_leaves_lacuna(self, well_problem):
        narrow = replace(well_problem, lacuna_width=1e-6)
        with pytest.raises(NoConvergence):
            GapAsymptoticsService.solve_k_equation(narrow, 0.1)


class TestEigenfunction:

    def test_profile(self, well_problem, square_well_k):
        epsilon = 0.1
        k = square_well_k(epsilon)
        report = GapAsymptoticsService.eigenvalue_asymptotics(well_problem, epsilon, window=(-3.0, 3.0),
                                                              window_points=121)
        profile = report.eigenfunction
        assert profile.points.size == 121
        assert profile.decay_rate == pytest.approx(k, rel=1e-8)
        assert profile.fitted_decay_right == pytest.approx(k, rel=1e-6)
        assert profile.fitted_decay_left == pytest.approx(k, rel=1e-6)
        assert profile.equation_residual < 1e-6
        # even state, exp(-k|x|) outside the well
        np.testing.assert_allclose(profile.psi.values, profile.psi.values[::-1], rtol=1e-8)
        outside = profile.points >= 1.0
        ratio = profile.psi.values[outside] / np.exp(-k * profile.points[outside])
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-7)

    def test_decay_fit_off_origin_support(self, free_coeffs, bottom_edge, square_well_k):
        shifted = DifferentialPerturbation(SupportInterval(5.0, 7.0), b0=Profile.indicator(5.0, 7.0))
        problem = GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, shifted)
        report = GapAsymptoticsService.eigenvalue_asymptotics(problem, 0.1, window=(2.0, 10.0), window_points=81)
        k = square_well_k(0.1)
        assert report.k_exact.real == pytest.approx(k, abs=1e-9)
        assert report.eigenfunction.fitted_decay_right == pytest.approx(k, rel=1e-6)
        assert report.eigenfunction.fitted_decay_left == pytest.approx(k, rel=1e-6)

    def test_first_order_difference_shrinks(self, well_problem):
        differences = []
        for epsilon in (0.1, 0.05):
            report = GapAsymptoticsService.eigenvalue_asymptotics(well_problem, epsilon)
            differences.append(report.eigenfunction.first_order_difference)
        assert differences[1] < 0.5 * differences[0]

    def test_growing_k_is_rejected(self, well_problem):
        with pytest.raises(NonDecaying):
            GapAsymptoticsService.eigenfunction_profile(well_problem, 0.1, -0.1, (-2.0, 2.0))

    def test_report_dto(self, well_problem, square_well):
        report = GapAsymptoticsService.eigenvalue_asymptotics(well_problem, 0.1, sign_test=True)
        dto = report.to_dto(square_well)
        assert dto.exists == ExistenceVerdict.YES
        assert dto.sign_verdict == ExistenceVerdict.YES
        assert dto.no_embedded == NoEmbeddedVerdict.GUARANTEED_NONE
        assert dto.k_iterations >= 1
        assert dto.lambda_exact.re == pytest.approx(report.lambda_exact.real)


class TestResolventSolve:
    """g solves (I - eps L G0) g = L phi to 1e-10 relative on both solve paths"""

    @pytest.mark.parametrize("epsilon", [0.1, 3.0])
    def test_residual(self, well_problem, epsilon):
        g = GapAsymptoticsService.resolvent_correction(well_problem, epsilon)
        rhs = well_problem.l_phi
        residual = well_problem.grid.norm(g - epsilon * (well_problem.l_green0 @ g) - rhs)
        assert residual <= 1e-10 * well_problem.grid.norm(rhs)


class TestFunctionalRankOne:

    @pytest.fixture(scope="class")
    def point_problem(self, free_coeffs, bottom_edge, unit_support):
        functional = LinearFunctional([FunctionalTerm(FunctionalTermKind.VALUE, 1.0, at=0.0)])
        pert = FunctionalRankOnePerturbation(unit_support, Profile.indicator(-1.0, 1.0), functional)
        return GapAsymptoticsService.edge_problem(free_coeffs, bottom_edge, pert)

    def test_closed_form_matches_resolvent(self, point_problem):
        epsilon = 0.1
        closed = GapAsymptoticsService.functional_rank_one_closed_form(point_problem, epsilon)
        g = GapAsymptoticsService.resolvent_correction(point_problem, epsilon)
        np.testing.assert_allclose(closed.a_l_phi, g, atol=1e-10)
        lam = GapAsymptoticsService.lambda_from_resolvent(point_problem, epsilon, g)
        assert closed.lambda_closed == pytest.approx(lam, rel=1e-10)
        # l(G0 b) = -1/2 int |t| dt = -1/2
        assert closed.denominator == pytest.approx(1.0 + 0.5 * epsilon, rel=1e-9)

    def test_needs_functional_rank_one(self, well_problem):
        with pytest.raises(TypeError):
            GapAsymptoticsService.functional_rank_one_closed_form(well_problem, 0.1)
