"""
Finite-difference oracle on [-R, R] with Dirichlet ends
"""
from pathlib import Path

import numpy as np
import pytest

from app.config.problem_loader import load_problem
from app.core.exceptions import ConfigError, GridTooCoarse, WindowTouchesBand
from app.schemas.band_edges import EdgeSide
from app.schemas.reports import ExistenceVerdict
from app.services.bands.band_service import BandService
from app.services.gap.gap_asymptotics_service import GapAsymptoticsService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.oracle.direct_oracle_service import (
    ConvergenceRow,
    DirectOracleService,
    DiscreteBands,
    OracleEigenpair,
    SpectralWindow,
    snap_half_width,
)
from app.services.perturbation.perturbation_service import PerturbationService
from app.services.perturbation.profiles import Profile
from app.services.perturbation.variants import DifferentialPerturbation

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _row(R, h, value, window):
    pair = OracleEigenpair(value, np.empty(0), 0.0, 0.0, 1.0)
    return ConvergenceRow(R=R, h=h, eigenpairs=[pair], window=window)


class TestAssembly:

    def test_size_and_symmetry(self, free_coeffs, square_well):
        problem = DirectOracleService.assemble(free_coeffs, square_well, 0.1, 4.0, 1.0 / 32.0)
        assert problem.size == 255
        assert problem.x[0] == pytest.approx(-4.0 + 1.0 / 32.0)
        matrix = problem.matrix.toarray()
        np.testing.assert_allclose(matrix, matrix.T)
        assert matrix[127, 127] == pytest.approx(2.0 * 32.0 ** 2 - 0.1)

    def test_box_must_contain_support(self, free_coeffs, square_well):
        with pytest.raises(ConfigError):
            DirectOracleService.assemble(free_coeffs, square_well, 0.1, 2.0, 1.0 / 32.0)

    def test_step_must_resolve_perturbation(self, free_coeffs, square_well):
        with pytest.raises(GridTooCoarse):
            DirectOracleService.assemble(free_coeffs, square_well, 0.1, 4.0, 0.1)

    def test_snap(self):
        assert snap_half_width(10.01, 0.25) == pytest.approx(10.25)
        assert snap_half_width(10.0, 0.25) == pytest.approx(10.0)

    def test_default_half_width(self):
        assert DirectOracleService.default_half_width(-0.01, 0.0, 3.0) == pytest.approx(300.0)
        assert DirectOracleService.default_half_width(-100.0, 0.0, 3.0) == pytest.approx(13.0)
        assert DirectOracleService.default_half_width(0.0, 0.0, 3.0) == pytest.approx(2000.0)


class TestDiscreteBands:

    def test_free_bottom(self, free_coeffs):
        bands = DirectOracleService.discrete_band_edges(free_coeffs, 1.0 / 32.0, 20.0)
        assert bands[0][0] == pytest.approx(0.0, abs=1e-7)
        assert bands[0][1] == pytest.approx(np.pi ** 2, rel=1e-2)

    def test_mathieu_gap(self, mathieu_coeffs, mathieu_scan):
        bands = DirectOracleService.discrete_bands(mathieu_coeffs, 1.0 / 64.0, 25.0)
        assert bands.bands[0][0] == pytest.approx(mathieu_scan.edges[0].mu, abs=5e-3)
        assert bands.margin > 0.0

    def test_window_touching_band(self):
        bands = DiscreteBands([(0.0, 5.0)], 0.01)
        with pytest.raises(WindowTouchesBand):
            DirectOracleService.check_window(SpectralWindow(-1.0, -0.005), bands)
        DirectOracleService.check_window(SpectralWindow(-1.0, -0.05), bands)

    def test_empty_window(self):
        with pytest.raises(ConfigError):
            SpectralWindow(1.0, 1.0)

    def test_window_off_the_real_axis(self):
        window = SpectralWindow(-1.0, 1.0, 0.1, im_center=-0.5)
        assert window.center == pytest.approx(-0.5j)
        assert window.contains([0.2 - 0.45j, 0.2, 0.2 - 0.7j]).tolist() == [True, False, False]
        assert SpectralWindow(-1.0, 1.0).center == 0.0


class TestConvergenceStudy:

    def test_study_grid(self):
        pairs = DirectOracleService.study_grid(10.0, 0.1, refinements=3)
        assert len(pairs) == 9
        assert sorted({R for R, _ in pairs}) == pytest.approx([10.0, 15.0, 20.0])
        assert sorted({h for _, h in pairs}) == pytest.approx([0.025, 0.05, 0.1])

    def test_richardson_removes_h_squared(self):
        window = SpectralWindow(-2.0, 0.0)
        rows = [
            _row(R, h, -1.0 + 0.3 * h ** 2 + 1e-6 / R, window)
            for R in (10.0, 15.0, 20.0)
            for h in (0.1, 0.05, 0.025)
        ]
        study = DirectOracleService.summarize(rows)
        assert study.extrapolated == pytest.approx(-1.0 + 1e-6 / 20.0, abs=1e-12)
        assert study.observed_order == pytest.approx(2.0, rel=1e-9)
        assert study.error_bar == pytest.approx(1e-6 / 15.0 - 1e-6 / 20.0 + 0.3 * (0.05 ** 2 - 0.025 ** 2) / 12.0,
                                                rel=1e-6)

    def test_no_eigenvalues(self):
        window = SpectralWindow(-2.0, 0.0)
        rows = [ConvergenceRow(R=10.0, h=h, eigenpairs=[], window=window) for h in (0.1, 0.05, 0.025)]
        study = DirectOracleService.summarize(rows)
        assert study.extrapolated is None
        assert study.error_bar is None


@pytest.mark.slow
class TestGapEigenvalues:

    def test_square_well_bound_state(self, free_coeffs, square_well, square_well_k):
        epsilon = 0.2
        problem = DirectOracleService.assemble(free_coeffs, square_well, epsilon, 40.0, 1.0 / 32.0)
        pairs = DirectOracleService.gap_eigenvalues(problem, SpectralWindow(-1.0, -0.005), method="dense")
        assert len(pairs) == 1
        assert pairs[0].value.real == pytest.approx(-square_well_k(epsilon) ** 2, abs=5e-4)
        assert pairs[0].residual < 1e-8
        assert 0.0 < pairs[0].tail_mass < 1.0

    def test_shift_invert_agrees_with_dense(self, free_coeffs, square_well):
        problem = DirectOracleService.assemble(free_coeffs, square_well, 0.2, 40.0, 1.0 / 32.0)
        window = SpectralWindow(-1.0, -0.005)
        dense = DirectOracleService.gap_eigenvalues(problem, window, method="dense")
        sparse = DirectOracleService.gap_eigenvalues(problem, window, method="shift_invert")
        assert sparse[0].value == pytest.approx(dense[0].value, abs=1e-10)

    def test_repulsive_has_none(self, free_coeffs, repulsive_rank_one):
        problem = DirectOracleService.assemble(free_coeffs, repulsive_rank_one, 0.2, 40.0, 1.0 / 32.0)
        assert DirectOracleService.gap_eigenvalues(problem, SpectralWindow(-1.0, -0.005), method="dense") == []

    def test_embedded_eigenvalue(self):
        witness = PerturbationService.embedded_witness(2.0, 0.3)
        R = witness.perturbation.support.x1 + 1.0
        width = 0.02 * witness.lambda_e
        window = SpectralWindow(witness.lambda_e - width, witness.lambda_e + width, width)
        refined = DirectOracleService.two_grid_eigenvalue(
            OperatorCoefficients.constant(0.0), witness.perturbation, 0.3, window, R, 1.0 / 256.0,
            interior_only=False,
        )
        assert refined is not None
        assert abs(refined.fine.value - witness.lambda_e) < abs(refined.coarse.value - witness.lambda_e)
        assert abs(refined.extrapolated - witness.lambda_e) <= 1e-3
        assert refined.fine.tail_mass <= 1e-4

    def test_embedded_box_must_hold_support(self):
        witness = PerturbationService.embedded_witness(2.0, 0.3)
        with pytest.raises(ConfigError):
            DirectOracleService.assemble(OperatorCoefficients.constant(0.0), witness.perturbation, 0.3,
                                         snap_half_width(2.0 * np.pi + 1.0, 1.0 / 256.0), 1.0 / 256.0)


@pytest.mark.slow
class TestInteriorEdges:
    """q = 2 cos(2 pi x), b0 = +-1 on [-1, 1], eps = 0.1: one eigenvalue in the predicted half-gap, none in the other"""

    epsilon = 0.1
    h = 1.0 / 64.0
    R = 300.0

    @pytest.fixture(scope="class")
    def lacuna(self, mathieu_coeffs):
        bands = DirectOracleService.discrete_band_edges(mathieu_coeffs, self.h, 25.0)
        left, right = bands[0][1], bands[1][0]
        middle = 0.5 * (left + right)
        return SpectralWindow(left + 1e-9, middle, 1e-3), SpectralWindow(middle, right - 1e-9, 1e-3)

    def _predicted(self, coeffs, scan, pert, side):
        edge = scan.edge(1, side)
        problem = GapAsymptoticsService.edge_problem(coeffs, edge, pert, lacuna_width=scan.lacuna_width(edge))
        return GapAsymptoticsService.eigenvalue_asymptotics(problem, self.epsilon)

    @pytest.mark.parametrize("scale,side", [(1.0, EdgeSide.PLUS), (-1.0, EdgeSide.MINUS)])
    def test_eigenvalue_in_predicted_half_gap(self, mathieu_coeffs, mathieu_scan, unit_support, lacuna,
                                              scale, side):
        pert = DifferentialPerturbation(unit_support, b0=Profile.indicator(-1.0, 1.0, scale=scale))
        report = self._predicted(mathieu_coeffs, mathieu_scan, pert, side)
        assert report.exists == ExistenceVerdict.YES

        problem = DirectOracleService.assemble(mathieu_coeffs, pert, self.epsilon, self.R, self.h)
        left_half, right_half = lacuna
        present, absent = (right_half, left_half) if side == EdgeSide.PLUS else (left_half, right_half)
        found = DirectOracleService.gap_eigenvalues(problem, present)
        assert len(found) == 1
        assert found[0].value.real == pytest.approx(report.lambda_exact.real, abs=3e-3)
        assert DirectOracleService.gap_eigenvalues(problem, absent) == []


@pytest.mark.slow
def test_complex_rank_one_against_asymptotics():
    config = load_problem(CONFIGS / "rank_one_complex.toml")
    coeffs = OperatorCoefficients.from_spec(config.coefficients)
    pert = PerturbationService.build(config.perturbation)
    edge = BandService.find_band_edges(coeffs, config.run.lambda_max).edge(0, EdgeSide.PLUS)
    epsilon = 0.05
    report = GapAsymptoticsService.eigenvalue_asymptotics(
        GapAsymptoticsService.edge_problem(coeffs, edge, pert), epsilon,
    )
    assert report.exists == ExistenceVerdict.YES
    lam = report.lambda_exact
    distance = abs(lam - edge.mu)
    assert lam.imag < -0.5 * distance

    window = SpectralWindow(lam.real - distance, lam.real + distance, 0.5 * distance, im_center=lam.imag)
    problem = DirectOracleService.assemble(coeffs, pert, epsilon, config.oracle.R, config.oracle.h)
    found = DirectOracleService.gap_eigenvalues(problem, window, method="shift_invert")
    assert len(found) == 1
    oracle = found[0].value - edge.mu
    assert abs(found[0].value - lam) <= 1e-2 * distance
    predicted = report.lambda_order2 - edge.mu
    assert predicted.real == pytest.approx(oracle.real, rel=0.1)
    assert predicted.imag == pytest.approx(oracle.imag, rel=0.1)
