"""
Edge Green operator, its k-family and the resolvent (free operator closed forms)
"""
import numpy as np
import pytest

from app.core.exceptions import KZero, OnSpectrum
from app.schemas.band_edges import EdgeSide
from app.services.bands.band_service import BandService
from app.services.green.floquet_service import FloquetService
from app.services.green.green_service import GreenService, resolvent_kernel_parts
from app.services.quadrature.quadrature_grid import QuadratureGrid


@pytest.fixture(scope="module")
def unit_grid() -> QuadratureGrid:
    return QuadratureGrid.build(-1.0, 1.0)


class TestEdgeGreenOperator:
    """G_0 f(x) = -1/2 int |x - t| f(t) dt at the bottom of the free spectrum"""

    def test_on_nodes(self, free_coeffs, bottom_edge, unit_grid):
        f = np.ones(unit_grid.size)
        u = GreenService.edge_green_apply(free_coeffs, bottom_edge, unit_grid, f)
        x = unit_grid.nodes
        np.testing.assert_allclose(u.values, -0.5 * (x ** 2 + 1.0), atol=1e-9)
        np.testing.assert_allclose(u.second, -np.ones(x.size), atol=1e-8)

    def test_outside_support(self, free_coeffs, bottom_edge, unit_grid):
        f = np.ones(unit_grid.size)
        targets = np.array([2.0, -3.0])
        u = GreenService.edge_green_apply(free_coeffs, bottom_edge, unit_grid, f, targets=targets)
        np.testing.assert_allclose(u.values, [-2.0, -3.0], atol=1e-9)
        np.testing.assert_allclose(u.first, [-1.0, 1.0], atol=1e-9)


class TestGreenFamily:
    """G(k) kernel exp(-k|x - t|) / (2k), singular part 1/(2k) int f"""

    def test_full_kernel(self, free_coeffs, bottom_edge, unit_grid):
        k = 0.3
        split = GreenService.edge_green_k(free_coeffs, bottom_edge, k, unit_grid, targets=np.array([0.0, 2.0]))
        u = split.full.values @ np.ones(unit_grid.size)
        expected = [(1.0 - np.exp(-k)) / k ** 2, np.exp(-2.0 * k) * np.sinh(k) / k ** 2]
        np.testing.assert_allclose(u, expected, rtol=1e-8)
        assert split.kappa == pytest.approx(k, rel=1e-7)

    def test_regular_part_tends_to_edge_operator(self, free_coeffs, bottom_edge, unit_grid):
        f = np.ones(unit_grid.size)
        for k in (0.3, 1e-2):
            split = GreenService.edge_green_k(free_coeffs, bottom_edge, k, unit_grid, targets=np.array([0.0]))
            regular = (split.regular.values @ f)[0]
            assert regular == pytest.approx((1.0 - np.exp(-k)) / k ** 2 - 1.0 / k, abs=1e-5)
        assert regular == pytest.approx(-0.5, abs=2e-3)

    def test_k_zero_is_rejected(self, free_coeffs, bottom_edge, unit_grid):
        with pytest.raises(KZero):
            GreenService.edge_green_k(free_coeffs, bottom_edge, 0.0, unit_grid)

    def test_floquet_wronskian(self, mathieu_coeffs, mathieu_scan):
        edge = mathieu_scan.edge(1, EdgeSide.MINUS)
        pair = FloquetService.floquet_solutions(mathieu_coeffs, edge, 0.1, np.linspace(-1.0, 1.0, 21))
        assert pair.wronskian_residual(mathieu_coeffs) < 1e-7
        assert pair.lam == pytest.approx(edge.mu + 0.01)


class TestResolvent:

    def test_free_resolvent(self, free_coeffs, unit_grid):
        f = np.ones(unit_grid.size)
        u = GreenService.resolvent_apply(free_coeffs, -1.0, unit_grid, f, targets=np.array([0.0, 3.0]))
        expected = [1.0 - np.exp(-1.0), np.exp(-3.0) * np.sinh(1.0)]
        np.testing.assert_allclose(u.values, expected, rtol=1e-8)

    def test_kernel_is_symmetric(self, free_coeffs, unit_grid):
        rho, _ = BandService.multiplier(free_coeffs, -1.0)
        nodes = unit_grid.nodes
        parts = resolvent_kernel_parts(free_coeffs, -1.0, rho, unit_grid, nodes)
        table = GreenService.kernel_values(parts, nodes, nodes)
        np.testing.assert_allclose(table, table.T, atol=1e-10)
        np.testing.assert_allclose(table, 0.5 * np.exp(-np.abs(nodes[:, None] - nodes[None, :])), atol=1e-9)

    def test_on_spectrum(self, free_coeffs, unit_grid):
        with pytest.raises(OnSpectrum):
            GreenService.resolvent_operator(free_coeffs, 4.0, unit_grid)
