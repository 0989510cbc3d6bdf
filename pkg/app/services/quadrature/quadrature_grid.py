# app/services/quadrature/quadrature_grid.py
"""Composite Gauss-Legendre grid on an interval with spectral cumulative integration"""
import logging
from functools import cached_property
from typing import Iterable, Optional

import numpy as np
from numpy.polynomial import legendre

from app.config.settings import get_settings

logger = logging.getLogger(__name__)


class QuadratureGrid:
    """Gauss-Legendre nodes on cells [edges[i], edges[i+1]].

    Besides plain quadrature the grid supports integrals from the left end to an
    arbitrary point and Lagrange interpolation inside a cell; both are exact for
    polynomials of degree < order on every cell.
    """

    def __init__(self, edges: Iterable[float], order: int):
        edges = np.unique(np.asarray(list(edges), dtype=float))
        if edges.size < 2:
            raise ValueError("a quadrature grid needs at least one cell")
        if order < 2:
            raise ValueError("quadrature order must be at least 2")
        self.edges = edges
        self.order = int(order)

        xi, wi = legendre.leggauss(self.order)
        widths = np.diff(edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        self._xi = xi
        self._widths = widths
        self._mids = mids
        self.nodes = (mids[:, None] + 0.5 * widths[:, None] * xi[None, :]).ravel()
        self.weights = (0.5 * widths[:, None] * wi[None, :]).ravel()
        self._node_cell = np.repeat(np.arange(widths.size), self.order)

        # Legendre coefficients of the nodal basis, and of its antiderivatives from -1
        self._vinv = np.linalg.inv(legendre.legvander(xi, self.order - 1))
        self._antideriv = legendre.legint(self._vinv, lbnd=-1, axis=0)

    @classmethod
    def build(
            cls,
            lo: float,
            hi: float,
            breakpoints: Iterable[float] = (),
            order: Optional[int] = None,
            max_cell: Optional[float] = None,
    ) -> "QuadratureGrid":
        """Cells split at every breakpoint inside (lo, hi), none longer than max_cell"""
        settings = get_settings()
        if not hi > lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        order = order or settings.QUAD_ORDER
        max_cell = max_cell or 1.0 / settings.QUAD_CELLS_PER_UNIT

        cuts = [lo, hi] + [b for b in breakpoints if lo < b < hi]
        cuts = np.unique(np.asarray(cuts, dtype=float))
        # merge cuts closer than roundoff
        keep = np.concatenate([[True], np.diff(cuts) > 1e-13 * max(1.0, abs(hi), abs(lo))])
        cuts = cuts[keep]
        cuts[-1] = hi

        edges = [cuts[0]]
        for a, b in zip(cuts[:-1], cuts[1:]):
            pieces = max(1, int(np.ceil((b - a) / max_cell - 1e-9)))
            edges.extend(np.linspace(a, b, pieces + 1)[1:])
        return cls(edges, order)

    # ==========================================
    # Basic geometry
    # ==========================================

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def n_cells(self) -> int:
        return self._widths.size

    def cell_index(self, points) -> np.ndarray:
        idx = np.searchsorted(self.edges, np.asarray(points, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def _local(self, points, cells) -> np.ndarray:
        return 2.0 * (points - self._mids[cells]) / self._widths[cells]

    # ==========================================
    # Quadrature operations
    # ==========================================

    def integrate(self, values: np.ndarray):
        return self.weights @ values

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """(f, g) = integral of f * conj(g)"""
        return complex(np.sum(self.weights * f * np.conj(g)))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(abs(self.inner(f, f))))

    def cumulative_matrix(self, points) -> np.ndarray:
        """Rows C with C @ g = integral of g from lo to x, for each x in points"""
        pts = np.clip(np.atleast_1d(np.asarray(points, dtype=float)), self.lo, self.hi)
        cells = self.cell_index(pts)
        matrix = np.where(self._node_cell[None, :] < cells[:, None], self.weights[None, :], 0.0)

        local = self._local(pts, cells)
        rows = legendre.legvander(local, self.order) @ self._antideriv
        rows *= 0.5 * self._widths[cells][:, None]
        cols = cells[:, None] * self.order + np.arange(self.order)[None, :]
        matrix[np.arange(pts.size)[:, None], cols] = rows
        return matrix

    @cached_property
    def node_cumulative(self) -> np.ndarray:
        return self.cumulative_matrix(self.nodes)

    def interpolation_matrix(self, points) -> np.ndarray:
        """Rows I with I @ g = interpolated g(x); zero rows for x outside the grid"""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        inside = (pts >= self.lo) & (pts <= self.hi)
        cells = self.cell_index(pts)
        matrix = np.zeros((pts.size, self.size))
        local = self._local(pts, cells)
        rows = legendre.legvander(local, self.order - 1) @ self._vinv
        cols = cells[:, None] * self.order + np.arange(self.order)[None, :]
        matrix[np.arange(pts.size)[:, None], cols] = rows
        matrix[~inside] = 0.0
        return matrix

    def contains(self, points) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all((pts >= self.lo - 1e-14) & (pts <= self.hi + 1e-14)))

    def __repr__(self) -> str:
        return f"QuadratureGrid([{self.lo}, {self.hi}], cells={self.n_cells}, order={self.order})"
