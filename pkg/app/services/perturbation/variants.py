# app/services/perturbation/variants.py
"""Localized perturbations L: samples of u (with derivatives) on Q -> values on Q"""
import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from app.core.exceptions import ConfigError
from app.schemas.perturbation import FunctionalTermKind, NoEmbeddedCondition, PerturbationKind
from app.services.perturbation.profiles import FunctionalTerm, LinearFunctional, Profile
from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples


@dataclass(frozen=True)
class SupportInterval:
    q_lo: float
    q_hi: float

    def __post_init__(self):
        if not self.q_lo < self.q_hi:
            raise ConfigError(f"Q = [{self.q_lo}, {self.q_hi}] is empty", {"field": "perturbation.q_lo"})

    @property
    def x0(self) -> float:
        return float(math.floor(self.q_lo) - 1)

    @property
    def x1(self) -> float:
        return float(math.ceil(self.q_hi) + 1)

    @property
    def length(self) -> float:
        return self.q_hi - self.q_lo

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (x >= self.q_lo) & (x <= self.q_hi)


def _as_columns(values: np.ndarray):
    return (values[:, None], True) if np.ndim(values) == 1 else (values, False)


class LocalizedPerturbation(ABC):
    kind: PerturbationKind

    def __init__(self, support: SupportInterval):
        self.support = support

    # ==========================================
    # Metadata
    # ==========================================

    def breakpoints(self) -> List[float]:
        return [self.support.q_lo, self.support.q_hi]

    def length_scale(self) -> float:
        return self.support.length

    @property
    def derivative_order(self) -> int:
        return 0

    @property
    def no_embedded_guarantee(self) -> NoEmbeddedCondition:
        return NoEmbeddedCondition.BOUNDED_FIRST_ORDER

    @property
    def is_zero(self) -> bool:
        return False

    # ==========================================
    # Action
    # ==========================================

    @abstractmethod
    def act(self, grid: QuadratureGrid, u: FunctionSamples) -> np.ndarray:
        """L u on the grid nodes; u channels are (N,) or (N, m)"""

    @abstractmethod
    def fd_matrix(self, x: np.ndarray, h: float) -> sparse.csr_matrix:
        """Finite-difference counterpart on the uniform grid x"""

    def _restrict(self, x: np.ndarray, block: sparse.spmatrix) -> sparse.csr_matrix:
        mask = sparse.diags(self.support.inside(x).astype(float))
        return sparse.csr_matrix(mask @ block)


class ZeroPerturbation(LocalizedPerturbation):
    kind = PerturbationKind.ZERO

    @property
    def is_zero(self) -> bool:
        return True

    def act(self, grid, u):
        return np.zeros(np.shape(u.values), dtype=complex)

    def fd_matrix(self, x, h):
        return sparse.csr_matrix((x.size, x.size), dtype=complex)


class DifferentialPerturbation(LocalizedPerturbation):
    """L u = b2 u'' + b1 u' + b0 u"""
    kind = PerturbationKind.DIFFERENTIAL

    def __init__(self, support, b0: Optional[Profile] = None, b1: Optional[Profile] = None,
                 b2: Optional[Profile] = None):
        super().__init__(support)
        self.b0, self.b1, self.b2 = b0, b1, b2

    def _profiles(self):
        return [b for b in (self.b0, self.b1, self.b2) if b is not None]

    def breakpoints(self):
        points = super().breakpoints()
        for profile in self._profiles():
            points += profile.breakpoints
        return points

    def length_scale(self):
        return min([self.support.length] + [p.length_scale for p in self._profiles()])

    @property
    def derivative_order(self):
        return 2 if self.b2 is not None else 1 if self.b1 is not None else 0

    @property
    def no_embedded_guarantee(self):
        return NoEmbeddedCondition.DIVERGENCE_FORM if self.b2 is not None else NoEmbeddedCondition.BOUNDED_FIRST_ORDER

    def act(self, grid, u):
        u.require(self.derivative_order)
        x = grid.nodes
        out = np.zeros(np.shape(u.values), dtype=complex)
        for order, profile in enumerate((self.b0, self.b1, self.b2)):
            if profile is None:
                continue
            channel, _ = _as_columns(u.channel(order))
            term = profile(x)[:, None] * channel
            out = out + (term[:, 0] if np.ndim(u.values) == 1 else term)
        return out

    def fd_matrix(self, x, h):
        n = x.size
        total = sparse.csr_matrix((n, n), dtype=complex)
        if self.b0 is not None:
            total = total + sparse.diags(self.b0.cell_average(x, h))
        if self.b1 is not None:
            b1 = self.b1.cell_average(x, h) / (2.0 * h)
            total = total + sparse.diags([-b1[1:], b1[:-1]], [-1, 1])
        if self.b2 is not None:
            b2 = self.b2.cell_average(x, h) / h ** 2
            total = total + sparse.diags([b2[1:], -2.0 * b2, b2[:-1]], [-1, 0, 1])
        return self._restrict(x, total)


class IntegralKernelPerturbation(LocalizedPerturbation):
    """L u(x) = integral over Q of K(x, y) u(y) dy"""
    kind = PerturbationKind.INTEGRAL_KERNEL

    def __init__(self, support, kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 length_scale: Optional[float] = None):
        super().__init__(support)
        self.kernel = kernel
        self._length_scale = length_scale or support.length

    def length_scale(self):
        return self._length_scale

    def kernel_matrix(self, x, y) -> np.ndarray:
        xx, yy = np.meshgrid(np.asarray(x, dtype=float), np.asarray(y, dtype=float), indexing="ij")
        return np.asarray(self.kernel(xx, yy), dtype=complex)

    def act(self, grid, u):
        weighted = self.kernel_matrix(grid.nodes, grid.nodes) * grid.weights[None, :]
        return weighted @ u.values

    def fd_matrix(self, x, h):
        idx = np.nonzero(self.support.inside(x))[0]
        weights = np.full(idx.size, h)
        on_edge = np.isclose(x[idx], self.support.q_lo) | np.isclose(x[idx], self.support.q_hi)
        weights[on_edge] *= 0.5
        block = self.kernel_matrix(x[idx], x[idx]) * weights[None, :]
        rows, cols = np.meshgrid(idx, idx, indexing="ij")
        return sparse.csr_matrix((block.ravel(), (rows.ravel(), cols.ravel())), shape=(x.size, x.size))

    @classmethod
    def gaussian(cls, support, beta: complex, length: float) -> "IntegralKernelPerturbation":
        def kernel(x, y):
            return beta * np.exp(-((x - y) / length) ** 2)

        return cls(support, kernel, min(length, support.length))

    @classmethod
    def from_csv(cls, support, path: str) -> "IntegralKernelPerturbation":
        """Tensor-grid kernel from rows (x, y, Re, Im), linearly interpolated"""
        rows = []
        with open(path, newline="", encoding="utf-8") as handle:
            for record in csv.DictReader(handle):
                rows.append((float(record["x"]), float(record["y"]), float(record["Re"]), float(record["Im"])))
        if not rows:
            raise ConfigError(f"kernel file {path} is empty", {"field": "perturbation.kernel.path"})
        data = np.array(rows)
        xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
        if xs.size * ys.size != data.shape[0]:
            raise ConfigError(f"kernel file {path} is not a full tensor grid", {"field": "perturbation.kernel.path"})
        values = np.zeros((xs.size, ys.size), dtype=complex)
        ix = np.searchsorted(xs, data[:, 0])
        iy = np.searchsorted(ys, data[:, 1])
        values[ix, iy] = data[:, 2] + 1j * data[:, 3]
        interp = RegularGridInterpolator((xs, ys), values, bounds_error=False, fill_value=0.0)

        def kernel(x, y):
            points = np.stack([np.asarray(x).ravel(), np.asarray(y).ravel()], axis=-1)
            return interp(points).reshape(np.shape(x))

        return cls(support, kernel, float(min(np.min(np.diff(xs)), np.min(np.diff(ys)))) * 4.0)


class RankOneKernelPerturbation(LocalizedPerturbation):
    """Kernel beta * conj(b(x)) * b(y)"""
    kind = PerturbationKind.RANK_ONE

    def __init__(self, support, beta: complex, b: Profile):
        super().__init__(support)
        self.beta = complex(beta)
        self.b = b

    def breakpoints(self):
        return super().breakpoints() + self.b.breakpoints

    def length_scale(self):
        return min(self.support.length, self.b.length_scale)

    def kernel(self, x, y):
        return self.beta * np.conj(self.b(x)) * self.b(y)

    def act(self, grid, u):
        b = self.b(grid.nodes)
        moment = (grid.weights * b) @ u.values
        left = self.beta * np.conj(b)
        return left * moment if np.ndim(u.values) == 1 else np.outer(left, moment)

    def fd_matrix(self, x, h):
        b = self.b.cell_average(x, h)
        left = sparse.csr_matrix((self.beta * np.conj(b))[:, None])
        right = sparse.csr_matrix((h * b)[None, :])
        return sparse.csr_matrix(left @ right)


class FunctionalRankOnePerturbation(LocalizedPerturbation):
    """L u = b * l(u)"""
    kind = PerturbationKind.FUNCTIONAL_RANK_ONE

    def __init__(self, support, b: Profile, functional: LinearFunctional):
        super().__init__(support)
        self.b = b
        self.functional = functional

    def breakpoints(self):
        return super().breakpoints() + self.b.breakpoints + self.functional.breakpoints

    def length_scale(self):
        return min(self.support.length, self.b.length_scale)

    @property
    def derivative_order(self):
        return self.functional.order

    @property
    def no_embedded_guarantee(self):
        if self.functional.uses_point_derivatives:
            return NoEmbeddedCondition.NONE
        return NoEmbeddedCondition.BOUNDED_FIRST_ORDER

    def act(self, grid, u):
        b = self.b(grid.nodes)
        value = self.functional.evaluate(grid, u)
        return b * value if np.ndim(u.values) == 1 else np.outer(b, value)

    def fd_matrix(self, x, h):
        left = sparse.csr_matrix(self.b.cell_average(x, h)[:, None])
        return sparse.csr_matrix(left @ self.functional.fd_row(x, h))


class EmbeddedExamplePerturbation(FunctionalRankOnePerturbation):
    """L u = 2 xi(x) (u'(eps^alpha) - u'(0)) / eps on Q = (-2 pi, 2 pi)"""
    kind = PerturbationKind.EMBEDDED_EXAMPLE

    def __init__(self, alpha: float, epsilon: float):
        if alpha < 2.0:
            raise ConfigError(f"alpha={alpha} must be at least 2", {"field": "perturbation.alpha"})
        if epsilon <= 0.0:
            raise ConfigError(f"epsilon={epsilon} must be positive", {"field": "perturbation.epsilon"})
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.shift = epsilon ** alpha
        self.nu = np.pi / (2.0 * self.shift)
        self.cutoff = 2.0 * np.pi * math.floor(self.nu) / self.nu
        self.amplitude = 1.0 / (self.cutoff - self.shift)

        nu, cutoff, amplitude = self.nu, self.cutoff, self.amplitude
        xi = Profile(-cutoff, cutoff, lambda x: amplitude * np.sin(nu * np.abs(np.asarray(x))) + 0j,
                     2.0 * np.pi / nu)
        b = Profile(-cutoff, cutoff, lambda x: 2.0 * xi.fn(x), 2.0 * np.pi / nu)
        functional = LinearFunctional([
            FunctionalTerm(FunctionalTermKind.DERIVATIVE, 1.0 / epsilon, at=self.shift),
            FunctionalTerm(FunctionalTermKind.DERIVATIVE, -1.0 / epsilon, at=0.0),
        ])
        super().__init__(SupportInterval(-2.0 * np.pi, 2.0 * np.pi), b, functional)
        self.xi = xi

    @property
    def eigenvalue(self) -> float:
        return float(self.nu ** 2)

    def breakpoints(self):
        return [self.support.q_lo, -self.cutoff, 0.0, self.shift, self.cutoff, self.support.q_hi]

    def length_scale(self):
        return 2.0 * np.pi / self.nu
