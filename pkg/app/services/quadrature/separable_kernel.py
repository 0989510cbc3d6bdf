# app/services/quadrature/separable_kernel.py
"""Discretization of integral operators with separable upper/lower kernels.

A kernel of the form

    K(x, t) = sum_a X_a(x) Y_a(t)   for t > x   ("upper" terms)
            = sum_b X_b(x) Y_b(t)   for t < x   ("lower" terms)

and continuous across t = x acts on f through two cumulative integrals, which
the quadrature grid evaluates to spectral accuracy at any target point.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.services.quadrature.quadrature_grid import QuadratureGrid
from app.services.quadrature.samples import FunctionSamples


@dataclass(frozen=True)
class KernelTerm:
    x_part: FunctionSamples  # X at the targets, with derivative channels
    t_values: np.ndarray  # Y at the grid nodes
    scale: complex = 1.0


def _block(grid, cumulative, x_channel, t_values, scale, upper: bool) -> np.ndarray:
    if upper:
        integral = grid.weights[None, :] - cumulative
    else:
        integral = cumulative
    return scale * x_channel[:, None] * integral * t_values[None, :]


def assemble_kernel(
        grid: QuadratureGrid,
        targets: np.ndarray,
        upper: Sequence[KernelTerm],
        lower: Sequence[KernelTerm],
        second: bool = False,
) -> FunctionSamples:
    """Matrices u = V f, u' = V1 f (and u'' = V2 f) mapping node values f to targets.

    The second-derivative channel is only available when `targets` are the grid
    nodes themselves, since it picks up the diagonal jump term f(x).
    """
    targets = np.asarray(targets, dtype=float)
    cumulative = grid.cumulative_matrix(targets)
    shape = (targets.size, grid.size)
    value = np.zeros(shape, dtype=complex)
    first = np.zeros(shape, dtype=complex)
    second_m = np.zeros(shape, dtype=complex) if second else None

    for terms, is_upper in ((upper, True), (lower, False)):
        for term in terms:
            x = term.x_part.require(2 if second else 1)
            value += _block(grid, cumulative, x.values, term.t_values, term.scale, is_upper)
            first += _block(grid, cumulative, x.first, term.t_values, term.scale, is_upper)
            if second:
                second_m += _block(grid, cumulative, x.second, term.t_values, term.scale, is_upper)

    if second:
        if targets.size != grid.size or not np.allclose(targets, grid.nodes, rtol=0, atol=1e-14):
            raise ValueError("second-derivative channel needs the grid nodes as targets")
        jump = np.zeros(grid.size, dtype=complex)
        for term in lower:
            jump += term.scale * term.x_part.first * term.t_values
        for term in upper:
            jump -= term.scale * term.x_part.first * term.t_values
        second_m[np.diag_indices(grid.size)] += jump

    return FunctionSamples(points=targets, values=value, first=first, second=second_m)


def kernel_table(
        targets: np.ndarray,
        nodes: np.ndarray,
        upper: Sequence[KernelTerm],
        lower: Sequence[KernelTerm],
) -> np.ndarray:
    """Pointwise kernel values K(x_i, t_j), averaging the two branches on the diagonal"""
    up = sum(t.scale * np.outer(t.x_part.values, t.t_values) for t in upper)
    low = sum(t.scale * np.outer(t.x_part.values, t.t_values) for t in lower)
    x = np.asarray(targets)[:, None]
    t = np.asarray(nodes)[None, :]
    return np.where(t > x, up, np.where(t < x, low, 0.5 * (up + low)))
