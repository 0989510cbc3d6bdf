# app/services/quadrature/samples.py
"""Function samples carrying value and derivative channels"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from app.core.exceptions import MissingDerivativeChannel


@dataclass(frozen=True)
class FunctionSamples:
    """Values of u, u' and u'' at `points`.

    Channels are arrays of shape (P,) for a single function or (P, m) for m
    functions at once (columns), so operators act on vectors and matrices alike.
    """
    points: np.ndarray
    values: np.ndarray
    first: Optional[np.ndarray] = None
    second: Optional[np.ndarray] = None

    def require(self, order: int) -> "FunctionSamples":
        if order >= 1 and self.first is None:
            raise MissingDerivativeChannel("first-derivative channel is required")
        if order >= 2 and self.second is None:
            raise MissingDerivativeChannel("second-derivative channel is required")
        return self

    def channel(self, order: int) -> np.ndarray:
        self.require(order)
        return (self.values, self.first, self.second)[order]

    def scaled(self, factor) -> "FunctionSamples":
        return FunctionSamples(
            points=self.points,
            values=factor * self.values,
            first=None if self.first is None else factor * self.first,
            second=None if self.second is None else factor * self.second,
        )

    def combine(self, other: "FunctionSamples", a=1.0, b=1.0) -> "FunctionSamples":
        """a * self + b * other, keeping the channels both carry"""
        def mix(u, v):
            if u is None or v is None:
                return None
            return a * u + b * v

        return FunctionSamples(
            points=self.points,
            values=a * self.values + b * other.values,
            first=mix(self.first, other.first),
            second=mix(self.second, other.second),
        )

    def apply_right(self, matrix: np.ndarray) -> "FunctionSamples":
        """Channels times `matrix` (compose a sampled operator with a linear map)"""
        def mul(u):
            return None if u is None else u @ matrix

        return replace(self, values=self.values @ matrix, first=mul(self.first), second=mul(self.second))

    def take(self, index) -> "FunctionSamples":
        def pick(u):
            return None if u is None else u[index]

        return FunctionSamples(
            points=self.points[index],
            values=self.values[index],
            first=pick(self.first),
            second=pick(self.second),
        )

    @property
    def is_matrix(self) -> bool:
        return np.ndim(self.values) == 2
