# app/services/ode/periodic_function.py
"""1-periodic piecewise-smooth real functions"""
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from app.schemas.coefficients import SegmentKind, SegmentSpec

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Segment:
    """Smooth piece on [start, end) of the period cell; evaluators take x in the cell"""
    start: float
    end: float
    value: Evaluator
    derivative: Evaluator
    label: str = "custom"


def _constant_segment(spec: SegmentSpec) -> Segment:
    c = float(spec.value)
    return Segment(
        spec.start, spec.end,
        value=lambda x: np.full(np.shape(x), c),
        derivative=lambda x: np.zeros(np.shape(x)),
        label="constant",
    )


def _polynomial_segment(spec: SegmentSpec) -> Segment:
    poly = Polynomial(spec.coefficients)
    dpoly = poly.deriv()
    x0 = spec.start
    return Segment(
        spec.start, spec.end,
        value=lambda x: poly(np.asarray(x) - x0),
        derivative=lambda x: dpoly(np.asarray(x) - x0),
        label="polynomial",
    )


def _trig_segment(spec: SegmentSpec) -> Segment:
    size = max(len(spec.cos), len(spec.sin))
    a = np.zeros(size)
    b = np.zeros(size)
    a[:len(spec.cos)] = spec.cos
    b[:len(spec.sin)] = spec.sin
    freq = 2.0 * np.pi * np.arange(1, size + 1)
    a0 = float(spec.a0)

    def value(x):
        x = np.asarray(x, dtype=float)
        phase = np.multiply.outer(x, freq)
        return a0 + np.cos(phase) @ a + np.sin(phase) @ b

    def derivative(x):
        x = np.asarray(x, dtype=float)
        phase = np.multiply.outer(x, freq)
        return np.cos(phase) @ (freq * b) - np.sin(phase) @ (freq * a)

    return Segment(spec.start, spec.end, value=value, derivative=derivative, label="trig")


def _sampled_segment(spec: SegmentSpec) -> Segment:
    xs = np.asarray(spec.x, dtype=float)
    ys = np.asarray(spec.y, dtype=float)
    whole_cell = spec.start == 0.0 and spec.end == 1.0 and xs[0] == 0.0 and xs[-1] == 1.0
    bc = "periodic" if whole_cell and np.isclose(ys[0], ys[-1]) else "not-a-knot"
    if bc == "periodic":
        ys = ys.copy()
        ys[-1] = ys[0]
    spline = CubicSpline(xs, ys, bc_type=bc)
    dspline = spline.derivative()
    return Segment(spec.start, spec.end, value=spline, derivative=dspline, label="sampled")


_BUILDERS = {
    SegmentKind.CONSTANT: _constant_segment,
    SegmentKind.POLYNOMIAL: _polynomial_segment,
    SegmentKind.TRIG: _trig_segment,
    SegmentKind.SAMPLED: _sampled_segment,
}


class PiecewisePeriodicFn:
    """Evaluation at x uses x mod 1 and the segment that contains it"""

    def __init__(self, segments: Sequence[Segment]):
        segments = sorted(segments, key=lambda s: s.start)
        if not segments or abs(segments[0].start) > 1e-14 or abs(segments[-1].end - 1.0) > 1e-14:
            raise ValueError("segments must cover the period cell [0, 1)")
        for left, right in zip(segments, segments[1:]):
            if abs(left.end - right.start) > 1e-14:
                raise ValueError(f"segments leave a gap or overlap at {left.end}")
        self.segments: Tuple[Segment, ...] = tuple(segments)
        self.breakpoints = np.array([s.start for s in segments])

    # ==========================================
    # Constructors
    # ==========================================

    @classmethod
    def from_specs(cls, specs: Sequence[SegmentSpec]) -> "PiecewisePeriodicFn":
        return cls([_BUILDERS[spec.kind](spec) for spec in specs])

    @classmethod
    def constant(cls, value: float) -> "PiecewisePeriodicFn":
        return cls.from_specs([SegmentSpec(kind=SegmentKind.CONSTANT, value=value)])

    @classmethod
    def smooth(cls, value: Evaluator, derivative: Evaluator) -> "PiecewisePeriodicFn":
        return cls([Segment(0.0, 1.0, value, derivative)])

    # ==========================================
    # Evaluation
    # ==========================================

    def locate(self, x) -> np.ndarray:
        reduced = np.asarray(x, dtype=float) % 1.0
        idx = np.searchsorted(self.breakpoints, reduced, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def _evaluate(self, x, which: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        reduced = x % 1.0
        idx = self.locate(x)
        out = np.empty(x.shape)
        for k, segment in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = getattr(segment, which)(reduced[mask])
        return out

    def __call__(self, x) -> np.ndarray:
        return self._evaluate(x, "value")

    def derivative(self, x) -> np.ndarray:
        return self._evaluate(x, "derivative")

    def on_segment(self, index: int, shift: float) -> Tuple[Evaluator, Evaluator]:
        """Evaluators of segment `index` translated by the integer `shift` (one-sided at its ends)"""
        segment = self.segments[index]
        return (lambda x: segment.value(np.asarray(x) - shift),
                lambda x: segment.derivative(np.asarray(x) - shift))

    def breakpoint_images(self, a: float, b: float) -> np.ndarray:
        """Points breakpoint + m strictly inside (a, b)"""
        shifts = np.arange(np.floor(a) - 1, np.ceil(b) + 1)
        images = (shifts[:, None] + self.breakpoints[None, :]).ravel()
        return np.unique(images[(images > a) & (images < b)])

    def seam_jumps(self) -> List[Tuple[float, float]]:
        """(breakpoint, right value - left limit) at every breakpoint including the seam"""
        jumps = []
        for k, segment in enumerate(self.segments):
            previous = self.segments[k - 1]
            left = float(previous.value(np.array([previous.end]))[0])
            right = float(segment.value(np.array([segment.start]))[0])
            jumps.append((segment.start, right - left))
        return jumps

    def sample(self, count: int = 4001) -> np.ndarray:
        x = np.linspace(0.0, 1.0, count, endpoint=False)
        return self(np.concatenate([x, self.breakpoints]))
