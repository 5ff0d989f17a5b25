"""Reward functions for stopping near the running maximum.

A reward assigns a value to the shortfall ``g = M - X_tau`` between the
horizon maximum and the stopped value.  Every built-in kind is nonincreasing
and convex on [0, inf); ``Indicator0`` additionally has a downward jump just
to the right of 0, which is the only discontinuity the solvers tolerate.
Shapes of user-supplied piecewise-linear rewards are certified on finite
grids by :func:`verify_shape`, not symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

SHAPE_TOL = 1e-12


@dataclass(frozen=True)
class Indicator0:
    """1 exactly at the origin, 0 elsewhere (probability of stopping at the top)."""


@dataclass(frozen=True)
class Exponential:
    """exp(-sigma * x); bounded, continuous, strictly convex."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class NegPower:
    """-x**alpha with alpha in (0, 1]; concave penalty turned into a convex reward."""

    alpha: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class Linear:
    """slope * x with slope <= 0."""

    slope: float = -1.0

    def __post_init__(self):
        if self.slope > 0:
            raise ValueError(f"slope must be nonpositive, got {self.slope}")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation through (x, value) knots, extrapolated by the last slope.

    Knots must start at x = 0 and be strictly increasing in x.  The constructor
    does not enforce monotonicity or convexity; run :func:`verify_shape` to
    certify a candidate before using it in a solver.
    """

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        knots = tuple((float(x), float(v)) for x, v in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ValueError("need at least two knots")
        if knots[0][0] != 0.0:
            raise ValueError("first knot must sit at x = 0")
        xs = [x for x, _ in knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knot x-coordinates must be strictly increasing")

    def segment_slopes(self) -> list[float]:
        ks = self.knots
        return [(v1 - v0) / (x1 - x0) for (x0, v0), (x1, v1) in zip(ks, ks[1:])]


RewardSpec = Union[Indicator0, Exponential, NegPower, Linear, PiecewiseLinear]


def evaluate(f: RewardSpec, x) -> float:
    """Reward at shortfall x >= 0.  Exact 0/1 integers for Indicator0."""
    if x < 0:
        raise ValueError(f"shortfall must be nonnegative, got {x}")
    if isinstance(f, Indicator0):
        return 1 if x == 0 else 0
    if isinstance(f, Exponential):
        return math.exp(-f.sigma * x)
    if isinstance(f, NegPower):
        return -(float(x) ** f.alpha)
    if isinstance(f, Linear):
        return f.slope * x
    if isinstance(f, PiecewiseLinear):
        return _piecewise_eval(f, float(x))
    raise TypeError(f"not a reward spec: {f!r}")


def _piecewise_eval(f: PiecewiseLinear, x: float) -> float:
    knots = f.knots
    if x >= knots[-1][0]:
        x_last, v_last = knots[-1]
        return v_last + f.segment_slopes()[-1] * (x - x_last)
    for (x0, v0), (x1, v1) in zip(knots, knots[1:]):
        if x <= x1:
            w = (x - x0) / (x1 - x0)
            return (1 - w) * v0 + w * v1
    raise AssertionError("unreachable")


def evaluate_many(f: RewardSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate` over an array of shortfalls."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("shortfalls must be nonnegative")
    if isinstance(f, Indicator0):
        return np.where(xs == 0.0, 1.0, 0.0)
    if isinstance(f, Exponential):
        return np.exp(-f.sigma * xs)
    if isinstance(f, NegPower):
        return -(xs ** f.alpha)
    if isinstance(f, Linear):
        return f.slope * xs
    if isinstance(f, PiecewiseLinear):
        kx = np.array([x for x, _ in f.knots])
        kv = np.array([v for _, v in f.knots])
        out = np.interp(xs, kx, kv)
        tail = xs > kx[-1]
        if np.any(tail):
            out = np.where(tail, kv[-1] + f.segment_slopes()[-1] * (xs - kx[-1]), out)
        return out
    raise TypeError(f"not a reward spec: {f!r}")


def is_bounded(f: RewardSpec) -> bool:
    if isinstance(f, (Indicator0, Exponential)):
        return True
    if isinstance(f, Linear):
        return f.slope == 0
    if isinstance(f, PiecewiseLinear):
        return f.segment_slopes()[-1] == 0
    return False


def is_continuous(f: RewardSpec) -> bool:
    return not isinstance(f, Indicator0)


@dataclass(frozen=True)
class ShapeReport:
    nonincreasing: bool
    convex: bool
    violations: tuple[tuple, ...]

    @property
    def ok(self) -> bool:
        return self.nonincreasing and self.convex


def verify_shape(f: RewardSpec, grid) -> ShapeReport:
    """Certify monotonicity and convexity of ``f`` on a finite grid.

    The grid must be sorted, contain 0 and hold at least three points.
    Convexity is tested on every consecutive triple, monotonicity on every
    consecutive pair, both with SHAPE_TOL slack.  Each violation records the
    offending points and the signed defect.
    """
    grid = [float(g) for g in grid]
    if len(grid) < 3:
        raise ValueError("grid needs at least three points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if 0.0 not in grid:
        raise ValueError("grid must contain 0")

    vals = [evaluate(f, g) for g in grid]
    violations = []
    nonincreasing = True
    convex = True
    for (x0, v0), (x1, v1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if v1 > v0 + SHAPE_TOL:
            nonincreasing = False
            violations.append(("monotone", x0, x1, v1 - v0))
    for i in range(len(grid) - 2):
        x, y, z = grid[i], grid[i + 1], grid[i + 2]
        fy_bound = ((z - y) * vals[i] + (y - x) * vals[i + 2]) / (z - x)
        if vals[i + 1] > fy_bound + SHAPE_TOL:
            convex = False
            violations.append(("convex", x, y, z, vals[i + 1] - fy_bound))
    return ShapeReport(nonincreasing, convex, tuple(violations))


def chord_slope(f: RewardSpec, z) -> float:
    """Slope of the chord from the origin: (f(z) - f(0)) / z for z > 0.

    By convexity this is a valid lower-bound slope for any unit shift:
    f(u + z) - f(u) >= chord_slope(f, z) * z for all u >= 0.
    """
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    return (evaluate(f, z) - evaluate(f, 0)) / z


def check_shift_inequality(f: RewardSpec, x, y, d) -> bool:
    """True iff the decrement over a +d shift is no larger started further out.

    Checks f(x) - f(x+d) >= f(y) - f(y+d) - SHAPE_TOL for 0 <= x < y, d > 0,
    which holds with equality for affine rewards.
    """
    if not (0 <= x < y):
        raise ValueError(f"need 0 <= x < y, got x={x}, y={y}")
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    lhs = evaluate(f, x) - evaluate(f, x + d)
    rhs = evaluate(f, y) - evaluate(f, y + d)
    return lhs >= rhs - SHAPE_TOL


def peak_shift_gap(f: RewardSpec, z, m, x) -> float:
    """f(max(z, m) - x) - f(max(z, m - x)): reward gap between lowering the
    stopped point by x and capping the peak at m - x instead."""
    return evaluate(f, max(z, m) - x) - evaluate(f, max(z, m - x))


def check_peak_shift_pair(f: RewardSpec, z, m, x) -> bool:
    """True iff the forward/backward peak-shift gaps sum to >= -SHAPE_TOL.

    Requires z >= 0 and 0 < x <= m.  For z > 0 additionally asserts the chord
    bounds  chord*z <= gap <= |chord|*z  on the forward gap.
    """
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    if not (0 < x <= m):
        raise ValueError(f"need 0 < x <= m, got x={x}, m={m}")
    forward = peak_shift_gap(f, z, m, x)
    backward = peak_shift_gap(f, z, m - x, -x)
    if z > 0:
        a = chord_slope(f, z)
        if not (a * z - SHAPE_TOL <= forward <= abs(a) * z + SHAPE_TOL):
            raise AssertionError(
                f"forward gap {forward} escapes chord bounds [{a * z}, {abs(a) * z}]"
            )
    return forward + backward >= -SHAPE_TOL


def builtin_kinds() -> tuple[RewardSpec, ...]:
    """One representative of every built-in kind, for shape batteries."""
    return (
        Indicator0(),
        Exponential(sigma=1.0),
        NegPower(alpha=0.5),
        Linear(slope=-1.0),
        PiecewiseLinear(knots=((0.0, 1.0), (1.0, 0.25), (2.0, 0.0), (3.0, 0.0))),
    )
