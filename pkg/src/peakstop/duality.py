"""Dominating couplings between a walk and its dual, and time-reversal checks.

The dual walk has the negated step law.  When the steps dominate their
negation stochastically, a comonotone (shared-uniform inverse-CDF) coupling
realizes both laws with xi >= xi~ atom by atom; summing the coupled steps
then gives pathwise increment domination, M >= M~ and Z <= Z~.  The
time-reversal identity (M_n - X_n, X_n) =d (M~_n, -X~_n) is checked exactly
on lattice tables and by a two-sample rectangle-CDF comparison for
simulated Levy paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import lattice
from .errors import PreconditionError
from .lattice import LatticeStepDistribution, SkewClass

INCREMENT_TOL = 1e-9
TABLE_TOL = 1e-12
DKW_DELTA = 1e-3


@dataclass(frozen=True)
class CoupledStepLaw:
    """Joint atoms (xi, xi_dual, p) with xi >= xi_dual everywhere, in levels."""

    h: float
    joint_atoms: tuple

    def __post_init__(self):
        for k, kd, p in self.joint_atoms:
            if k < kd:
                raise ValueError(f"coupling atom violates domination: ({k}, {kd})")
            if p < 0:
                raise ValueError(f"negative mass {p}")

    def first_marginal(self) -> dict:
        out: dict = {}
        for k, _, p in self.joint_atoms:
            out[k] = out.get(k, 0) + p
        return out

    def second_marginal(self) -> dict:
        out: dict = {}
        for _, kd, p in self.joint_atoms:
            out[kd] = out.get(kd, 0) + p
        return out


@dataclass(frozen=True)
class CoupledPathPair:
    """A path and its coupled dual on a common grid, with maxima and drawdowns."""

    times: np.ndarray
    x: np.ndarray
    x_dual: np.ndarray
    max_x: np.ndarray
    max_dual: np.ndarray

    @property
    def drawdown(self) -> np.ndarray:
        return self.max_x - self.x

    @property
    def drawdown_dual(self) -> np.ndarray:
        return self.max_dual - self.x_dual

    def check_invariants(self, tol: float = INCREMENT_TOL) -> None:
        """Increment domination over all index pairs, M >= M~ and Z <= Z~."""
        gap = self.x - self.x_dual
        if np.any(np.diff(gap) < -tol):
            raise AssertionError("increment domination violated")
        if np.any(self.max_x < self.max_dual - tol):
            raise AssertionError("running-max domination violated")
        if np.any(self.drawdown > self.drawdown_dual + tol):
            raise AssertionError("drawdown ordering violated")


def _cumulative(masses) -> list:
    total = 0
    out = []
    for m in masses:
        total = total + m
        out.append(total)
    return out


def dominating_coupling(dist: LatticeStepDistribution) -> CoupledStepLaw:
    """Comonotone coupling of the step law with its dual.

    Both quantile functions are evaluated on a shared uniform by overlaying
    the two cumulative-mass partitions of (0, 1]; each overlay cell becomes
    one joint atom.  Works whenever the steps stochastically dominate their
    negation, which makes the first quantile function pointwise >= the dual
    one.  Marginals are reproduced exactly (rationally so for exact masses).
    """
    skew = lattice.classify_skew(dist)
    if skew not in (SkewClass.RIGHT_SKEW, SkewClass.SYMMETRIC):
        raise PreconditionError(
            "stochastic domination coupling requires the steps to dominate "
            f"their negation; got class {skew.value} (couple the dual instead)"
        )
    dual = lattice.dual_distribution(dist)
    ks = [k for k, _ in dist.atoms]
    kds = [k for k, _ in dual.atoms]
    cum = _cumulative(p for _, p in dist.atoms)
    cum_d = _cumulative(p for _, p in dual.atoms)
    exact = dist.is_exact()
    zero = 0 if exact else 0.0

    joint: dict = {}
    i = j = 0
    prev = zero
    while i < len(ks) and j < len(kds):
        hi = cum[i] if cum[i] <= cum_d[j] else cum_d[j]
        mass = hi - prev
        if mass > 0:
            key = (ks[i], kds[j])
            joint[key] = joint.get(key, zero) + mass
        if cum[i] <= hi:
            i += 1
        if cum_d[j] <= hi:
            j += 1
        prev = hi

    law = CoupledStepLaw(dist.h, tuple((k, kd, p) for (k, kd), p in sorted(joint.items())))
    # marginals must reproduce the inputs exactly
    want = dict(dist.atoms)
    got = law.first_marginal()
    want_d = dict(dual.atoms)
    got_d = law.second_marginal()
    tol = 0 if exact else TABLE_TOL
    for k, p in want.items():
        if abs(got.get(k, zero) - p) > tol:
            raise AssertionError(f"first marginal broken at {k}")
    for k, p in want_d.items():
        if abs(got_d.get(k, zero) - p) > tol:
            raise AssertionError(f"second marginal broken at {k}")
    return law


def couple_paths(law: CoupledStepLaw, n: int, seed: int) -> CoupledPathPair:
    """Simulate n coupled steps and assert every pathwise invariant."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    probs = np.array([float(p) for _, _, p in law.joint_atoms])
    probs = probs / probs.sum()
    picks = rng.choice(len(law.joint_atoms), size=n, p=probs)
    steps = np.array([float(k) * law.h for k, _, _ in law.joint_atoms])[picks]
    steps_d = np.array([float(kd) * law.h for _, kd, _ in law.joint_atoms])[picks]

    x = np.concatenate([[0.0], np.cumsum(steps)])
    xd = np.concatenate([[0.0], np.cumsum(steps_d)])
    pair = CoupledPathPair(
        times=np.arange(n + 1, dtype=float),
        x=x,
        x_dual=xd,
        max_x=np.maximum.accumulate(x),
        max_dual=np.maximum.accumulate(xd),
    )
    pair.check_invariants()
    return pair


@dataclass(frozen=True)
class ReversalReport:
    n: int
    exact: bool
    max_abs_diff: float
    table_size: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "exact": self.exact,
            "max_abs_diff": self.max_abs_diff,
            "table_size": self.table_size,
            "passed": self.passed,
        }


def time_reversal_check_exact(dist: LatticeStepDistribution, n: int) -> ReversalReport:
    """Exact table equality of (M_n - X_n, X_n) against (M~_n, -X~_n)."""
    fwd = lattice.joint_law_max_end(dist, n)
    rev = lattice.joint_law_max_end(lattice.dual_distribution(dist), n)
    left: dict = {}
    for (m, x), p in fwd.entries.items():
        key = (m - x, x)
        left[key] = left.get(key, 0) + p
    right: dict = {}
    for (m, x), p in rev.entries.items():
        key = (m, -x)
        right[key] = right.get(key, 0) + p

    exact = dist.is_exact()
    keys = set(left) | set(right)
    diffs = [abs(left.get(k, 0) - right.get(k, 0)) for k in keys]
    max_diff = max(diffs, default=0)
    passed = (max_diff == 0) if exact else (max_diff <= TABLE_TOL)
    return ReversalReport(n, exact, float(max_diff), len(keys), passed)


def dkw_threshold(paths: int, delta: float = DKW_DELTA) -> float:
    """Conservative two-sample rectangle-CDF threshold 4*sqrt(ln(2/delta)/paths)."""
    return 4.0 * math.sqrt(math.log(2.0 / delta) / paths)


def rectangle_cdf_discrepancy(a: np.ndarray, b: np.ndarray, grid_points: int = 15):
    """Max |F_a - F_b| over lower-left rectangles anchored on pooled quantiles.

    a and b are (n, 2) sample arrays.  The grid is the product of pooled
    per-coordinate quantiles, so it is deterministic given the samples.
    """
    qs = np.linspace(0.02, 0.98, grid_points)
    edges0 = np.quantile(np.concatenate([a[:, 0], b[:, 0]]), qs)
    edges1 = np.quantile(np.concatenate([a[:, 1], b[:, 1]]), qs)

    def joint_cdf(s):
        # fraction of sample points inside each rectangle (<= e0, <= e1)
        le0 = s[:, 0][:, None] <= edges0[None, :]
        le1 = s[:, 1][:, None] <= edges1[None, :]
        return (le0[:, :, None] & le1[:, None, :]).mean(axis=0)

    return float(np.abs(joint_cdf(a) - joint_cdf(b)).max())


@dataclass(frozen=True)
class MCReversalReport:
    t: float
    paths: int
    discrepancy: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "paths": self.paths,
            "discrepancy": self.discrepancy,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def time_reversal_check_mc(
    triplet, t: float, paths: int, seed: int, scheme=None
) -> MCReversalReport:
    """Two-sample check of (M_t - X_t, X_t) =d (M~_t, -X~_t) for a Levy triplet.

    The process and its dual are simulated on independent substreams; the
    empirical joint CDFs are compared over a pooled-quantile rectangle grid
    against a conservative DKW-style threshold.
    """
    from . import levy

    scheme = scheme or levy.SimScheme(mode="auto", dt=0.01)
    xs, ms = levy.terminal_samples(triplet, t, scheme, paths, seed, stream=0)
    xd, md = levy.terminal_samples(triplet.dual(), t, scheme, paths, seed, stream=1)
    side_a = np.column_stack([ms - xs, xs])
    side_b = np.column_stack([md, -xd])
    disc = rectangle_cdf_discrepancy(side_a, side_b)
    thr = dkw_threshold(paths)
    return MCReversalReport(t, paths, disc, thr, disc <= thr)
