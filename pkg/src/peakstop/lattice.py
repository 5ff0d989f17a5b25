"""Exact finite-horizon machinery for lattice random walks.

Steps live on a mesh h*Z with finitely many atoms, so every law here is a
finite table and all dynamic programming is exact.  Probabilities may be
floats or ``fractions.Fraction``; supplying Fractions keeps every table
entry rational end to end, which the time-reversal and oracle-equivalence
test batteries rely on.

The walk is X_n, its running maximum M_n, the drawdown Z_n = M_n - X_n.
The objective sup_tau E[f(M_N - X_tau)] reduces to optimal stopping of the
drawdown chain: stopping at time n with drawdown z pays the *stop-now*
value E[f(z v M_k)] over the k = N - n remaining steps, while never
stopping pays the *stop-at-end* value E[f(z v M_k - X_k)].
"""

from __future__ import annotations

import operator
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Callable, Union

from . import rewards
from .errors import PreconditionError, ResourceLimitError
from .rewards import RewardSpec

Number = Union[int, float, Fraction]

PROB_TOL = 1e-12
VALUE_TOL = 1e-12
RULE_TOL = 1e-9
BRUTE_FORCE_LEAVES = 10**7
LEVEL_SPAN_LIMIT = 20000


@dataclass(frozen=True)
class LatticeStepDistribution:
    """Finite-support step law on h*Z: atoms are (k, p) with step value k*h."""

    h: Number
    atoms: tuple[tuple[int, Number], ...]

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"mesh h must be positive, got {self.h}")
        atoms = tuple(sorted((int(k), p) for k, p in self.atoms))
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        ks = [k for k, _ in atoms]
        if len(set(ks)) != len(ks):
            raise ValueError("atom positions must be distinct")
        if any(p < 0 for _, p in atoms):
            raise ValueError("atom masses must be nonnegative")
        total = sum(p for _, p in atoms)
        if self.is_exact():
            if total != 1:
                raise ValueError(f"masses must sum to 1 exactly, got {total}")
        elif abs(total - 1) > PROB_TOL:
            raise ValueError(f"masses must sum to 1 within {PROB_TOL}, got {total}")

    def is_exact(self) -> bool:
        return all(isinstance(p, (int, Fraction)) for _, p in self.atoms)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.atoms)

    def mass(self, k: int) -> Number:
        for kk, p in self.atoms:
            if kk == k:
                return p
        return 0

    def max_step(self) -> int:
        return max(self.support)

    def min_step(self) -> int:
        return min(self.support)


class SkewClass(Enum):
    RIGHT_SKEW = "right_skew"
    LEFT_SKEW = "left_skew"
    SYMMETRIC = "symmetric"
    NEITHER = "neither"


def _tail_ge(dist, a, strict: bool) -> Number:
    op = operator.gt if strict else operator.ge
    return sum(p for k, p in dist.atoms if op(k, a))


def _tail_le(dist, a, strict: bool) -> Number:
    op = operator.lt if strict else operator.le
    return sum(p for k, p in dist.atoms if op(k, a))


def classify_skew(dist: LatticeStepDistribution) -> SkewClass:
    """Compare the step law with its negation in the stochastic order.

    Right skew means P(xi > a) >= P(xi < -a) for every real a; since the
    tail functions only move at support points it suffices to compare the
    open and closed tails at 0 and at every distinct |k| in the support.
    """
    exact = dist.is_exact()
    tol = 0 if exact else PROB_TOL

    mirror = all(dist.mass(k) == dist.mass(-k) for k in dist.support) if exact else all(
        abs(dist.mass(k) - dist.mass(-k)) <= tol for k in dist.support
    )
    if mirror:
        return SkewClass.SYMMETRIC

    thresholds = sorted({0} | {abs(k) for k in dist.support})
    right = True
    left = True
    for a in thresholds:
        for strict in (True, False):
            up = _tail_ge(dist, a, strict)
            down = _tail_le(dist, -a, strict)
            if up < down - tol:
                right = False
            if down < up - tol:
                left = False
    if right:
        return SkewClass.RIGHT_SKEW
    if left:
        return SkewClass.LEFT_SKEW
    return SkewClass.NEITHER


def dual_distribution(dist: LatticeStepDistribution) -> LatticeStepDistribution:
    """Step law of the negated walk: every atom k -> -k, same masses."""
    return LatticeStepDistribution(dist.h, tuple((-k, p) for k, p in dist.atoms))


@dataclass(frozen=True)
class JointLaw:
    """Exact joint law of (M_n, X_n) as a map (m, x) -> probability, in levels."""

    n: int
    entries: dict

    def __post_init__(self):
        for (m, x) in self.entries:
            if m < 0 or m < x:
                raise ValueError(f"invalid key (m={m}, x={x}): need m >= max(0, x)")
        total = sum(self.entries.values())
        if abs(total - 1) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}")

    def max_marginal(self) -> dict:
        out = defaultdict(lambda: 0)
        for (m, _), p in self.entries.items():
            out[m] += p
        return dict(out)

    def drawdown_marginal(self) -> dict:
        out = defaultdict(lambda: 0)
        for (m, x), p in self.entries.items():
            out[m - x] += p
        return dict(out)


def _check_span(dist: LatticeStepDistribution, n: int) -> None:
    span = n * max(abs(dist.max_step()), abs(dist.min_step()))
    if span > LEVEL_SPAN_LIMIT:
        raise ResourceLimitError(
            f"lattice range n*max|k| = {span} exceeds {LEVEL_SPAN_LIMIT}"
        )


def joint_law_max_end(dist: LatticeStepDistribution, n: int) -> JointLaw:
    """Forward DP over (max-so-far, position) pairs; exact for exact masses."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    _check_span(dist, n)
    return JointLaw(n, dict(_joint_tables(dist, n)[n]))


@lru_cache(maxsize=256)
def _joint_tables(dist: LatticeStepDistribution, n: int) -> tuple:
    """(M_k, X_k) tables for k = 0..n, cached per distribution."""
    cur = {(0, 0): 1 if dist.is_exact() else 1.0}
    out = [cur]
    for _ in range(n):
        nxt = defaultdict(lambda: 0)
        for (m, x), p in cur.items():
            for k, pk in dist.atoms:
                x2 = x + k
                nxt[(m if m >= x2 else x2, x2)] += p * pk
        cur = dict(nxt)
        out.append(cur)
    return tuple(out)


def _max_marginal(dist: LatticeStepDistribution, k: int) -> dict:
    out = defaultdict(lambda: 0)
    for (m, _), p in _joint_tables(dist, k)[k].items():
        out[m] += p
    return dict(out)


def value_stop_now(dist: LatticeStepDistribution, f: RewardSpec, k: int, z: int):
    """E[f((z v M_k) * h)]: value of stopping immediately with k steps left
    and current drawdown level z."""
    if k < 0 or z < 0:
        raise ValueError("k and z must be nonnegative")
    _check_span(dist, k)
    return sum(
        p * rewards.evaluate(f, (z if z >= m else m) * dist.h)
        for m, p in _max_marginal(dist, k).items()
    )


def value_stop_at_end(dist: LatticeStepDistribution, f: RewardSpec, k: int, z: int):
    """E[f((z v M_k - X_k) * h)]: value of deferring the stop to the horizon."""
    if k < 0 or z < 0:
        raise ValueError("k and z must be nonnegative")
    _check_span(dist, k)
    return sum(
        p * rewards.evaluate(f, ((z if z >= m else m) - x) * dist.h)
        for (m, x), p in _joint_tables(dist, k)[k].items()
    )


def drawdown_step_law(dist: LatticeStepDistribution, z: int) -> dict:
    """One-step transition of the drawdown chain: z -> max(z - k, 0)."""
    if z < 0:
        raise ValueError(f"drawdown level must be nonnegative, got {z}")
    out = defaultdict(lambda: 0)
    for k, p in dist.atoms:
        out[max(z - k, 0)] += p
    return dict(out)


@dataclass(frozen=True)
class PredictionProblem:
    dist: LatticeStepDistribution
    N: int
    f: RewardSpec

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"horizon must be at least 1, got {self.N}")


@dataclass(frozen=True)
class SnellSolution:
    value: Number
    V: dict            # (n, z) -> envelope value, over reachable states
    stop_region: frozenset
    policy: str        # tie-break rule identifier

    def stops_at(self, n: int, z: int) -> bool:
        return (n, z) in self.stop_region


def snell_solve(problem: PredictionProblem) -> SnellSolution:
    """Backward induction on (time, drawdown level).

    V(N, z) = f(z*h); V(n, z) = max(stop-now value over N-n remaining steps,
    expected V(n+1, .) under the drawdown transition).  Ties inside VALUE_TOL
    are broken toward STOP, so optimality claims for the trivial rules read
    "attains the optimal value", never uniqueness.
    """
    dist, N, f = problem.dist, problem.N, problem.f
    _check_span(dist, N)

    reachable = [{0}]
    for _ in range(N):
        nxt = set()
        for z in reachable[-1]:
            nxt.update(max(z - k, 0) for k in dist.support)
        reachable.append(nxt)

    V: dict = {}
    stop_region = set()
    for z in reachable[N]:
        V[(N, z)] = rewards.evaluate(f, z * dist.h)
        stop_region.add((N, z))

    for n in range(N - 1, -1, -1):
        for z in reachable[n]:
            stop = value_stop_now(dist, f, N - n, z)
            cont = sum(
                p * V[(n + 1, z2)] for z2, p in drawdown_step_law(dist, z).items()
            )
            if stop >= cont - VALUE_TOL:
                stop_region.add((n, z))
            V[(n, z)] = stop if stop >= cont else cont

    return SnellSolution(
        value=V[(0, 0)],
        V=V,
        stop_region=frozenset(stop_region),
        policy="ties-stop",
    )


def _guard_tree(dist: LatticeStepDistribution, N: int) -> None:
    if len(dist.atoms) ** N > BRUTE_FORCE_LEAVES:
        raise ResourceLimitError(
            f"history tree has {len(dist.atoms)}^{N} leaves, guard is {BRUTE_FORCE_LEAVES}"
        )


def brute_force_value(problem: PredictionProblem):
    """Optimal value by backward induction on the full history tree.

    Every node carries the conditional law of the final maximum over its own
    subtree, so the stop value at a prefix is an honest enumeration of the
    continuations and never touches the drawdown reduction.  This is the
    independent oracle the Snell solver is checked against.
    """
    dist, N, f = problem.dist, problem.N, problem.f
    _guard_tree(dist, N)
    h = dist.h
    atoms = dist.atoms
    one = 1 if dist.is_exact() else 1.0

    def rec(n: int, x: int, m: int):
        if n == N:
            return rewards.evaluate(f, (m - x) * h), {m: one}
        m_dist = defaultdict(lambda: 0)
        cont = 0
        for k, p in atoms:
            x2 = x + k
            best, md = rec(n + 1, x2, m if m >= x2 else x2)
            cont += p * best
            for mm, q in md.items():
                m_dist[mm] += p * q
        stop = sum(q * rewards.evaluate(f, (mm - x) * h) for mm, q in m_dist.items())
        return (stop if stop >= cont else cont), dict(m_dist)

    value, _ = rec(0, 0, 0)
    return value


def _future_max_laws(dist: LatticeStepDistribution, n: int) -> list:
    """Law of max(0, partial sums) over j future steps, for j = 0..n."""
    one = 1 if dist.is_exact() else 1.0
    laws = [{0: one}]
    for _ in range(n):
        nxt = defaultdict(lambda: 0)
        for k, pk in dist.atoms:
            for w, q in laws[-1].items():
                nxt[max(0, k + w)] += pk * q
        laws.append(dict(nxt))
    return laws


def rule_value(problem: PredictionProblem, rule):
    """Exact E[f(M_N - X_tau)] of a fixed adapted rule over the history tree.

    The rule consumes prefixes one epoch at a time through its incremental
    interface, so lookahead is unrepresentable.  Nodes are memoized on
    (n, x, m) which is sound because built-in rules are functions of the
    epoch, the position and the running maximum only.
    """
    dist, N, f = problem.dist, problem.N, problem.f
    _guard_tree(dist, N)
    h = dist.h
    state = rule.reset(None)
    fm = _future_max_laws(dist, N)
    stop_memo: dict = {}
    walk_memo: dict = {}

    def stop_value(j: int, z: int):
        key = (j, z)
        if key not in stop_memo:
            stop_memo[key] = sum(
                q * rewards.evaluate(f, (z if z >= w else w) * h)
                for w, q in fm[j].items()
            )
        return stop_memo[key]

    def walk(n: int, x: int, m: int):
        key = (n, x, m)
        if key in walk_memo:
            return walk_memo[key]
        if n == N or rule.should_stop(state, n, x * h, m * h):
            out = stop_value(N - n, m - x)
        else:
            out = sum(p * walk(n + 1, x + k, m if m >= x + k else x + k)
                      for k, p in dist.atoms)
        walk_memo[key] = out
        return out

    return walk(0, 0, 0)


@dataclass(frozen=True)
class BangBangReport:
    skew: SkewClass
    designated_rule: str
    value_stop_now: Number      # tau = 0
    value_stop_at_end: Number   # tau = N
    snell_value: Number
    max_rule_value: Number | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "skew": self.skew.value,
            "designated_rule": self.designated_rule,
            "value_stop_now": float(self.value_stop_now),
            "value_stop_at_end": float(self.value_stop_at_end),
            "snell_value": float(self.snell_value),
            "max_rule_value": None
            if self.max_rule_value is None
            else float(self.max_rule_value),
            "passed": self.passed,
        }


def verify_bang_bang(problem: PredictionProblem) -> BangBangReport:
    """Check that the skew-designated trivial rule attains the Snell value.

    Right skew designates tau = N, left skew tau = 0.  For symmetric steps
    both must match and a stop-at-new-max rule (which stops only at the
    running maximum or at the horizon) must attain the value as well.
    """
    from .rules import StopAtNewMax

    dist, N, f = problem.dist, problem.N, problem.f
    skew = classify_skew(dist)
    if skew is SkewClass.NEITHER:
        raise PreconditionError(
            "step law is neither right- nor left-skew; no trivial rule is designated"
        )
    g = value_stop_now(dist, f, N, 0)
    d = value_stop_at_end(dist, f, N, 0)
    snell = snell_solve(problem).value

    max_rule_value = None
    if skew is SkewClass.RIGHT_SKEW:
        designated = "stop_at_end"
        passed = abs(d - snell) <= RULE_TOL
    elif skew is SkewClass.LEFT_SKEW:
        designated = "stop_now"
        passed = abs(g - snell) <= RULE_TOL
    else:
        designated = "any_at_max_or_end"
        max_rule_value = rule_value(problem, StopAtNewMax(after=N // 2))
        passed = (
            abs(g - snell) <= RULE_TOL
            and abs(d - snell) <= RULE_TOL
            and abs(max_rule_value - snell) <= RULE_TOL
        )
    return BangBangReport(skew, designated, g, d, snell, max_rule_value, passed)


@dataclass(frozen=True)
class DominanceEntry:
    k: int
    z: int
    stop_now: float           # G
    stop_at_end: float        # D
    capped_drawdown: float    # E[f((z v Z_k) h)]
    slack: float              # min of the two dominance slacks


@dataclass(frozen=True)
class DominanceReport:
    entries: tuple[DominanceEntry, ...]
    min_slack: float
    passed: bool

    def to_rows(self) -> list[tuple]:
        return [
            (e.k, e.z, e.stop_now, e.stop_at_end, e.slack) for e in self.entries
        ]


def dominance_report(
    dist: LatticeStepDistribution, f: RewardSpec, N: int, z_levels
) -> DominanceReport:
    """Check the two dominance inequalities behind the bang-bang result.

    For every k <= N and requested drawdown level z, the stop-at-end value
    must dominate both the capped-drawdown expectation E[f(z v Z_k)] and the
    stop-now value, within VALUE_TOL.  Requires a right-skew or symmetric
    step law; apply to the dual for left-skew inputs.
    """
    skew = classify_skew(dist)
    if skew not in (SkewClass.RIGHT_SKEW, SkewClass.SYMMETRIC):
        raise PreconditionError(
            f"dominance checks need right-skew or symmetric steps, got {skew.value};"
            " apply to dual_distribution(dist) instead"
        )
    entries = []
    min_slack = float("inf")
    for k in range(N + 1):
        z_law = joint_law_max_end(dist, k).drawdown_marginal()
        for z in z_levels:
            g = value_stop_now(dist, f, k, z)
            d = value_stop_at_end(dist, f, k, z)
            capped = sum(
                p * rewards.evaluate(f, (z if z >= w else w) * dist.h)
                for w, p in z_law.items()
            )
            slack = min(d - capped, d - g)
            min_slack = min(min_slack, slack)
            entries.append(DominanceEntry(k, z, float(g), float(d), float(capped), float(slack)))
    return DominanceReport(tuple(entries), float(min_slack), min_slack >= -VALUE_TOL)
