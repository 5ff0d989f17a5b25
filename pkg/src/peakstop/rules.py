"""Adapted stopping rules, evaluated strictly one epoch at a time.

A rule exposes ``reset(rng) -> state`` and ``should_stop(state, t, x, m)``,
where (t, x, m) are the current epoch, path value and running maximum.  The
stop time is the first epoch at which ``should_stop`` answers True, capped
at the horizon.  Because a rule only ever sees the prefix through these
scalars plus its own pre-drawn state, lookahead is unrepresentable.

Randomized rules draw their state from a dedicated RNG substream supplied
by the caller, so rule randomness never perturbs path randomness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class ConstantRule:
    """Stop at the first epoch with t >= when (tau = 0 and tau = horizon live here)."""

    when: float

    def reset(self, rng):
        return None

    def should_stop(self, state, t, x, m) -> bool:
        return t >= self.when

    def describe(self) -> str:
        return f"constant(t={self.when:g})"


@dataclass(frozen=True)
class FirstPassageAbove:
    """Stop the first time the path reaches level >= level."""

    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError(f"level must be positive, got {self.level}")

    def reset(self, rng):
        return None

    def should_stop(self, state, t, x, m) -> bool:
        return x >= self.level

    def describe(self) -> str:
        return f"first_passage(level={self.level:g})"


@dataclass(frozen=True)
class DrawdownTrigger:
    """Stop once the drawdown m - x reaches the threshold."""

    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")

    def reset(self, rng):
        return None

    def should_stop(self, state, t, x, m) -> bool:
        return m - x >= self.threshold

    def describe(self) -> str:
        return f"drawdown(threshold={self.threshold:g})"


@dataclass(frozen=True)
class StopAtNewMax:
    """Stop at the first epoch t >= after at which the path sits at its running maximum.

    Such a rule stops at the maximum or at the horizon with probability one,
    which is exactly the family that ties the trivial rules for symmetric models.
    """

    after: float = 0.0

    def reset(self, rng):
        return None

    def should_stop(self, state, t, x, m) -> bool:
        return t >= self.after and x >= m

    def describe(self) -> str:
        return f"stop_at_new_max(after={self.after:g})"


@dataclass(frozen=True)
class RandomizedThreshold:
    """First passage above a threshold drawn uniformly from [lo, hi) at start.

    The draw happens in ``reset`` from the rule's own substream; afterwards
    the rule is an ordinary first-passage rule, so it stays adapted.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"need 0 < lo < hi, got lo={self.lo}, hi={self.hi}")

    def reset(self, rng):
        if rng is None:
            raise ValueError("randomized rules need an RNG substream")
        return self.lo + (self.hi - self.lo) * float(rng.random())

    def should_stop(self, state, t, x, m) -> bool:
        return x >= state

    def describe(self) -> str:
        return f"randomized_threshold([{self.lo:g},{self.hi:g}))"


StoppingRuleSpec = Union[
    ConstantRule, FirstPassageAbove, DrawdownTrigger, StopAtNewMax, RandomizedThreshold
]


def is_randomized(rule) -> bool:
    return isinstance(rule, RandomizedThreshold)


def stop_index(rule, state, times, values, maxima) -> int:
    """First epoch index at which the rule stops, horizon-capped.

    Vectorized fast paths cover the built-in kinds; anything else falls back
    to the incremental interface epoch by epoch.  Both routes agree by
    construction and the test suite asserts it.
    """
    times = np.asarray(times)
    values = np.asarray(values)
    maxima = np.asarray(maxima)
    last = len(times) - 1

    if isinstance(rule, ConstantRule):
        hits = times >= rule.when
    elif isinstance(rule, FirstPassageAbove):
        hits = values >= rule.level
    elif isinstance(rule, DrawdownTrigger):
        hits = maxima - values >= rule.threshold
    elif isinstance(rule, StopAtNewMax):
        hits = (times >= rule.after) & (values >= maxima)
    elif isinstance(rule, RandomizedThreshold):
        hits = values >= state
    else:
        for i in range(len(times)):
            if rule.should_stop(state, times[i], values[i], maxima[i]):
                return i
        return last

    idx = int(np.argmax(hits))
    return idx if hits[idx] else last


def stop_indices_batch(rule, state, times, values, maxima) -> np.ndarray:
    """Row-wise :func:`stop_index` over a (paths, epochs) batch sharing one
    time grid.  ``state`` may be a per-path array for randomized rules."""
    times = np.asarray(times)
    values = np.asarray(values)
    maxima = np.asarray(maxima)
    last = values.shape[1] - 1

    if isinstance(rule, ConstantRule):
        hits = np.broadcast_to(times >= rule.when, values.shape)
    elif isinstance(rule, FirstPassageAbove):
        hits = values >= rule.level
    elif isinstance(rule, DrawdownTrigger):
        hits = maxima - values >= rule.threshold
    elif isinstance(rule, StopAtNewMax):
        hits = (times >= rule.after) & (values >= maxima)
    elif isinstance(rule, RandomizedThreshold):
        hits = values >= np.asarray(state)[:, None]
    else:
        return np.array(
            [
                stop_index(rule, state, times, values[i], maxima[i])
                for i in range(values.shape[0])
            ]
        )

    idx = np.argmax(hits, axis=1)
    return np.where(hits[np.arange(values.shape[0]), idx], idx, last)
