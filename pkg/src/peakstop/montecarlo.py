"""Monte Carlo rule evaluation and bang-bang verification batteries.

Estimates E[f(M - X_tau)] for adapted rules on lattice walks or Levy
skeletons, always with common random numbers: competing rules are evaluated
on identical simulated paths, so discretization bias cancels in paired
differences and identical rules difference to exactly zero.

Every conclusion is a statement about the *discretized* process (the grid
skeleton), whose increments are i.i.d.; a right-skew model therefore has a
right-skew skeleton and the discrete-time bang-bang result applies to it
exactly, leaving only MC noise in the battery margins.  The battery can
refute optimality of a trivial rule, never confirm it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import lattice, levy, rewards, rules
from .errors import PreconditionError
from .lattice import LatticeStepDistribution, SkewClass
from .levy import LevyTriplet, SimScheme
from .rules import StoppingRuleSpec
from .seeding import STREAM_RULES, STREAM_SKELETON, substream

Model = Union[LatticeStepDistribution, LevyTriplet]

MIN_COUNT = 100
BATTERY_SIGMAS = 3.0
CROSSCHECK_SIGMAS = 4.0

FOOTER = (
    "conclusions are statements about the discretized process; "
    "the battery can refute optimality of the designated rule, never confirm it"
)


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    se: float
    ci95: tuple[float, float]
    count: int
    seed: int
    scheme: str
    tail_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "se": self.se,
            "ci95": list(self.ci95),
            "count": self.count,
            "seed": self.seed,
            "scheme": self.scheme,
            "tail_warning": self.tail_warning,
        }


@dataclass(frozen=True)
class PairedReport:
    mean_diff: float
    se_diff: float
    ci95: tuple[float, float]
    n_positive: int
    n_negative: int
    n_zero: int
    count: int
    seed: int
    scheme: str

    def to_dict(self) -> dict:
        return {
            "mean_diff": self.mean_diff,
            "se_diff": self.se_diff,
            "ci95": list(self.ci95),
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "n_zero": self.n_zero,
            "count": self.count,
            "seed": self.seed,
            "scheme": self.scheme,
        }


def _scheme_descriptor(model: Model, horizon, scheme: Optional[SimScheme]) -> str:
    if isinstance(model, LatticeStepDistribution):
        return f"lattice(N={horizon})"
    s = scheme or SimScheme()
    return f"{s.mode}(dt={s.dt:g},level={s.level},T={horizon:g})"


def _rule_states(rule, count: int, seed: int, rule_index: int):
    """Per-path rule state; randomized rules draw from their own substream."""
    if rules.is_randomized(rule):
        rng = substream(seed, STREAM_RULES, rule_index)
        return np.array([rule.reset(rng) for _ in range(count)])
    return rule.reset(None)


def _lattice_chunks(dist: LatticeStepDistribution, N: int, count: int, seed: int):
    values = np.array([k * float(dist.h) for k, _ in dist.atoms])
    probs = np.array([float(p) for _, p in dist.atoms])
    probs = probs / probs.sum()
    times = np.arange(N + 1, dtype=float)
    chunk = max(64, min(16384, count))
    done = 0
    ci = 0
    while done < count:
        n = min(chunk, count - done)
        rng = substream(seed, STREAM_SKELETON, 0, ci)
        steps = rng.choice(values, size=(n, N), p=probs)
        x = np.concatenate([np.zeros((n, 1)), np.cumsum(steps, axis=1)], axis=1)
        yield times, x
        done += n
        ci += 1


def _model_chunks(model: Model, horizon, count: int, seed: int, scheme):
    if isinstance(model, LatticeStepDistribution):
        yield from _lattice_chunks(model, int(horizon), count, seed)
    else:
        yield from levy.skeleton_chunks(model, float(horizon), scheme or SimScheme(), count, seed)


def evaluate_rules(
    model: Model,
    f: rewards.RewardSpec,
    rule_list: Sequence[StoppingRuleSpec],
    horizon,
    count: int,
    seed: int,
    scheme: Optional[SimScheme] = None,
) -> np.ndarray:
    """(count, n_rules) array of f(M - X_tau), all rules on identical paths.

    The reward target M is the running maximum of the same skeleton the rules
    observe, so the discrete-time optimality statements hold exactly for the
    evaluated process.
    """
    if count < MIN_COUNT:
        raise ValueError(f"count must be at least {MIN_COUNT}, got {count}")
    states = [_rule_states(r, count, seed, i) for i, r in enumerate(rule_list)]
    out = np.empty((count, len(rule_list)))
    done = 0
    for times, x in _model_chunks(model, horizon, count, seed, scheme):
        n = x.shape[0]
        maxima = np.maximum.accumulate(x, axis=1)
        m_final = maxima[:, -1]
        for j, rule in enumerate(rule_list):
            st = states[j]
            if isinstance(st, np.ndarray):
                st = st[done : done + n]
            idx = rules.stop_indices_batch(rule, st, times, x, maxima)
            shortfall = np.maximum(m_final - x[np.arange(n), idx], 0.0)
            out[done : done + n, j] = rewards.evaluate_many(f, shortfall)
        done += n
    return out


def estimate_value(
    model: Model,
    f: rewards.RewardSpec,
    rule: StoppingRuleSpec,
    horizon,
    count: int,
    seed: int,
    scheme: Optional[SimScheme] = None,
) -> EstimateReport:
    """MC estimate of E[f(M - X_tau)] with the rule evaluated incrementally."""
    vals = evaluate_rules(model, f, [rule], horizon, count, seed, scheme)[:, 0]
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(count))
    return EstimateReport(
        mean=mean,
        se=se,
        ci95=(mean - 1.96 * se, mean + 1.96 * se),
        count=count,
        seed=seed,
        scheme=_scheme_descriptor(model, horizon, scheme),
        tail_warning=not rewards.is_bounded(f),
    )


def paired_compare(
    model: Model,
    f: rewards.RewardSpec,
    rule_a: StoppingRuleSpec,
    rule_b: StoppingRuleSpec,
    horizon,
    count: int,
    seed: int,
    scheme: Optional[SimScheme] = None,
) -> PairedReport:
    """Common-random-numbers estimate of E[f(M - X_tauA) - f(M - X_tauB)]."""
    vals = evaluate_rules(model, f, [rule_a, rule_b], horizon, count, seed, scheme)
    diff = vals[:, 0] - vals[:, 1]
    mean = float(np.mean(diff))
    sd = float(np.std(diff, ddof=1))
    se = sd / math.sqrt(count)
    return PairedReport(
        mean_diff=mean,
        se_diff=se,
        ci95=(mean - 1.96 * se, mean + 1.96 * se),
        n_positive=int(np.sum(diff > 0)),
        n_negative=int(np.sum(diff < 0)),
        n_zero=int(np.sum(diff == 0)),
        count=count,
        seed=seed,
        scheme=_scheme_descriptor(model, horizon, scheme),
    )


def default_battery(horizon) -> list[StoppingRuleSpec]:
    """Twelve adversarial rules spanning the built-in kinds."""
    T = float(horizon)
    return [
        rules.ConstantRule(0.0),
        rules.ConstantRule(0.25 * T),
        rules.ConstantRule(0.5 * T),
        rules.ConstantRule(0.75 * T),
        rules.FirstPassageAbove(0.25 * _passage_scale(T)),
        rules.FirstPassageAbove(0.5 * _passage_scale(T)),
        rules.FirstPassageAbove(_passage_scale(T)),
        rules.DrawdownTrigger(0.25 * _passage_scale(T)),
        rules.DrawdownTrigger(0.5 * _passage_scale(T)),
        rules.StopAtNewMax(after=0.5 * T),
        rules.StopAtNewMax(after=0.25 * T),
        rules.RandomizedThreshold(0.1 * _passage_scale(T), _passage_scale(T)),
    ]


def _passage_scale(T: float) -> float:
    return max(1.0, T)


@dataclass(frozen=True)
class BatteryRow:
    rule: str
    mean_diff: float     # adversarial minus designated
    se_diff: float
    beaten: bool         # adversarial wins by more than BATTERY_SIGMAS * se

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "mean_diff": self.mean_diff,
            "se_diff": self.se_diff,
            "beaten": self.beaten,
        }


@dataclass(frozen=True)
class BatteryReport:
    designated: str
    license: str
    rows: tuple[BatteryRow, ...]
    count: int
    seed: int
    scheme: str
    passed: bool
    footer: str = FOOTER

    def to_dict(self) -> dict:
        return {
            "designated": self.designated,
            "license": self.license,
            "rows": [r.to_dict() for r in self.rows],
            "count": self.count,
            "seed": self.seed,
            "scheme": self.scheme,
            "passed": self.passed,
            "footer": self.footer,
        }


def _designate(model: Model, f: rewards.RewardSpec, horizon) -> tuple[StoppingRuleSpec, str, str]:
    """Pick the classification-designated trivial rule and name what licenses it."""
    T = float(horizon)
    if isinstance(model, LatticeStepDistribution):
        skew = lattice.classify_skew(model)
        if skew is SkewClass.NEITHER:
            raise PreconditionError("walk is neither right- nor left-skew")
        if skew is SkewClass.LEFT_SKEW:
            return rules.ConstantRule(0.0), "stop_now", f"left-skew walk ({skew.value})"
        name = "symmetric walk" if skew is SkewClass.SYMMETRIC else "right-skew walk"
        return rules.ConstantRule(T), "stop_at_end", name

    cls = levy.classify(model)
    bounded_cont = rewards.is_bounded(f) and rewards.is_continuous(f)
    if cls.symmetric:
        return rules.ConstantRule(T), "stop_at_end", "symmetric"
    if cls.finite_nu and cls.rss:
        return rules.ConstantRule(T), "stop_at_end", "finite-activity right skew"
    if cls.finite_nu and cls.lss:
        return rules.ConstantRule(0.0), "stop_now", "finite-activity left skew"
    if cls.srss:
        return rules.ConstantRule(T), "stop_at_end", "strong right skew"
    if cls.slss:
        return rules.ConstantRule(0.0), "stop_now", "strong left skew"
    if cls.weak_rss or cls.weak_lss:
        if not bounded_cont:
            raise PreconditionError(
                "weak skew symmetry only licenses bounded continuous rewards; "
                f"got {type(f).__name__}"
            )
        if cls.weak_rss:
            return rules.ConstantRule(T), "stop_at_end", "weak right skew (bounded continuous reward)"
        return rules.ConstantRule(0.0), "stop_now", "weak left skew (bounded continuous reward)"
    raise PreconditionError(f"triplet is unclassified: {cls.notes}")


def bangbang_battery(
    model: Model,
    f: rewards.RewardSpec,
    horizon,
    rule_list: Optional[Sequence[StoppingRuleSpec]] = None,
    count: int = 100_000,
    seed: int = 0,
    scheme: Optional[SimScheme] = None,
) -> BatteryReport:
    """Paired comparison of every adversarial rule against the designated one.

    Passes iff no adversarial rule beats the designated trivial rule by more
    than BATTERY_SIGMAS standard errors of the paired difference.
    """
    designated_rule, designated_name, license_name = _designate(model, f, horizon)
    adversaries = list(rule_list) if rule_list is not None else default_battery(horizon)
    vals = evaluate_rules(
        model, f, [designated_rule] + adversaries, horizon, count, seed, scheme
    )
    base = vals[:, 0]
    out = []
    for j, rule in enumerate(adversaries, start=1):
        diff = vals[:, j] - base
        mean = float(np.mean(diff))
        se = float(np.std(diff, ddof=1) / math.sqrt(count))
        out.append(BatteryRow(rule.describe(), mean, se, mean > BATTERY_SIGMAS * se))
    return BatteryReport(
        designated=designated_name,
        license=license_name,
        rows=tuple(out),
        count=count,
        seed=seed,
        scheme=_scheme_descriptor(model, horizon, scheme),
        passed=not any(r.beaten for r in out),
    )
