"""Shared generators for randomized test batteries."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from peakstop import lattice
from peakstop.lattice import LatticeStepDistribution, SkewClass


def random_float_dist(rng: np.random.Generator, max_support: int = 3,
                      k_range: tuple[int, int] = (-3, 3)) -> LatticeStepDistribution:
    size = rng.integers(1, max_support + 1)
    ks = rng.choice(np.arange(k_range[0], k_range[1] + 1), size=size, replace=False)
    w = rng.dirichlet(np.ones(size))
    atoms = tuple((int(k), float(p)) for k, p in zip(ks, w))
    # re-normalize exactly to keep the constructor happy
    total = sum(p for _, p in atoms)
    atoms = tuple((k, p / total) for k, p in atoms)
    return LatticeStepDistribution(1.0, atoms)


def random_rational_dist(rng: np.random.Generator, max_support: int = 4,
                         k_range: tuple[int, int] = (-3, 3),
                         denom: int = 24) -> LatticeStepDistribution:
    size = rng.integers(2, max_support + 1)
    ks = rng.choice(np.arange(k_range[0], k_range[1] + 1), size=size, replace=False)
    weights = rng.integers(1, denom, size=size)
    total = int(weights.sum())
    atoms = tuple((int(k), Fraction(int(w), total)) for k, w in zip(ks, weights))
    return LatticeStepDistribution(1, atoms)


def random_skewed_dist(rng: np.random.Generator, want: SkewClass,
                       max_support: int = 4, tries: int = 500) -> LatticeStepDistribution:
    """Rejection-sample a float dist of the requested skew class."""
    for _ in range(tries):
        d = random_float_dist(rng, max_support=max_support)
        if lattice.classify_skew(d) is want:
            return d
    raise AssertionError(f"could not draw a {want} distribution in {tries} tries")


def random_symmetric_dist(rng: np.random.Generator, half_support: int = 2
                          ) -> LatticeStepDistribution:
    """Mirror-symmetric law: pairs (+k, -k) with equal masses, optional atom at 0."""
    size = rng.integers(1, half_support + 1)
    ks = rng.choice(np.arange(1, 4), size=size, replace=False)
    w = rng.dirichlet(np.ones(size + 1))
    atoms = [(0, float(w[-1]))]
    for k, p in zip(ks, w[:-1]):
        atoms.append((int(k), float(p) / 2.0))
        atoms.append((-int(k), float(p) / 2.0))
    total = sum(p for _, p in atoms)
    return LatticeStepDistribution(1.0, tuple((k, p / total) for k, p in atoms))
