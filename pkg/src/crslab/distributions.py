"""Per-element value distributions and seeded samplers.

Values are plain floats for continuous distributions. Discrete distributions
with the jitter flag return ``(atom, tiebreak)`` pairs whose lexicographic
order makes all comparisons almost surely strict, standing in for the
continuity assumption; ``magnitude`` extracts the numeric part and
``sort_key`` lifts either representation to a comparable pair.

Seeding is counter-based: ``stream(master_seed, *path)`` derives an
independent generator from the integer path, so trial t of phase p always
sees the same draws no matter how work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# phase labels for derived streams; learning and evaluation must never share one
PHASE_SELECTABILITY = 1
PHASE_LEARN = 2
PHASE_VERIFY = 3
PHASE_PROPHET = 4
PHASE_HARD = 5
PHASE_BOOTSTRAP = 6
PHASE_MARGINALS = 7


def stream(master_seed, *path):
    """Independent generator for (master_seed, path); identical inputs give
    bit-identical draws."""
    entropy = [int(master_seed)] + [int(p) for p in path]
    return np.random.default_rng(entropy)


def magnitude(value):
    """Numeric part of a value (drops the jitter tiebreak if present)."""
    if isinstance(value, tuple):
        return float(value[0])
    return float(value)


def sort_key(value):
    """Lift a value to a (magnitude, tiebreak) pair comparing lexicographically."""
    if isinstance(value, tuple):
        return (float(value[0]), float(value[1]))
    return (float(value), 0.0)


#: sorts below any sampled value of the same magnitude; used for zero dummies
ZERO_KEY = (0.0, -math.inf)
INF_KEY = (math.inf, math.inf)


class ValueDistribution:
    kind = "abstract"
    continuous = True

    def sample_one(self, rng):
        raise NotImplementedError

    def sample(self, rng, size):
        """Vector of ``size`` draws; ndarray for continuous kinds."""
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class UniformValues(ValueDistribution):
    low: float = 0.0
    high: float = 1.0

    kind = "uniform"

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("uniform needs low < high")

    def sample_one(self, rng):
        return float(rng.uniform(self.low, self.high))

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size=size)

    def ppf(self, q):
        return self.low + (self.high - self.low) * q

    def cdf(self, v):
        return min(1.0, max(0.0, (v - self.low) / (self.high - self.low)))

    def mean(self):
        return 0.5 * (self.low + self.high)

    def to_config(self):
        return {"kind": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class ExponentialValues(ValueDistribution):
    rate: float = 1.0

    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential needs rate > 0")

    def sample_one(self, rng):
        return float(rng.exponential(1.0 / self.rate))

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size=size)

    def ppf(self, q):
        return -math.log1p(-q) / self.rate

    def cdf(self, v):
        return -math.expm1(-self.rate * max(v, 0.0))

    def mean(self):
        return 1.0 / self.rate

    def to_config(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class ParetoValues(ValueDistribution):
    alpha: float = 2.0
    x_min: float = 1.0

    kind = "pareto"

    def __post_init__(self):
        if not (self.alpha > 0 and self.x_min > 0):
            raise ValueError("pareto needs alpha > 0 and x_min > 0")

    def sample_one(self, rng):
        return float(self.x_min * (1.0 - rng.random()) ** (-1.0 / self.alpha))

    def sample(self, rng, size):
        return self.x_min * (1.0 - rng.random(size)) ** (-1.0 / self.alpha)

    def ppf(self, q):
        return self.x_min * (1.0 - q) ** (-1.0 / self.alpha)

    def cdf(self, v):
        if v < self.x_min:
            return 0.0
        return 1.0 - (self.x_min / v) ** self.alpha

    def mean(self):
        if self.alpha <= 1:
            return math.inf
        return self.alpha * self.x_min / (self.alpha - 1)

    def to_config(self):
        return {"kind": "pareto", "alpha": self.alpha, "x_min": self.x_min}


@dataclass(frozen=True)
class DiscreteValues(ValueDistribution):
    support: tuple
    masses: tuple
    jitter: bool = True

    kind = "discrete"
    continuous = False

    def __init__(self, support, masses, jitter=True):
        support = tuple(float(v) for v in support)
        masses = tuple(float(m) for m in masses)
        if len(support) != len(masses) or not support:
            raise ValueError("support and masses must be nonempty and aligned")
        if any(m < 0 for m in masses) or abs(sum(masses) - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "jitter", bool(jitter))

    def sample_one(self, rng):
        atom = float(rng.choice(self.support, p=self.masses))
        if self.jitter:
            return (atom, float(rng.random()))
        return atom

    def sample(self, rng, size):
        atoms = rng.choice(self.support, p=self.masses, size=size)
        if self.jitter:
            ties = rng.random(size)
            return [(float(a), float(t)) for a, t in zip(atoms, ties)]
        return atoms

    def mean(self):
        return sum(v * m for v, m in zip(self.support, self.masses))

    def to_config(self):
        return {
            "kind": "discrete",
            "support": list(self.support),
            "masses": list(self.masses),
            "jitter": self.jitter,
        }


def distribution_from_config(config):
    kind = config.get("kind")
    if kind == "uniform":
        return UniformValues(config.get("low", 0.0), config.get("high", 1.0))
    if kind == "exponential":
        return ExponentialValues(config["rate"])
    if kind == "pareto":
        return ParetoValues(config["alpha"], config["x_min"])
    if kind == "discrete":
        return DiscreteValues(config["support"], config["masses"], config.get("jitter", True))
    raise ValueError(f"unknown distribution kind: {kind!r}")


DISTRIBUTION_KINDS = ("uniform", "exponential", "pareto", "discrete")


def sample_values(dists, rng):
    """One independent draw per element, in element order."""
    return [d.sample_one(rng) for d in dists]


def sample_values_matrix(dists, rng, count):
    """(count, n) float matrix of draws, or None when a jittered distribution
    prevents the flat representation."""
    if any(not d.continuous and getattr(d, "jitter", False) for d in dists):
        return None
    cols = [np.asarray(d.sample(rng, count), dtype=float) for d in dists]
    if not cols:
        return np.zeros((count, 0))
    return np.column_stack(cols)


def sample_active_set(x, rng):
    """Random subset with independent membership probabilities x_i."""
    x = _check_fractional(x)
    draws = rng.random(len(x))
    return frozenset(i for i, xi in enumerate(x) if draws[i] < xi)


def sample_active_matrix(x, rng, count):
    """(count, n) boolean activity matrix with independent Bernoulli(x_i) marks."""
    x = _check_fractional(x)
    return rng.random((count, len(x))) < np.asarray(x)


def _check_fractional(x):
    x = [float(v) for v in x]
    for v in x:
        if not 0.0 <= v <= 1.0:
            raise ValueError("activation probabilities must lie in [0, 1]")
    return x
