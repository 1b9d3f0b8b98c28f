"""Shared fixtures and random instance generators for the test suite."""

import itertools

import numpy as np
import pytest

from crslab.matroids import (
    GraphicMatroid,
    LaminarMatroid,
    TransversalMatroid,
    UniformMatroid,
)


def triangle_matroid():
    """Graphic matroid of a triangle: edges a=0 (0-1), b=1 (1-2), c=2 (0-2)."""
    return GraphicMatroid(3, [(0, 1), (1, 2), (0, 2)])


def triangle_pendant_matroid():
    """Triangle plus a pendant edge 2-3; rank 3 on 4 edges."""
    return GraphicMatroid(4, [(0, 1), (1, 2), (0, 2), (2, 3)])


def random_uniform_matroid(rng, max_n=10):
    n = int(rng.integers(1, max_n + 1))
    r = int(rng.integers(0, n + 1))
    return UniformMatroid(n, r)


def random_laminar_matroid(rng, max_n=10):
    n = int(rng.integers(2, max_n + 1))
    elements = list(range(n))
    rng.shuffle(elements)
    sets, caps = [], []
    # a couple of disjoint chains over a shuffled ground set
    cursor = 0
    while cursor < n and len(sets) < 4:
        width = int(rng.integers(1, n - cursor + 1))
        block = elements[cursor : cursor + width]
        cursor += width
        inner = block[: max(1, width // 2)]
        if len(inner) < width and rng.random() < 0.7:
            sets.append(inner)
            caps.append(int(rng.integers(1, len(inner) + 1)))
        sets.append(block)
        caps.append(int(rng.integers(1, width + 1)))
    return LaminarMatroid(n, sets, caps)


def random_graphic_matroid(rng, max_n=10):
    v = int(rng.integers(2, 7))
    m = int(rng.integers(1, max_n + 1))
    edges = [(int(rng.integers(0, v)), int(rng.integers(0, v))) for _ in range(m)]
    return GraphicMatroid(v, edges)


def random_transversal_matroid(rng, max_n=10):
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, 6))
    adjacency = []
    for _ in range(n):
        deg = int(rng.integers(0, k + 1))
        adjacency.append(sorted(rng.choice(k, size=deg, replace=False).tolist()) if deg else [])
    return TransversalMatroid(adjacency, num_right=k)


RANDOM_FAMILIES = (
    random_uniform_matroid,
    random_laminar_matroid,
    random_graphic_matroid,
    random_transversal_matroid,
)


def random_matroid(rng, max_n=10):
    maker = RANDOM_FAMILIES[int(rng.integers(0, len(RANDOM_FAMILIES)))]
    return maker(rng, max_n=max_n)


def brute_force_max_weight_basis(matroid, weights):
    """Oracle: best basis by enumeration, ties by lexicographically sorted tuple."""
    best = None
    for basis in matroid.bases():
        key = (-sum(weights[e] for e in basis), tuple(sorted(basis)))
        if best is None or key < best[0]:
            best = (key, basis)
    return best[1]


def all_bases(matroid):
    return list(matroid.bases())


def exchange_bijections(matroid, weights, a, b):
    """Oracle: all bijections f: a -> b satisfying the exchange-map contract."""
    a, b = sorted(a), sorted(b)
    found = []
    for image in itertools.permutations(b):
        f = dict(zip(a, image))
        ok = all(
            f[x] == x if x in set(b) else True for x in a
        ) and all(
            weights[f[x]] <= weights[x]
            and matroid.is_basis((frozenset(b) - {f[x]}) | {x})
            for x in a
        )
        if ok:
            found.append(f)
    return found


def laminar_stress_instance(rng):
    """Random chains with strictly increasing capacities and x saturating
    every ring, plus a few unconstrained elements."""
    n_chains = int(rng.integers(1, 3))
    sets, caps, x = [], [], []
    base = 0
    for _ in range(n_chains):
        depth = int(rng.integers(1, 5))
        members, cap_prev = [], 0
        for _level in range(depth):
            ring = int(rng.integers(1, 5))
            cap = cap_prev + int(rng.integers(1, min(ring, 2) + 1))
            share = (cap - cap_prev) / ring
            members.extend(range(base + len(members), base + len(members) + ring))
            x.extend([min(1.0, share)] * ring)
            sets.append(list(members))
            caps.append(cap)
            cap_prev = cap
        base += len(members)
    for _ in range(int(rng.integers(0, 3))):
        x.append(float(rng.uniform(0.4, 1.0)))
        base += 1
    return LaminarMatroid(base, sets, caps), x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
