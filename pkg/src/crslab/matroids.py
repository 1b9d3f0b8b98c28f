"""Matroids on a dense integer ground set 0..n-1.

Provides the independence/rank oracle interface, the concrete families used by
the experiments (uniform, laminar, graphic, transversal, explicit), greedy
maximum-weight bases, strong basis exchange, the weight-monotone exchange
bijection between a maximum-weight basis and an arbitrary basis, and polytope
membership checks (explicit constraints, exhaustive enumeration for small n,
or a supplied convex-decomposition certificate).

All matroid objects are immutable after construction and safe to share across
worker processes.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass

from .errors import MatroidContractError

#: largest ground set for which exhaustive subset enumeration is attempted
ENUMERATION_LIMIT = 20


def _as_elements(subset, n):
    """Normalize a subset argument to a frozenset of ints, checking bounds."""
    s = frozenset(operator.index(e) for e in subset)
    for e in s:
        if not 0 <= e < n:
            raise IndexError(f"element {e} out of range for ground set of size {n}")
    return s


class IndependenceBuilder:
    """Incrementally grows an independent set.

    ``try_add`` mutates the builder and returns True only when the element can
    be added while keeping the set independent. Subclasses specialize this for
    their family; the default re-checks the full set through the oracle.
    """

    def __init__(self, matroid):
        self.matroid = matroid
        self.members = set()

    def try_add(self, element):
        candidate = self.members | {element}
        if self.matroid.is_independent(candidate):
            self.members.add(element)
            return True
        return False

    def clone(self):
        """Independent copy sharing the (immutable) matroid."""
        twin = type(self)(self.matroid)
        twin.members = set(self.members)
        self._copy_state_to(twin)
        return twin

    def _copy_state_to(self, twin):
        pass


class Matroid:
    """Base class: an independence oracle over the ground set {0, ..., n-1}."""

    family = "abstract"

    def __init__(self, n):
        if n < 0:
            raise ValueError("ground set size must be nonnegative")
        self.n = int(n)
        self._full_rank = None

    # -- oracle -----------------------------------------------------------

    def _independent(self, subset):
        raise NotImplementedError

    def is_independent(self, subset):
        """True iff the subset is independent. Pure; validates element indices."""
        return self._independent(_as_elements(subset, self.n))

    def rank(self, subset):
        """Size of a maximal independent subset of ``subset``, built greedily
        in ascending index order."""
        s = _as_elements(subset, self.n)
        builder = self.builder()
        r = 0
        for e in sorted(s):
            if builder.try_add(e):
                r += 1
        return r

    @property
    def full_rank(self):
        if self._full_rank is None:
            self._full_rank = self.rank(range(self.n))
        return self._full_rank

    def is_basis(self, subset):
        s = _as_elements(subset, self.n)
        return len(s) == self.full_rank and self.is_independent(s)

    def builder(self):
        return IndependenceBuilder(self)

    # -- enumeration (small n only) ---------------------------------------

    def independent_sets(self):
        """Yield every independent set. Exponential; intended for n <= ~16."""
        for size in range(self.n + 1):
            for combo in itertools.combinations(range(self.n), size):
                if self.is_independent(combo):
                    yield frozenset(combo)

    def bases(self):
        """Yield every basis. Exponential; intended for n <= ~16."""
        r = self.full_rank
        for combo in itertools.combinations(range(self.n), r):
            if self.is_independent(combo):
                yield frozenset(combo)

    # -- greedy optimization ----------------------------------------------

    def max_weight_basis(self, weights):
        """Maximum-weight basis for nonnegative weights.

        Ties between equal weights are broken toward the lower element index,
        so the result is deterministic.
        """
        w = _check_weights(weights, self.n)
        builder = self.builder()
        chosen = []
        for e in sorted(range(self.n), key=lambda i: (-w[i], i)):
            if builder.try_add(e):
                chosen.append(e)
        return frozenset(chosen)

    # -- basis exchange -----------------------------------------------------

    def strong_exchange(self, a, b, x):
        """Smallest-index y in b \\ a with both a-x+y and b-y+x bases.

        Existence is guaranteed for any two bases, so failure to find such a
        y indicates a broken oracle and raises MatroidContractError.
        """
        a = _as_elements(a, self.n)
        b = _as_elements(b, self.n)
        if not self.is_basis(a) or not self.is_basis(b):
            raise ValueError("strong_exchange requires two bases")
        if x not in a or x in b:
            raise ValueError("x must lie in a \\ b")
        for y in sorted(b - a):
            if self.is_basis((a - {x}) | {y}) and self.is_basis((b - {y}) | {x}):
                return y
        raise MatroidContractError(
            f"no strong exchange partner for {x} between {sorted(a)} and {sorted(b)}"
        )

    def monotone_exchange_map(self, weights, a, b):
        """Bijection f: a -> b with b - f(x) + x a basis and w(f(x)) <= w(x).

        ``a`` must be the (deterministic) maximum-weight basis for ``weights``;
        ``b`` any basis. Walks the elements of ``a`` from lightest to heaviest,
        swapping each one not shared with ``b`` into a shadow copy of ``a``
        via strong exchange. f is the identity on the intersection.
        """
        w = _check_weights(weights, self.n)
        a = _as_elements(a, self.n)
        b = _as_elements(b, self.n)
        if a != self.max_weight_basis(w):
            raise ValueError("a is not the greedy maximum-weight basis for these weights")
        if not self.is_basis(b):
            raise ValueError("b is not a basis")
        # a_1, ..., a_r in greedy order: descending weight, index tie-break.
        ordered = sorted(a, key=lambda i: (-w[i], i))
        shadow = set(a)
        mapping = {}
        for a_i in reversed(ordered):
            if a_i in shadow and a_i not in b:
                b_i = self.strong_exchange(frozenset(shadow), b, a_i)
                mapping[a_i] = b_i
                shadow.remove(a_i)
                shadow.add(b_i)
            else:
                mapping[a_i] = a_i
        return ExchangeMap(source=a, target=b, mapping=mapping, weights=tuple(w))


def _check_weights(weights, n):
    w = [float(v) for v in weights]
    if len(w) != n:
        raise ValueError(f"expected {n} weights, got {len(w)}")
    for v in w:
        if not (v >= 0.0) or v != v or v == float("inf"):
            raise ValueError("weights must be finite and nonnegative")
    return w


@dataclass(frozen=True)
class ExchangeMap:
    """A weight-monotone exchange bijection between two bases."""

    source: frozenset
    target: frozenset
    mapping: dict
    weights: tuple

    def __post_init__(self):
        if set(self.mapping) != set(self.source):
            raise ValueError("mapping domain must equal the source basis")
        if set(self.mapping.values()) != set(self.target):
            raise ValueError("mapping image must equal the target basis")

    def check(self, matroid):
        """Verify all invariants against the matroid oracle; raises on failure."""
        w = self.weights
        for x, y in self.mapping.items():
            if x in self.source & self.target and y != x:
                raise MatroidContractError(f"f({x}) = {y} but {x} is shared")
            if w[y] > w[x]:
                raise MatroidContractError(f"w(f({x})) = {w[y]} > {w[x]}")
            if not matroid.is_basis((self.target - {y}) | {x}):
                raise MatroidContractError(f"target - f({x}) + {x} is not a basis")
        return True


# ---------------------------------------------------------------------------
# concrete families
# ---------------------------------------------------------------------------


class UniformMatroid(Matroid):
    """Independent iff the subset has at most r elements."""

    family = "uniform"

    def __init__(self, n, r):
        super().__init__(n)
        if not 0 <= r <= n:
            raise ValueError("rank must lie in [0, n]")
        self.r = int(r)

    def _independent(self, subset):
        return len(subset) <= self.r

    def rank(self, subset):
        return min(len(_as_elements(subset, self.n)), self.r)

    def builder(self):
        return _UniformBuilder(self)

    def to_config(self):
        return {"family": "uniform", "n": self.n, "r": self.r}

    def __repr__(self):
        return f"UniformMatroid(n={self.n}, r={self.r})"

    def __eq__(self, other):
        return isinstance(other, UniformMatroid) and (self.n, self.r) == (other.n, other.r)

    def __hash__(self):
        return hash(("uniform", self.n, self.r))


class _UniformBuilder(IndependenceBuilder):
    def __init__(self, matroid):
        super().__init__(matroid)
        self.r = matroid.r

    def try_add(self, element):
        if len(self.members) < self.r:
            self.members.add(element)
            return True
        return False


class LaminarMatroid(Matroid):
    """Independent iff |A ∩ L| <= r_L for every set L of a laminar family.

    The family is normalized at construction: capacities are clipped to |L|,
    duplicate sets keep the tightest capacity, and a set nested in another
    with a capacity at least as large is dropped (its constraint is implied).
    After normalization every proper nesting L ⊂ M has r_L < r_M.
    """

    family = "laminar"

    def __init__(self, n, sets, capacities):
        super().__init__(n)
        sets = [frozenset(_as_elements(s, n)) for s in sets]
        caps = [int(c) for c in capacities]
        if len(sets) != len(caps):
            raise ValueError("one capacity per set required")
        for s, c in zip(sets, caps):
            if not s:
                raise ValueError("laminar family sets must be nonempty")
            if c < 1:
                raise ValueError("capacities must be positive integers")
        for s, t in itertools.combinations(sets, 2):
            inter = s & t
            if inter and inter != s and inter != t:
                raise ValueError(f"family is not laminar: {sorted(s)} vs {sorted(t)}")
        self.sets, self.capacities = _normalize_laminar(sets, caps)
        self._sets_of = [[] for _ in range(n)]
        for idx, s in enumerate(self.sets):
            for e in s:
                self._sets_of[e].append(idx)

    def _independent(self, subset):
        for s, cap in zip(self.sets, self.capacities):
            if len(subset & s) > cap:
                return False
        return True

    def builder(self):
        return _LaminarBuilder(self)

    def to_config(self):
        return {
            "family": "laminar",
            "n": self.n,
            "sets": [sorted(s) for s in self.sets],
            "capacities": list(self.capacities),
        }

    def __repr__(self):
        return f"LaminarMatroid(n={self.n}, sets={[sorted(s) for s in self.sets]}, capacities={list(self.capacities)})"

    def __eq__(self, other):
        return (
            isinstance(other, LaminarMatroid)
            and self.n == other.n
            and self.sets == other.sets
            and self.capacities == other.capacities
        )

    def __hash__(self):
        return hash(("laminar", self.n, self.sets, self.capacities))


def _normalize_laminar(sets, caps):
    by_set = {}
    for s, c in zip(sets, caps):
        c = min(c, len(s))
        by_set[s] = min(c, by_set.get(s, c))
    kept = []
    for s, c in by_set.items():
        # drop s if some strict superset constrains at least as tightly
        if any(s < t and by_set[t] <= c for t in by_set):
            continue
        kept.append((s, c))
    kept.sort(key=lambda sc: (len(sc[0]), sorted(sc[0])))
    return tuple(s for s, _ in kept), tuple(c for _, c in kept)


class _LaminarBuilder(IndependenceBuilder):
    def __init__(self, matroid):
        super().__init__(matroid)
        self.counts = [0] * len(matroid.sets)
        self.caps = matroid.capacities
        self.sets_of = matroid._sets_of

    def try_add(self, element):
        idxs = self.sets_of[element]
        for i in idxs:
            if self.counts[i] >= self.caps[i]:
                return False
        for i in idxs:
            self.counts[i] += 1
        self.members.add(element)
        return True

    def _copy_state_to(self, twin):
        twin.counts = list(self.counts)


class GraphicMatroid(Matroid):
    """Ground elements are edges of an undirected graph; independent iff a forest."""

    family = "graphic"

    def __init__(self, num_vertices, edges):
        super().__init__(len(edges))
        self.num_vertices = int(num_vertices)
        self.edges = tuple((int(u), int(v)) for u, v in edges)
        for u, v in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError("edge endpoint out of range")

    def _independent(self, subset):
        builder = self.builder()
        return all(builder.try_add(e) for e in subset)

    def builder(self):
        return _ForestBuilder(self)

    def to_config(self):
        return {
            "family": "graphic",
            "num_vertices": self.num_vertices,
            "edges": [list(e) for e in self.edges],
        }

    def __repr__(self):
        return f"GraphicMatroid(num_vertices={self.num_vertices}, edges={list(self.edges)})"

    def __eq__(self, other):
        return (
            isinstance(other, GraphicMatroid)
            and self.num_vertices == other.num_vertices
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash(("graphic", self.num_vertices, self.edges))


class _ForestBuilder(IndependenceBuilder):
    """Union-find over vertices; adding an edge succeeds iff it joins two trees."""

    def __init__(self, matroid):
        super().__init__(matroid)
        self.parent = list(range(matroid.num_vertices))

    def _find(self, v):
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def try_add(self, element):
        u, v = self.matroid.edges[element]
        ru, rv = self._find(u), self._find(v)
        if ru == rv:  # closes a cycle (loops included)
            return False
        self.parent[rv] = ru
        self.members.add(element)
        return True

    def _copy_state_to(self, twin):
        twin.parent = list(self.parent)


class TransversalMatroid(Matroid):
    """Ground elements are left vertices of a bipartite graph; independent iff
    some matching covers the subset."""

    family = "transversal"

    def __init__(self, adjacency, num_right=None):
        adjacency = [frozenset(int(r) for r in nbrs) for nbrs in adjacency]
        super().__init__(len(adjacency))
        top = max((max(nbrs) for nbrs in adjacency if nbrs), default=-1)
        self.num_right = int(num_right) if num_right is not None else top + 1
        if top >= self.num_right:
            raise ValueError("right vertex index out of range")
        self.adjacency = tuple(adjacency)

    def _independent(self, subset):
        builder = self.builder()
        return all(builder.try_add(e) for e in subset)

    def builder(self):
        return _MatchingBuilder(self)

    def to_config(self):
        return {
            "family": "transversal",
            "adjacency": [sorted(nbrs) for nbrs in self.adjacency],
            "num_right": self.num_right,
        }

    def __repr__(self):
        return f"TransversalMatroid(adjacency={[sorted(a) for a in self.adjacency]}, num_right={self.num_right})"

    def __eq__(self, other):
        return (
            isinstance(other, TransversalMatroid)
            and self.adjacency == other.adjacency
            and self.num_right == other.num_right
        )

    def __hash__(self):
        return hash(("transversal", self.adjacency, self.num_right))


class _MatchingBuilder(IndependenceBuilder):
    """Augmenting-path matching; try_add only mutates on a successful augment."""

    def __init__(self, matroid):
        super().__init__(matroid)
        self.match_right = {}  # right vertex -> left element

    def try_add(self, element):
        if self._augment(element, set()):
            self.members.add(element)
            return True
        return False

    def _augment(self, left, visited):
        for r in sorted(self.matroid.adjacency[left]):
            if r in visited:
                continue
            visited.add(r)
            if r not in self.match_right or self._augment(self.match_right[r], visited):
                self.match_right[r] = left
                return True
        return False

    def _copy_state_to(self, twin):
        twin.match_right = dict(self.match_right)


class ExplicitMatroid(Matroid):
    """Independence given by an explicit list of sets (downward closure is
    taken automatically: a set is independent iff contained in a listed set).

    ``validate=True`` checks the exchange axiom by enumeration (n <= 12)."""

    family = "explicit"

    def __init__(self, n, independent_sets, validate=True):
        super().__init__(n)
        sets = [frozenset(_as_elements(s, n)) for s in independent_sets]
        sets.append(frozenset())
        # keep only the maximal sets
        maximal = [s for s in sets if not any(s < t for t in sets)]
        self.max_sets = tuple(sorted(set(maximal), key=lambda s: (len(s), sorted(s))))
        if validate:
            if n > 12:
                raise ValueError("axiom validation by enumeration needs n <= 12")
            check_matroid_axioms(self)

    def _independent(self, subset):
        return any(subset <= s for s in self.max_sets)

    def to_config(self):
        return {
            "family": "explicit",
            "n": self.n,
            "independent_sets": [sorted(s) for s in self.max_sets],
        }

    def __repr__(self):
        return f"ExplicitMatroid(n={self.n}, max_sets={[sorted(s) for s in self.max_sets]})"

    def __eq__(self, other):
        return (
            isinstance(other, ExplicitMatroid)
            and self.n == other.n
            and self.max_sets == other.max_sets
        )

    def __hash__(self):
        return hash(("explicit", self.n, self.max_sets))


def check_matroid_axioms(matroid):
    """Verify downward closure and the exchange axiom by full enumeration.

    Exponential in n; raises MatroidContractError on the first violation.
    """
    if matroid.n > 12:
        raise ValueError("axiom check by enumeration needs n <= 12")
    if not matroid.is_independent(()):
        raise MatroidContractError("empty set is dependent")
    independent = [s for s in matroid.independent_sets()]
    index = set(independent)
    for s in independent:
        for e in s:
            if s - {e} not in index:
                raise MatroidContractError(f"downward closure fails at {sorted(s)} minus {e}")
    for s in independent:
        for t in independent:
            if len(s) < len(t):
                if not any(s | {e} in index for e in t - s):
                    raise MatroidContractError(
                        f"exchange axiom fails for {sorted(s)} against {sorted(t)}"
                    )
    return True


# ---------------------------------------------------------------------------
# polytope membership
# ---------------------------------------------------------------------------


def verify_decomposition(matroid, x, parts, weights=None, tol=1e-9):
    """Check a convex-decomposition certificate: each part independent, the
    weights subconvex, and the weighted indicator average equal to x.

    Returns True when the certificate is valid; raises ValueError otherwise
    (an invalid certificate says nothing about membership).
    """
    parts = [frozenset(_as_elements(p, matroid.n)) for p in parts]
    if weights is None:
        weights = [1.0 / len(parts)] * len(parts)
    weights = [float(w) for w in weights]
    if len(weights) != len(parts):
        raise ValueError("one weight per part required")
    if any(w < -tol for w in weights) or sum(weights) > 1.0 + tol:
        raise ValueError("weights must be nonnegative and sum to at most 1")
    for p in parts:
        if not matroid.is_independent(p):
            raise ValueError(f"certificate part {sorted(p)} is dependent")
    combined = [0.0] * matroid.n
    for p, w in zip(parts, weights):
        for e in p:
            combined[e] += w
    for i in range(matroid.n):
        if abs(combined[i] - x[i]) > tol:
            raise ValueError(
                f"certificate reconstructs x[{i}] = {combined[i]}, expected {x[i]}"
            )
    return True


def polytope_membership(matroid, x, certificate=None, tol=1e-9):
    """Exact membership of x in the matroid polytope.

    Uniform and laminar families check their explicit constraint systems.
    Other families fall back to exhaustive subset enumeration for
    n <= ENUMERATION_LIMIT, unless a convex-decomposition ``certificate``
    (parts, weights) is supplied.
    """
    x = [float(v) for v in x]
    if len(x) != matroid.n:
        raise ValueError(f"expected {matroid.n} coordinates, got {len(x)}")
    for v in x:
        if not -tol <= v <= 1.0 + tol:
            raise ValueError("coordinates must lie in [0, 1]")
    if certificate is not None:
        parts, weights = certificate
        return verify_decomposition(matroid, x, parts, weights, tol=tol)
    if isinstance(matroid, UniformMatroid):
        return sum(x) <= matroid.r + tol
    if isinstance(matroid, LaminarMatroid):
        return all(
            sum(x[e] for e in s) <= cap + tol
            for s, cap in zip(matroid.sets, matroid.capacities)
        )
    if matroid.n > ENUMERATION_LIMIT:
        raise ValueError(
            f"unsupported size: n = {matroid.n} > {ENUMERATION_LIMIT} and no explicit "
            "constraint system or certificate applies"
        )
    return _membership_by_enumeration(matroid, x, tol)


def _membership_by_enumeration(matroid, x, tol):
    # DFS over subsets carrying the greedy basis, so each subset costs one
    # try_add; prunes a subtree when even the full remaining mass fits the rank.
    suffix = [0.0] * (matroid.n + 1)
    for i in range(matroid.n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + x[i]

    def explore(i, mass, rank, builder):
        if mass > rank + tol:
            return False
        if i == matroid.n or mass + suffix[i] <= rank + tol:
            return True
        if not explore(i + 1, mass, rank, builder):  # exclude element i
            return False
        clone = builder.clone()
        gained = clone.try_add(i)
        return explore(i + 1, mass + x[i], rank + (1 if gained else 0), clone)

    return explore(0, 0.0, 0, matroid.builder())


# ---------------------------------------------------------------------------
# JSON config round-trip
# ---------------------------------------------------------------------------


def matroid_from_config(config):
    """Build a matroid from its JSON-style config dict (see each family's
    ``to_config``); round-trips losslessly."""
    family = config.get("family")
    if family == "uniform":
        return UniformMatroid(config["n"], config["r"])
    if family == "laminar":
        return LaminarMatroid(config["n"], config["sets"], config["capacities"])
    if family == "graphic":
        return GraphicMatroid(config["num_vertices"], config["edges"])
    if family == "transversal":
        return TransversalMatroid(config["adjacency"], config.get("num_right"))
    if family == "explicit":
        return ExplicitMatroid(config["n"], config["independent_sets"])
    raise ValueError(f"unknown matroid family: {family!r}")


MATROID_FAMILIES = ("uniform", "laminar", "graphic", "transversal", "explicit")
