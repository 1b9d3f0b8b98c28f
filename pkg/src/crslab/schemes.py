"""Contention-resolution policies and their closed-form analysis.

All schemes are oblivious by construction: run signatures take an arrival
order and an active set but never the marginal vector x. Adversarial orders
are exposed as fixed generator families (identity, reverse, descending-x,
target-last, random); a fully adaptive offline adversary is not searched.

Single-item policies (greedy, accept-second, their even mixture, and general
counting strategies parameterized by an acceptance-probability sequence) come
with exact selectability formulas. The threshold-free policy for laminar
matroids accepts every feasible active element with a fixed probability b and
carries closed-form selectability lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .matroids import LaminarMatroid, UniformMatroid

ORDER_KINDS = ("identity", "reverse", "descending_x", "target_last", "random")


@dataclass(frozen=True)
class ArrivalOrder:
    """A fixed arrival permutation with a provenance tag."""

    permutation: tuple
    kind: str = "fixed"

    def __post_init__(self):
        perm = tuple(int(e) for e in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("not a permutation of 0..n-1")
        object.__setattr__(self, "permutation", perm)

    def __iter__(self):
        return iter(self.permutation)

    def __len__(self):
        return len(self.permutation)


def make_order(kind, n, x=None, target=None):
    """Build a fixed arrival order; random orders are drawn per trial by the
    measurement engine and cannot be materialized here."""
    if kind == "identity":
        return ArrivalOrder(tuple(range(n)), "identity")
    if kind == "reverse":
        return ArrivalOrder(tuple(range(n - 1, -1, -1)), "reverse")
    if kind == "descending_x":
        if x is None:
            raise ValueError("descending_x order needs the marginal vector")
        perm = tuple(sorted(range(n), key=lambda i: (-float(x[i]), i)))
        return ArrivalOrder(perm, "descending_x")
    if kind == "target_last":
        if target is None or not 0 <= int(target) < n:
            raise ValueError("target_last order needs a valid target element")
        rest = [i for i in range(n) if i != int(target)]
        return ArrivalOrder(tuple(rest + [int(target)]), "target_last")
    if kind == "random":
        raise ValueError("random orders are drawn per trial, not fixed")
    raise ValueError(f"unknown order kind: {kind!r}")


@dataclass(frozen=True)
class SchemeRun:
    """Outcome of one run: the accepted set plus the per-active-element trace."""

    accepted: frozenset
    decisions: tuple  # (element, accepted?) for active elements in arrival order


class Scheme:
    """Base contention-resolution policy.

    ``run`` is the per-trial reference implementation. ``run_batch`` may
    return a (trials, n) acceptance matrix for vectorized execution, or None
    to fall back to the loop. ``components`` decomposes pre-run randomness
    into deterministic-coin sub-policies; ``step_accept_probability`` gives
    the per-arrival acceptance probability for the exact-law enumeration.
    """

    kind = "abstract"

    def compatibility_warning(self, matroid):
        """Human-readable tag when the selectability guarantee does not cover
        this matroid family; running is still legal."""
        return None

    def run(self, matroid, order, active, rng):
        raise NotImplementedError

    def run_batch(self, matroid, order, active, rng):
        return None

    def components(self):
        return ((1.0, self),)

    def step_accept_probability(self, matroid, accepted, element, actives_seen):
        raise NotImplementedError(f"{self.kind} has no per-step law")

    def to_config(self):
        return {"kind": self.kind}


def _order_elements(order, n):
    if order is None:
        return range(n)
    return order


def _ordered_view(active, order):
    """Reorder an activity matrix into arrival order.

    Returns (ordered_matrix, order_array) where order_array is None for the
    identity, 1-D for a fixed permutation, and 2-D for per-trial orders.
    """
    if order is None:
        return active, None
    arr = np.asarray(order.permutation if isinstance(order, ArrivalOrder) else order)
    if arr.ndim == 1:
        return active[:, arr], arr
    return np.take_along_axis(active, arr, axis=1), arr


def _elements_at(order_arr, row_idx, pos):
    if order_arr is None:
        return pos
    if order_arr.ndim == 1:
        return order_arr[pos]
    return order_arr[row_idx, pos]


class CountingScheme(Scheme):
    """Accepts the k-th active element seen with probability p_k, then stops.

    The sequence is zero-extended. Selectability guarantees are stated for the
    single-item (rank-1 uniform) setting.
    """

    kind = "counting"

    def __init__(self, probs):
        probs = tuple(float(p) for p in probs)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("acceptance probabilities must lie in [0, 1]")
        self.probs = probs

    def prob(self, k):
        return self.probs[k - 1] if 1 <= k <= len(self.probs) else 0.0

    def compatibility_warning(self, matroid):
        if isinstance(matroid, UniformMatroid) and matroid.r == 1:
            return None
        return f"{self.kind} guarantees hold for rank-1 uniform matroids, not {matroid.family}"

    def run(self, matroid, order, active, rng):
        seen = 0
        decisions = []
        accepted = None
        for e in _order_elements(order, getattr(matroid, "n", len(active))):
            if e not in active:
                continue
            seen += 1
            take = False
            if accepted is None:
                take = rng.random() < self.prob(seen)
                if take:
                    accepted = e
            decisions.append((e, take))
        out = frozenset() if accepted is None else frozenset({accepted})
        return SchemeRun(accepted=out, decisions=tuple(decisions))

    def run_batch(self, matroid, order, active, rng):
        a, order_arr = _ordered_view(active, order)
        rows, n = a.shape
        if n == 0:
            return np.zeros_like(active)
        lookup = np.zeros(n + 1)
        upto = min(len(self.probs), n)
        lookup[1 : upto + 1] = self.probs[:upto]
        pk = lookup[a.cumsum(axis=1)]
        pk[~a] = 0.0
        candidate = rng.random(a.shape) < pk
        has = candidate.any(axis=1)
        pos = candidate.argmax(axis=1)
        accepted = np.zeros_like(active)
        row_idx = np.flatnonzero(has)
        accepted[row_idx, _elements_at(order_arr, row_idx, pos[has])] = True
        return accepted

    def step_accept_probability(self, matroid, accepted, element, actives_seen):
        if accepted:
            return 0.0
        return self.prob(actives_seen)

    def to_config(self):
        return {"kind": "counting", "probs": list(self.probs)}


class GreedyScheme(CountingScheme):
    """Accepts the first active element with probability 1."""

    kind = "greedy"

    def __init__(self):
        super().__init__((1.0,))

    def to_config(self):
        return {"kind": "greedy"}


class AcceptSecondScheme(CountingScheme):
    """Passes the first active element and accepts the second."""

    kind = "accept_second"

    def __init__(self):
        super().__init__((0.0, 1.0))

    def to_config(self):
        return {"kind": "accept_second"}


class EvenMixtureScheme(Scheme):
    """Runs greedy or accept-second, chosen by one fair coin per run.

    In law this equals the counting strategy (1/2, 1, 0, ...): the first
    active element is kept with probability 1/2, otherwise the second. The
    minimum conditional selectability over any single-item instance is 1/e.
    """

    kind = "even_mixture"

    def __init__(self):
        self._greedy = GreedyScheme()
        self._second = AcceptSecondScheme()

    def compatibility_warning(self, matroid):
        return self._greedy.compatibility_warning(matroid)

    def components(self):
        return ((0.5, self._greedy), (0.5, self._second))

    def run(self, matroid, order, active, rng):
        branch = self._greedy if rng.random() < 0.5 else self._second
        return branch.run(matroid, order, active, rng)

    def run_batch(self, matroid, order, active, rng):
        a, order_arr = _ordered_view(active, order)
        rows, n = a.shape
        if n == 0:
            return np.zeros_like(active)
        take_first = rng.random(rows) < 0.5
        csum = a.cumsum(axis=1)
        first = a & (csum == 1)
        second = a & (csum == 2)
        has = np.where(take_first, first.any(axis=1), second.any(axis=1))
        pos = np.where(take_first, first.argmax(axis=1), second.argmax(axis=1))
        accepted = np.zeros_like(active)
        row_idx = np.flatnonzero(has)
        accepted[row_idx, _elements_at(order_arr, row_idx, pos[has])] = True
        return accepted

    def to_config(self):
        return {"kind": "even_mixture"}


class BGreedyScheme(Scheme):
    """Accepts each arriving active element with probability b whenever adding
    it keeps the accepted set independent.

    The closed-form selectability guarantee covers laminar (hence uniform)
    matroids; the policy itself is well defined on any matroid, so other
    families only raise a compatibility warning.
    """

    kind = "b_greedy"

    def __init__(self, b):
        b = float(b)
        if not 0.0 <= b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        self.b = b

    def compatibility_warning(self, matroid):
        if isinstance(matroid, (LaminarMatroid, UniformMatroid)):
            return None
        return f"b_greedy selectability guarantee covers laminar matroids, not {matroid.family}"

    def run(self, matroid, order, active, rng):
        builder = matroid.builder()
        decisions = []
        for e in _order_elements(order, matroid.n):
            if e not in active:
                continue
            take = rng.random() < self.b and builder.try_add(e)
            decisions.append((e, take))
        return SchemeRun(accepted=frozenset(builder.members), decisions=tuple(decisions))

    def run_batch(self, matroid, order, active, rng):
        structure = _counts_structure(matroid)
        if structure is None:
            return None
        memberships, caps = structure
        rows, n = active.shape
        coins = rng.random((rows, n)) < self.b
        counts = np.zeros((rows, caps.size), dtype=np.int64)
        accepted = np.zeros_like(active)
        row_idx = np.arange(rows)
        _, order_arr = _ordered_view(active, order)
        if order_arr is None or order_arr.ndim == 1:
            perm = np.arange(n) if order_arr is None else order_arr
            for pos in range(n):
                e = int(perm[pos])
                sets_e = memberships[e]
                feasible = (counts[:, sets_e] < caps[sets_e]).all(axis=1)
                acc = active[:, e] & coins[:, pos] & feasible
                if acc.any():
                    counts[np.ix_(acc, sets_e)] += 1
                    accepted[acc, e] = True
        else:
            for pos in range(n):
                elems = order_arr[:, pos]
                sets_e = memberships[elems]
                gathered = np.take_along_axis(counts, sets_e, axis=1)
                feasible = (gathered < caps[sets_e]).all(axis=1)
                acc = active[row_idx, elems] & coins[:, pos] & feasible
                if acc.any():
                    np.add.at(counts, (row_idx[acc][:, None], sets_e[acc]), 1)
                    accepted[row_idx[acc], elems[acc]] = True
        return accepted

    def step_accept_probability(self, matroid, accepted, element, actives_seen):
        if matroid.is_independent(set(accepted) | {element}):
            return self.b
        return 0.0

    def to_config(self):
        return {"kind": "b_greedy", "b": self.b}


class NullScheme(Scheme):
    """Accepts nothing; a control policy."""

    kind = "null"

    def run(self, matroid, order, active, rng):
        return SchemeRun(accepted=frozenset(), decisions=tuple((e, False) for e in active))

    def run_batch(self, matroid, order, active, rng):
        return np.zeros_like(active)

    def step_accept_probability(self, matroid, accepted, element, actives_seen):
        return 0.0


_BIG_CAP = 2**31


def _counts_structure(matroid):
    """Padded set-membership table and capacity vector for counts-based
    feasibility; None when the matroid is not laminar/uniform."""
    if isinstance(matroid, UniformMatroid):
        memberships = [[0] for _ in range(matroid.n)]
        caps = [matroid.r]
    elif isinstance(matroid, LaminarMatroid):
        memberships = matroid._sets_of
        caps = list(matroid.capacities)
    else:
        return None
    dummy = len(caps)
    width = max((len(ms) for ms in memberships), default=0) or 1
    table = np.full((matroid.n, width), dummy, dtype=np.int64)
    for e, ms in enumerate(memberships):
        table[e, : len(ms)] = ms
    return table, np.array(caps + [_BIG_CAP], dtype=np.int64)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def f_n(x):
    """Probability that at most one of n independent marks fires:
    prod(1-x_j) + sum_j x_j prod_{k != j}(1-x_k).

    The conditional selectability of element i under the even mixture equals
    f(x_1..x_{i-1}) / 2.
    """
    x = [float(v) for v in x]
    if any(not 0.0 <= v <= 1.0 for v in x):
        raise ValueError("entries must lie in [0, 1]")
    n = len(x)
    prefix = [1.0] * (n + 1)
    for j in range(n):
        prefix[j + 1] = prefix[j] * (1.0 - x[j])
    suffix = [1.0] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] * (1.0 - x[j])
    return prefix[n] + sum(x[j] * prefix[j] * suffix[j + 1] for j in range(n))


def f_n_minimum_closed_form(n):
    """(1 - 1/n)^n + (1 - 1/n)^(n-1), the minimum of f_n over the simplex."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (1.0 - 1.0 / n) ** n + (1.0 - 1.0 / n) ** (n - 1)


def minimize_f_n(n, grid_steps=14):
    """Numerically minimize f_n over {x >= 0, sum x <= 1}.

    Simplex grid search followed by Nelder-Mead refinement; intended for
    n <= 6 where the grid stays small. For n = 1 the objective is identically
    1, so the uniform point is reported.

    Returns (argmin tuple, minimum value).
    """
    if not 1 <= n <= 6:
        raise ValueError("minimize_f_n supports 1 <= n <= 6")
    if n == 1:
        return (1.0,), 1.0

    best_x, best_v = None, math.inf
    step = 1.0 / grid_steps

    def walk(prefix, remaining):
        nonlocal best_x, best_v
        if len(prefix) == n:
            v = f_n(prefix)
            if v < best_v:
                best_v, best_x = v, list(prefix)
            return
        for k in range(remaining + 1):
            walk(prefix + [k * step], remaining - k)

    walk([], grid_steps)

    penalty_scale = 10.0

    def objective(z):
        clipped = np.clip(z, 0.0, 1.0)
        excess = max(0.0, float(np.sum(clipped)) - 1.0)
        out_of_box = float(np.sum(np.abs(z - clipped)))
        return f_n(clipped) + penalty_scale * (excess + out_of_box)

    # the landscape is very flat near the optimum; restart until converged
    point = np.asarray(best_x)
    value = f_n(np.clip(point, 0.0, 1.0))
    for _ in range(12):
        result = optimize.minimize(
            objective,
            point,
            method="Nelder-Mead",
            options={"fatol": 1e-14, "xatol": 1e-12, "maxiter": 50_000, "maxfev": 50_000},
        )
        point = result.x
        if value - result.fun < 1e-13:
            value = min(value, result.fun)
            break
        value = result.fun
    x = np.clip(point, 0.0, 1.0)
    total = float(np.sum(x))
    if total > 1.0:
        x = x / total
    return tuple(float(v) for v in x), f_n(x)


def counting_selectability_uniform(probs, n):
    """Exact conditional selectability of the last element for a counting
    strategy on the uniform instance x_i = 1/n.

    Sums q_{k-1} * prod_{i<k}(1-p_i) * p_k where q_k is the binomial
    probability of exactly k active predecessors.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    probs = [float(p) for p in probs]
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError("acceptance probabilities must lie in [0, 1]")
    q = (1.0 - 1.0 / n) ** (n - 1)  # exactly 0 of the n-1 predecessors active
    survive = 1.0
    total = 0.0
    for k in range(1, min(len(probs), n) + 1):
        total += q * survive * probs[k - 1]
        survive *= 1.0 - probs[k - 1]
        if k < n:
            q *= (n - k) / (k * (n - 1.0))
    return total


def b_greedy_lower_bound(b):
    """Closed-form laminar selectability lower bound b(1 - g/(1-g)) with
    g = b e^(1-b); requires g < 1. The bound can be vacuous (negative)."""
    b = float(b)
    g = b * math.exp(1.0 - b)
    if g >= 1.0:
        raise ValueError(f"bound undefined: b*exp(1-b) = {g} >= 1")
    return b * (1.0 - g / (1.0 - g))


def uniform_rank_bound(b, r):
    """Selectability lower bound b(1 - (b e^(1-b))^r) for uniform rank-r
    matroids; increasing in r with limit b."""
    b = float(b)
    if not 0.0 < b < 1.0:
        raise ValueError("b must lie in (0, 1)")
    if r < 0:
        raise ValueError("r must be nonnegative")
    g = b * math.exp(1.0 - b)
    return b * (1.0 - g**r)


def rcrs_selectability_estimate(matroid, b, x, trials, seed, workers=1):
    """Monte Carlo per-element selectability of the fixed-probability policy
    under uniformly random arrival order, with Wilson confidence intervals."""
    from .evaluation import estimate_selectability

    return estimate_selectability(
        BGreedyScheme(b), matroid, x, order="random", trials=trials, seed=seed, workers=workers
    )


SCHEME_KINDS = {
    "greedy": GreedyScheme,
    "accept_second": AcceptSecondScheme,
    "even_mixture": EvenMixtureScheme,
    "counting": CountingScheme,
    "b_greedy": BGreedyScheme,
    "null": NullScheme,
}


def scheme_from_config(config):
    kind = config.get("kind")
    if kind not in SCHEME_KINDS:
        raise ValueError(f"unknown scheme kind: {kind!r}")
    if kind == "counting":
        return CountingScheme(config["probs"])
    if kind == "b_greedy":
        return BGreedyScheme(config["b"])
    return SCHEME_KINDS[kind]()
