"""Monte Carlo measurement engine.

Per-element selectability estimation with Wilson confidence intervals, exact
small-instance enumeration of scheme laws, and competitive-ratio aggregation
with bootstrap intervals.

Trials are split into fixed-size chunks; chunk c draws from the stream
(seed, phase, c), so reports are bit-identical across reruns and across any
worker count. Chunk results are merged by commutative integer sums.
"""

from __future__ import annotations

import csv
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    PHASE_BOOTSTRAP,
    PHASE_SELECTABILITY,
    sample_active_matrix,
    stream,
)
from .errors import IndependenceViolation
from .matroids import LaminarMatroid, UniformMatroid, polytope_membership
from .schemes import ArrivalOrder, make_order

CHUNK_SIZE = 8192


def wilson_interval(successes, count, z=1.96):
    """95% Wilson score interval for a binomial proportion; asymmetric, so it
    stays informative for estimates near 0."""
    if count == 0:
        return (0.0, 1.0)
    phat = successes / count
    zz = z * z
    denom = 1.0 + zz / count
    center = (phat + zz / (2 * count)) / denom
    half = z * math.sqrt(phat * (1 - phat) / count + zz / (4 * count * count)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class ElementStats:
    element: int
    active: int
    accepted: int
    estimate: float | None
    ci_lo: float | None
    ci_hi: float | None

    @property
    def insufficient(self):
        return self.active == 0


@dataclass(frozen=True)
class TrialReport:
    """Per-element selectability estimates plus experiment aggregates."""

    elements: tuple
    trials: int
    seed: int
    warnings: tuple = ()
    wall_time: float = 0.0

    @property
    def min_estimate(self):
        values = [e.estimate for e in self.elements if not e.insufficient]
        return min(values) if values else None

    def stats(self, element):
        return self.elements[element]

    def csv_rows(self):
        yield ("element", "active", "accepted", "estimate", "ci_lo", "ci_hi")
        for e in self.elements:
            if e.insufficient:
                yield (e.element, e.active, e.accepted, "insufficient data", "", "")
            else:
                yield (e.element, e.active, e.accepted, repr(e.estimate), repr(e.ci_lo), repr(e.ci_hi))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())

    def summary(self):
        return {
            "trials": self.trials,
            "seed": self.seed,
            "min_estimate": self.min_estimate,
            "insufficient": [e.element for e in self.elements if e.insufficient],
            "warnings": list(self.warnings),
        }


def _batch_independent(matroid, accepted):
    """Cheap vectorized independence check where the family allows it."""
    if isinstance(matroid, UniformMatroid):
        return bool((accepted.sum(axis=1) <= matroid.r).all())
    if isinstance(matroid, LaminarMatroid):
        return all(
            (accepted[:, sorted(s)].sum(axis=1) <= cap).all()
            for s, cap in zip(matroid.sets, matroid.capacities)
        )
    return all(
        matroid.is_independent(np.flatnonzero(row).tolist())
        for row in accepted
        if row.any()
    )


def _chunk_sizes(trials):
    sizes = [CHUNK_SIZE] * (trials // CHUNK_SIZE)
    if trials % CHUNK_SIZE:
        sizes.append(trials % CHUNK_SIZE)
    return sizes


def _selectability_chunk(args):
    scheme, matroid, x, order_spec, chunk_index, rows, seed = args
    rng = stream(seed, PHASE_SELECTABILITY, chunk_index)
    n = len(x)
    active = sample_active_matrix(x, rng, rows)
    if isinstance(order_spec, str):  # "random": fresh permutation per trial
        order = np.argsort(rng.random((rows, n)), axis=1)
    else:
        order = np.asarray(order_spec)
    accepted = scheme.run_batch(matroid, order, active, rng)
    if accepted is None:
        accepted = np.zeros_like(active)
        for t in range(rows):
            perm = order[t] if order.ndim == 2 else order
            active_set = frozenset(np.flatnonzero(active[t]).tolist())
            run = scheme.run(matroid, [int(e) for e in perm], active_set, rng)
            for e in run.accepted:
                accepted[t, e] = True
    if (accepted & ~active).any():
        raise IndependenceViolation("scheme accepted an inactive element")
    if not _batch_independent(matroid, accepted):
        raise IndependenceViolation("scheme produced a dependent accepted set")
    return accepted.sum(axis=0, dtype=np.int64), active.sum(axis=0, dtype=np.int64)


def estimate_selectability(
    scheme,
    matroid,
    x,
    order="identity",
    trials=10_000,
    seed=0,
    workers=1,
    target=None,
    check_membership=True,
):
    """Per-element P(accepted | active) with Wilson CIs.

    ``order`` is an order-kind string ("identity", "reverse", "descending_x",
    "target_last", "random") or an explicit ArrivalOrder. The estimate is the
    conditional ratio accepted/active; elements never active are reported as
    insufficient data. Deterministic in (seed, trials) for any worker count.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    x = [float(v) for v in x]
    if len(x) != matroid.n:
        raise ValueError("one marginal per ground element required")
    warnings = []
    if check_membership:
        try:
            if not polytope_membership(matroid, x):
                raise ValueError("x lies outside the matroid polytope")
        except ValueError as exc:
            if "unsupported size" not in str(exc):
                raise
            warnings.append(f"membership unchecked: {exc}")
    tag = scheme.compatibility_warning(matroid)
    if tag:
        warnings.append(tag)

    if isinstance(order, ArrivalOrder):
        order_spec = np.asarray(order.permutation)
    elif order == "random":
        order_spec = "random"
    else:
        order_spec = np.asarray(make_order(order, matroid.n, x=x, target=target).permutation)

    started = time.perf_counter()
    jobs = [
        (scheme, matroid, x, order_spec, idx, rows, seed)
        for idx, rows in enumerate(_chunk_sizes(trials))
    ]
    accepted = np.zeros(matroid.n, dtype=np.int64)
    active = np.zeros(matroid.n, dtype=np.int64)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_selectability_chunk, jobs))
    else:
        results = [_selectability_chunk(j) for j in jobs]
    for acc, act in results:
        accepted += acc
        active += act

    elements = []
    for i in range(matroid.n):
        if active[i] == 0:
            elements.append(ElementStats(i, 0, 0, None, None, None))
        else:
            est = float(accepted[i] / active[i])
            lo, hi = wilson_interval(int(accepted[i]), int(active[i]))
            elements.append(ElementStats(i, int(active[i]), int(accepted[i]), est, lo, hi))
    return TrialReport(
        elements=tuple(elements),
        trials=trials,
        seed=seed,
        warnings=tuple(warnings),
        wall_time=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# exact enumeration oracle
# ---------------------------------------------------------------------------


def _exact_law(component, matroid, order, active):
    """Acceptance probability per element for a fixed active set, by dynamic
    programming over accepted-set states."""
    states = {frozenset(): 1.0}
    law = defaultdict(float)
    seen = 0
    for e in order:
        if e not in active:
            continue
        seen += 1
        new_states = defaultdict(float)
        for state, pr in states.items():
            p = component.step_accept_probability(matroid, state, e, seen)
            if p > 0.0:
                law[e] += pr * p
                new_states[state | {e}] += pr * p
            if p < 1.0:
                new_states[state] += pr * (1.0 - p)
        states = dict(new_states)
    return law


def exact_selectability(scheme, matroid, x, order=None):
    """Exact conditional acceptance probabilities, summing the scheme's law
    over all activity patterns weighted by prod x_i (1-x_i).

    Exponential in n (guarded at n <= 16); the independent oracle backing the
    Monte Carlo estimates.
    """
    n = matroid.n
    if n > 16:
        raise ValueError("exact enumeration supports n <= 16")
    x = [float(v) for v in x]
    if isinstance(order, ArrivalOrder):
        order = list(order.permutation)
    elif order is None:
        order = list(range(n))
    values = []
    for i in range(n):
        others = [j for j in order if j != i]
        total = 0.0
        for mask in range(1 << len(others)):
            weight = 1.0
            active = {i}
            for bit, j in enumerate(others):
                if mask >> bit & 1:
                    weight *= x[j]
                    active.add(j)
                else:
                    weight *= 1.0 - x[j]
            if weight == 0.0:
                continue
            accept_prob = sum(
                w * _exact_law(comp, matroid, order, active).get(i, 0.0)
                for w, comp in scheme.components()
            )
            total += weight * accept_prob
        values.append(total)
    return values


# ---------------------------------------------------------------------------
# competitive ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioReport:
    ratio: float
    ci_lo: float
    ci_hi: float
    trials: int
    mean_alg: float
    mean_opt: float
    extras: dict = field(default_factory=dict)

    def summary(self):
        out = {
            "ratio": self.ratio,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "trials": self.trials,
            "mean_alg": self.mean_alg,
            "mean_opt": self.mean_opt,
        }
        out.update(self.extras)
        return out


def ratio_report(alg_values, opt_values, seed=0, n_boot=1000, extras=None):
    """(sum alg)/(sum opt) with a percentile bootstrap CI over trial pairs;
    bootstrap resampling keeps alg and opt paired since they are dependent."""
    alg = np.asarray(alg_values, dtype=float)
    opt = np.asarray(opt_values, dtype=float)
    if alg.shape != opt.shape or alg.ndim != 1 or alg.size == 0:
        raise ValueError("need matching nonempty alg/opt sample vectors")
    total_opt = float(opt.sum())
    point = float(alg.sum()) / total_opt if total_opt > 0 else 0.0
    rng = stream(seed, PHASE_BOOTSTRAP)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, alg.size, alg.size)
        o = opt[idx].sum()
        boots[b] = alg[idx].sum() / o if o > 0 else 0.0
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return RatioReport(
        ratio=point,
        ci_lo=float(lo),
        ci_hi=float(hi),
        trials=alg.size,
        mean_alg=float(alg.mean()),
        mean_opt=float(opt.mean()),
        extras=dict(extras or {}),
    )
