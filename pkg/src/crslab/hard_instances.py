"""Adversarial instances on which no oblivious scheme keeps every element.

Both constructions hide a distinguished block of always-active elements
inside a uniform background: the complete bipartite graph K_{N,M} for graphic
matroids (the block is the star of one left vertex) and an N-blocks-of-M
bipartite gadget for transversal matroids. Under the uniform point every
block goes fully active with probability M^-M, and the rank of all fully
active blocks together collapses to (number of blocks) + M - 1, which caps
any scheme's balancedness at 1/M + M^(M-1)(M-1)/N.

All polytope points carry explicit convex-decomposition certificates that are
verified at construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .distributions import PHASE_HARD, stream
from .matroids import GraphicMatroid, TransversalMatroid, verify_decomposition
from .schemes import Scheme, SchemeRun


@dataclass(frozen=True)
class HardInstance:
    """A matroid with N disjoint blocks of M elements, the probe points x^i
    (all-ones on block i, 1/M elsewhere), and the uniform point."""

    n_blocks: int
    block_size: int
    matroid: object
    blocks: tuple  # tuple of element tuples
    kind: str

    @property
    def n(self):
        return self.matroid.n

    def x_point(self, i):
        x = [1.0 / self.block_size] * self.n
        for e in self.blocks[i]:
            x[e] = 1.0
        return x

    def uniform_point(self):
        return [1.0 / self.block_size] * self.n

    def decomposition_parts(self, i):
        raise NotImplementedError

    def x_certificate(self, i):
        parts = self.decomposition_parts(i)
        return parts, [1.0 / self.block_size] * len(parts)

    def uniform_certificate(self):
        """The uniform point is an equal subconvex mix of every probe's parts:
        each element lands in exactly N + M - 1 of the N*M parts."""
        parts = []
        for i in range(self.n_blocks):
            parts.extend(self.decomposition_parts(i))
        weight = 1.0 / (self.block_size * (self.n_blocks + self.block_size - 1))
        return parts, [weight] * len(parts)

    def verify_certificates(self, probes=None):
        probes = range(self.n_blocks) if probes is None else probes
        for i in probes:
            parts, weights = self.x_certificate(i)
            verify_decomposition(self.matroid, self.x_point(i), parts, weights)
        parts, weights = self.uniform_certificate()
        verify_decomposition(self.matroid, self.uniform_point(), parts, weights)
        return True


class GraphicHardInstance(HardInstance):
    def decomposition_parts(self, i):
        """Spanning trees: the star of left vertex i plus the star of right
        vertex j, for each j."""
        return [self._tree(i, j) for j in range(self.block_size)]

    def _tree(self, i, j):
        star_u = set(self.blocks[i])
        star_v = {k * self.block_size + j for k in range(self.n_blocks)}
        return sorted(star_u | star_v)


class TransversalHardInstance(HardInstance):
    def decomposition_parts(self, i):
        """Independent sets: block i plus the k-th element of every block."""
        out = []
        for k in range(self.block_size):
            part = set(self.blocks[i])
            part.update(b[k] for b in self.blocks)
            out.append(sorted(part))
        return out


def build_graphic_instance(n_blocks, block_size, verify=True):
    """Complete bipartite graph instance: edge (i, j) has element id
    i*block_size + j; block i is the star of left vertex i."""
    if n_blocks < 1 or block_size < 1:
        raise ValueError("need at least one block and one element per block")
    edges = [
        (i, n_blocks + j)
        for i in range(n_blocks)
        for j in range(block_size)
    ]
    matroid = GraphicMatroid(n_blocks + block_size, edges)
    blocks = tuple(
        tuple(i * block_size + j for j in range(block_size)) for i in range(n_blocks)
    )
    inst = GraphicHardInstance(
        n_blocks=n_blocks, block_size=block_size, matroid=matroid, blocks=blocks,
        kind="graphic",
    )
    if verify:
        inst.verify_certificates(probes=range(min(n_blocks, 8)))
    return inst


def build_transversal_instance(n_blocks, block_size, verify=True):
    """N blocks of M left vertices; right side has one vertex per block plus
    M-1 shared vertices, so any union of b full blocks has rank b + M - 1."""
    if n_blocks < 1 or block_size < 1:
        raise ValueError("need at least one block and one element per block")
    shared = [n_blocks + k for k in range(block_size - 1)]
    adjacency = []
    for i in range(n_blocks):
        for _ in range(block_size):
            adjacency.append(sorted([i] + shared))
    matroid = TransversalMatroid(adjacency, num_right=n_blocks + block_size - 1)
    blocks = tuple(
        tuple(i * block_size + j for j in range(block_size)) for i in range(n_blocks)
    )
    inst = TransversalHardInstance(
        n_blocks=n_blocks, block_size=block_size, matroid=matroid, blocks=blocks,
        kind="transversal",
    )
    if verify:
        inst.verify_certificates(probes=range(min(n_blocks, 8)))
    return inst


def build_hard_instance(kind, n_blocks, block_size, verify=True):
    if kind == "graphic":
        return build_graphic_instance(n_blocks, block_size, verify=verify)
    if kind == "transversal":
        return build_transversal_instance(n_blocks, block_size, verify=verify)
    raise ValueError(f"unknown hard instance kind: {kind!r}")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FullBlockStats:
    """Distribution of the number of fully active blocks under the uniform
    point, with the per-trial rank-identity audit."""

    trials: int
    mean_size: float
    expected_mean: float
    sd_size: float
    rank_identity_failures: int
    empty_trials: int
    histogram: tuple  # (size, count) pairs

    @property
    def z_score(self):
        if self.sd_size == 0.0:
            return 0.0
        return (self.mean_size - self.expected_mean) / (self.sd_size / self.trials**0.5)

    def summary(self):
        return {
            "trials": self.trials,
            "mean_full_blocks": self.mean_size,
            "expected_mean": self.expected_mean,
            "sd": self.sd_size,
            "z_score": self.z_score,
            "rank_identity_failures": self.rank_identity_failures,
            "empty_trials": self.empty_trials,
            "histogram": [list(h) for h in self.histogram],
        }


def full_block_experiment(inst, trials, seed):
    """Sample the uniform point's active sets; count fully active blocks and
    check rank(union of their blocks) = count + M - 1 on every nonempty
    trial (empty trials have rank 0)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = stream(seed, PHASE_HARD)
    n_blocks, m = inst.n_blocks, inst.block_size
    p_full = float(m) ** (-m)
    sizes = np.empty(trials, dtype=np.int64)
    failures = 0
    chunk = 4096
    done = 0
    block_elements = [list(b) for b in inst.blocks]
    while done < trials:
        rows = min(chunk, trials - done)
        marks = rng.random((rows, n_blocks, m)) < 1.0 / m
        full = marks.all(axis=2)
        sizes[done : done + rows] = full.sum(axis=1)
        for r in range(rows):
            active_blocks = np.flatnonzero(full[r])
            if active_blocks.size == 0:
                continue
            union = [e for b in active_blocks for e in block_elements[b]]
            expected_rank = active_blocks.size + m - 1
            if inst.matroid.rank(union) != expected_rank:
                failures += 1
        done += rows
    values, counts = np.unique(sizes, return_counts=True)
    return FullBlockStats(
        trials=trials,
        mean_size=float(sizes.mean()),
        expected_mean=n_blocks * p_full,
        sd_size=float(sizes.std(ddof=1)) if trials > 1 else 0.0,
        rank_identity_failures=failures,
        empty_trials=int((sizes == 0).sum()),
        histogram=tuple((int(v), int(c)) for v, c in zip(values, counts)),
    )


@dataclass(frozen=True)
class ConditionalCheck:
    exact: bool
    tv_distance: float | None
    p_value: float | None
    observed: int
    ok: bool

    @property
    def insufficient(self):
        """The conditioning event was never observed; no comparison was made."""
        return not self.exact and self.observed == 0

    def summary(self):
        return {
            "exact": self.exact,
            "tv_distance": self.tv_distance,
            "p_value": self.p_value,
            "observed": self.observed,
            "ok": self.ok,
            "insufficient": self.insufficient,
        }


def conditional_identity_check(inst, i, trials=0, seed=0, condition_on=None):
    """Compare the law of the uniform point's active set conditioned on block
    ``condition_on`` (default i) being fully active against the law of the
    probe point x^i.

    Small instances (<= 12 elements) are enumerated exactly (total variation
    distance must vanish); larger ones use rejection sampling and a
    chi-square two-sample test at p > 0.01.
    """
    condition_on = i if condition_on is None else condition_on
    n = inst.n
    m = inst.block_size
    p_bg = 1.0 / m
    block = set(inst.blocks[condition_on])
    x_i = inst.x_point(i)

    if n <= 12:
        # conditional law straight from the joint: P(pattern)/P(block active)
        tv = 0.0
        block_mass = p_bg ** len(block)
        for mask in range(1 << n):
            pattern = [(mask >> e) & 1 for e in range(n)]
            p_joint = 1.0
            for e in range(n):
                p_joint *= p_bg if pattern[e] else 1.0 - p_bg
            p_cond = p_joint / block_mass if all(pattern[e] for e in block) else 0.0
            q = 1.0
            for e in range(n):
                q *= x_i[e] if pattern[e] else 1.0 - x_i[e]
            tv += abs(p_cond - q)
        tv /= 2.0
        return ConditionalCheck(
            exact=True, tv_distance=tv, p_value=None, observed=1 << n, ok=tv < 1e-12
        )

    if trials < 1:
        raise ValueError("sampled comparison needs trials >= 1")
    rng = stream(seed, PHASE_HARD, 1)
    witness = [e for e in range(n) if e not in block][:10]
    cond_counts = np.zeros(1 << len(witness), dtype=np.int64)
    probe_counts = np.zeros(1 << len(witness), dtype=np.int64)
    observed = 0
    for _ in range(trials):
        marks = rng.random(n) < p_bg
        if all(marks[e] for e in block):
            observed += 1
            cell = sum(1 << k for k, e in enumerate(witness) if marks[e])
            cond_counts[cell] += 1
        marks = rng.random(n) < np.asarray(x_i)
        cell = sum(1 << k for k, e in enumerate(witness) if marks[e])
        probe_counts[cell] += 1
    if observed == 0:
        return ConditionalCheck(
            exact=False, tv_distance=None, p_value=None, observed=0, ok=False
        )
    keep = (cond_counts + probe_counts) > 0
    table = np.vstack([cond_counts[keep], probe_counts[keep]])
    p_value = float(scipy_stats.chi2_contingency(table)[1]) if keep.sum() > 1 else 1.0
    return ConditionalCheck(
        exact=False, tv_distance=None, p_value=p_value, observed=observed,
        ok=p_value > 0.01,
    )


def balancedness_upper_bound(n_blocks, block_size, samples=0):
    """Cap on any oblivious scheme's balancedness:
    1/M + M^((s+1)M - 1) (M-1) / N for s observation samples; the counting
    argument's acceptance probability per block drops to M^-(s+1)M."""
    if n_blocks < 1 or block_size < 1:
        raise ValueError("need positive block counts")
    if samples < 0:
        raise ValueError("samples must be nonnegative")
    m, n = float(block_size), float(n_blocks)
    return 1.0 / m + m ** ((samples + 1) * block_size - 1) * (m - 1.0) / n


class TreeDecompositionControl(Scheme):
    """Non-oblivious control: knowing the probe's convex decomposition, pick
    one part at random and accept its active elements. Probe-block elements
    are always active and in every part, so they are kept with probability 1,
    beating the oblivious cap."""

    kind = "tree_control"

    def __init__(self, inst, probe):
        self.parts = [frozenset(p) for p in inst.decomposition_parts(probe)]

    def run(self, matroid, order, active, rng):
        part = self.parts[int(rng.integers(len(self.parts)))]
        accepted = frozenset(part & set(active))
        return SchemeRun(accepted=accepted, decisions=tuple((e, True) for e in accepted))

    def run_batch(self, matroid, order, active, rng):
        rows = active.shape[0]
        masks = np.zeros((len(self.parts), active.shape[1]), dtype=bool)
        for k, part in enumerate(self.parts):
            masks[k, sorted(part)] = True
        choice = rng.integers(len(self.parts), size=rows)
        return active & masks[choice]


@dataclass(frozen=True)
class StressReport:
    """Worst probe-element balancedness of a scheme across probes, against
    the impossibility cap."""

    min_balancedness: float
    min_ci: tuple
    bound: float
    per_probe: tuple  # (probe, worst estimate among its block elements)
    trials: int

    def summary(self):
        return {
            "min_balancedness": self.min_balancedness,
            "min_ci": list(self.min_ci),
            "upper_bound": self.bound,
            "per_probe": [list(p) for p in self.per_probe],
            "trials": self.trials,
        }


def stress_scheme_on_hard_instance(scheme, inst, trials, seed, probes=None, workers=1):
    """Run the scheme on R(x^i) for each probed i; report the minimum over
    probed block elements of P(accepted | active). ``trials`` counts per
    probe. Probes default to every block when N <= 16, else the first 8."""
    from .evaluation import estimate_selectability

    if probes is None:
        probes = range(inst.n_blocks) if inst.n_blocks <= 16 else range(8)
    per_probe = []
    worst = None
    for i in probes:
        report = estimate_selectability(
            scheme,
            inst.matroid,
            inst.x_point(i),
            order="identity",
            trials=trials,
            seed=seed + i,
            workers=workers,
            check_membership=False,
        )
        for e in inst.blocks[i]:
            s = report.stats(e)
            if s.insufficient:
                continue
            if worst is None or s.estimate < worst[0]:
                worst = (s.estimate, (s.ci_lo, s.ci_hi))
        block_vals = [report.stats(e).estimate for e in inst.blocks[i]]
        per_probe.append((int(i), min(v for v in block_vals if v is not None)))
    bound = balancedness_upper_bound(inst.n_blocks, inst.block_size)
    return StressReport(
        min_balancedness=worst[0],
        min_ci=worst[1],
        bound=bound,
        per_probe=tuple(per_probe),
        trials=trials,
    )
