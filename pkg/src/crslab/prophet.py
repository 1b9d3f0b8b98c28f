"""Sample-based prophet pipeline for matroids.

Stage one learns per-element quantile thresholds for the exchange threshold
tau_i (the smallest value in the best independent set avoiding i that i can
replace) from i.i.d. sample vectors. Stage two converts realized values into
independent "active" marks through a bucketed activation rule and feeds them
to an oblivious online contention-resolution policy. Learning and evaluation
use disjoint seeded streams; a learned table is treated as a set of fixed
constants afterwards.

Values are floats, or (value, tiebreak) pairs for jittered discrete
distributions; all comparisons go through lexicographic keys so they are
almost surely strict.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .distributions import (
    INF_KEY,
    PHASE_LEARN,
    PHASE_MARGINALS,
    PHASE_PROPHET,
    PHASE_VERIFY,
    ZERO_KEY,
    magnitude,
    sample_values,
    sample_values_matrix,
    sort_key,
    stream,
)
from .errors import IndependenceViolation
from .evaluation import ratio_report, wilson_interval
from .matroids import UniformMatroid, polytope_membership


# ---------------------------------------------------------------------------
# optimum and exchange thresholds
# ---------------------------------------------------------------------------


def opt_value(matroid, values):
    """Greedy maximum-value independent set and its total value.

    Elements are processed in descending value order (jitter keys break ties,
    then the element index), so the optimum is deterministic. Zero-value
    elements are included (padding the set toward a basis without changing
    its value); strictly negative ones never are.
    """
    order = sorted(range(matroid.n), key=lambda i: (_neg(sort_key(values[i])), i))
    builder = matroid.builder()
    for e in order:
        if sort_key(values[e]) < ZERO_KEY:
            break
        builder.try_add(e)
    chosen = frozenset(builder.members)
    return chosen, sum(magnitude(values[e]) for e in chosen)


def _neg(key):
    return (-key[0], -key[1])


def tau_key(matroid, values, i):
    """Exchange threshold of element i against values on the other elements,
    as a comparison key. The entry values[i] is ignored.

    Returns ZERO_KEY when the best independent set avoiding i is not a basis
    (a zero-value dummy completes it and i can take the dummy's slot), and
    INF_KEY when i is a loop and no exchange exists.
    """
    order = sorted(
        (j for j in range(matroid.n) if j != i),
        key=lambda j: (_neg(sort_key(values[j])), j),
    )
    builder = matroid.builder()
    for e in order:
        if sort_key(values[e]) < ZERO_KEY:
            break
        builder.try_add(e)
    opt_i = frozenset(builder.members)
    if len(opt_i) < matroid.full_rank and matroid.is_independent(opt_i | {i}):
        return ZERO_KEY
    best = None
    for j in opt_i:
        if matroid.is_independent((opt_i - {j}) | {i}):
            k = sort_key(values[j])
            if best is None or k < best:
                best = k
    return best if best is not None else INF_KEY


def tau_keys_all(matroid, values):
    """Exchange-threshold keys for every element under one value vector;
    shares the global sort across elements."""
    keyed = sorted(range(matroid.n), key=lambda j: (_neg(sort_key(values[j])), j))
    out = []
    for i in range(matroid.n):
        builder = matroid.builder()
        for e in keyed:
            if sort_key(values[e]) < ZERO_KEY:
                break
            if e != i:
                builder.try_add(e)
        opt_i = frozenset(builder.members)
        if len(opt_i) < matroid.full_rank and matroid.is_independent(opt_i | {i}):
            out.append(ZERO_KEY)
            continue
        best = None
        for j in opt_i:
            if matroid.is_independent((opt_i - {j}) | {i}):
                k = sort_key(values[j])
                if best is None or k < best:
                    best = k
        out.append(best if best is not None else INF_KEY)
    return out


def compute_tau(matroid, values, i):
    """Exchange threshold of element i; the entry values[i] is ignored.

    Returns a float when all values are floats, otherwise a (value, tiebreak)
    key. Element i enters the greedy optimum iff its value exceeds this
    threshold (strictly; equalities occur with probability zero).
    """
    key = tau_key(matroid, values, i)
    if any(isinstance(v, tuple) for v in values):
        return key
    return key[0]


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


def bucket_count(epsilon):
    """floor(log_{1+eps}(1/eps)) buckets; requires at least one."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    m = int(math.floor(math.log(1.0 / epsilon) / math.log1p(epsilon)))
    if m < 1:
        raise ValueError(f"epsilon = {epsilon} leaves no quantile buckets")
    return m


def bucket_probabilities(epsilon):
    """Activation probabilities p_k = eps(1+eps)^k - eps^2 for 0 <= k < m."""
    m = bucket_count(epsilon)
    return tuple(epsilon * (1 + epsilon) ** k - epsilon**2 for k in range(m))


def quantile_indices(epsilon, n_samples):
    """1-based order-statistic indices ceil(eps(1+eps)^k N); the top index
    must stay within the sample."""
    m = bucket_count(epsilon)
    idx = [math.ceil(epsilon * (1 + epsilon) ** k * n_samples) for k in range(m)]
    if idx and idx[-1] > n_samples:
        raise ValueError(f"N = {n_samples} too small for the top index {idx[-1]}")
    if idx and idx[0] < 1:
        raise ValueError("N too small: bottom quantile index underflows")
    return idx


def default_sample_count(n, epsilon, c=1.0):
    """Sample-complexity default ceil(c * ln(2 n m / eps) / eps^4); the true
    constant is not pinned down, so c is exposed and sufficiency is checked
    empirically by verify_good_thresholds."""
    m = bucket_count(epsilon)
    return max(1, math.ceil(c * math.log(2.0 * n * m / epsilon) * epsilon**-4))


@dataclass(frozen=True)
class ThresholdTable:
    """Per-element quantile thresholds plus bucket activation probabilities.

    thresholds[i] lists T_0 <= ... <= T_{m-1} as comparison keys, with an
    implicit T_m = infinity. Once built the table is a set of constants; the
    source stream tag exists so evaluation streams can be proven disjoint.
    """

    epsilon: float
    n: int
    thresholds: tuple  # per element: tuple of m keys
    probs: tuple
    sample_count: int
    source_stream: tuple

    @property
    def buckets(self):
        return len(self.probs)

    def bucket_of(self, i, value):
        """Bucket index k with value in [T_k, T_{k+1}), or -1 below T_0."""
        return bisect_right(self.thresholds[i], sort_key(value)) - 1

    def activation_probability(self, i, value):
        k = self.bucket_of(i, value)
        return 0.0 if k < 0 else self.probs[k]

    def float_thresholds(self):
        """(n, m) float array when every key is a plain magnitude (continuous
        pipeline); None when jitter tiebreaks are in play.

        A zero-dummy key collapses to 0.0: any nonnegative float value
        reaches that bucket, matching the lexicographic comparison."""
        flat = []
        for row in self.thresholds:
            if any(t[1] not in (0.0, -math.inf) for t in row):
                return None
            flat.append([t[0] for t in row])
        return np.asarray(flat)

    def corrupted(self, value=INF_KEY):
        """Copy with every threshold replaced (e.g. all-infinite => nothing
        ever activates); a control object for tests and experiments."""
        rows = tuple(tuple(value for _ in row) for row in self.thresholds)
        return ThresholdTable(
            epsilon=self.epsilon,
            n=self.n,
            thresholds=rows,
            probs=self.probs,
            sample_count=self.sample_count,
            source_stream=("corrupted",),
        )


def activation_probability(table, i, value):
    """Module-level convenience mirroring ThresholdTable.activation_probability."""
    return table.activation_probability(i, value)


def learn_thresholds(matroid, dists, epsilon, n_samples, seed):
    """Learn the threshold table from n_samples i.i.d. value vectors.

    T_k^i is the ceil(eps(1+eps)^k N)-th smallest of the N sampled exchange
    thresholds for element i.
    """
    if len(dists) != matroid.n:
        raise ValueError("one distribution per element required")
    idx = quantile_indices(epsilon, n_samples)
    probs = bucket_probabilities(epsilon)
    rng = stream(seed, PHASE_LEARN)
    taus = [[] for _ in range(matroid.n)]
    for _ in range(n_samples):
        values = sample_values(dists, rng)
        for i, key in enumerate(tau_keys_all(matroid, values)):
            taus[i].append(key)
    rows = []
    for i in range(matroid.n):
        taus[i].sort()
        rows.append(tuple(taus[i][j - 1] for j in idx))
    return ThresholdTable(
        epsilon=float(epsilon),
        n=matroid.n,
        thresholds=tuple(rows),
        probs=probs,
        sample_count=n_samples,
        source_stream=(int(seed), PHASE_LEARN),
    )


def exact_quantile_thresholds(matroid, dist, epsilon):
    """Threshold table from the true tau distribution, for a uniform rank-r
    matroid with i.i.d. continuous values.

    tau_i is then the r-th largest of n-1 draws; its CDF is a binomial tail
    in the value CDF, inverted here by bisection. T_k sits at the exact
    eps(1+eps)^k quantile, so Pr[T_k > tau] - p_k = eps^2 by construction:
    the independent oracle against which learned tables are judged.
    """
    if not isinstance(matroid, UniformMatroid):
        raise ValueError("closed-form tau quantiles need a uniform matroid")
    n, r = matroid.n, matroid.r
    if not 1 <= r < n:
        raise ValueError("need 1 <= r < n so tau has a continuous law")
    if not dist.continuous:
        raise ValueError("exact quantiles need a continuous value distribution")
    m = bucket_count(epsilon)
    probs = bucket_probabilities(epsilon)

    def tau_cdf_in_u(u):
        # P(tau <= t) with u = F(t): at most r-1 of n-1 draws exceed t
        s = 1.0 - u
        total = 0.0
        for j in range(r):
            total += math.comb(n - 1, j) * s**j * (1.0 - s) ** (n - 1 - j)
        return total

    row = []
    for k in range(m):
        q = epsilon * (1 + epsilon) ** k
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if tau_cdf_in_u(mid) < q:
                lo = mid
            else:
                hi = mid
        row.append((float(dist.ppf(0.5 * (lo + hi))), 0.0))
    rows = tuple(tuple(row) for _ in range(n))
    return ThresholdTable(
        epsilon=float(epsilon),
        n=n,
        thresholds=rows,
        probs=probs,
        sample_count=0,
        source_stream=("exact",),
    )


# ---------------------------------------------------------------------------
# goodness verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BucketCheck:
    element: int
    bucket: int
    target: float  # p_k
    estimate: float
    ci_lo: float
    ci_hi: float
    ok: bool


@dataclass(frozen=True)
class GoodnessReport:
    rows: tuple
    trials: int
    epsilon: float

    @property
    def all_good(self):
        return all(r.ok for r in self.rows)

    def csv_rows(self):
        yield ("element", "bucket", "p_k", "estimate", "ci_lo", "ci_hi", "ok")
        for r in self.rows:
            yield (r.element, r.bucket, repr(r.target), repr(r.estimate), repr(r.ci_lo), repr(r.ci_hi), int(r.ok))

    def summary(self):
        return {
            "all_good": self.all_good,
            "trials": self.trials,
            "epsilon": self.epsilon,
            "flagged": [[r.element, r.bucket] for r in self.rows if not r.ok],
        }


def verify_good_thresholds(table, matroid, dists, trials, seed):
    """Monte Carlo check that Pr[T_k^i > tau_i] lies in
    [p_k - delta, p_k + 2 eps^2 + delta] for every element and bucket, with
    delta the Wilson CI half-width. Uses a stream disjoint from learning."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    verify_stream = (int(seed), PHASE_VERIFY)
    if table.source_stream == verify_stream:
        raise ValueError("evaluation stream must be disjoint from the learning stream")
    rng = stream(seed, PHASE_VERIFY)
    exceed = np.zeros((matroid.n, table.buckets), dtype=np.int64)
    for _ in range(trials):
        values = sample_values(dists, rng)
        for i, tau in enumerate(tau_keys_all(matroid, values)):
            for k, t in enumerate(table.thresholds[i]):
                if t > tau:
                    exceed[i, k] += 1
    eps = table.epsilon
    rows = []
    for i in range(matroid.n):
        for k in range(table.buckets):
            est = float(exceed[i, k] / trials)
            lo, hi = wilson_interval(int(exceed[i, k]), trials)
            delta = (hi - lo) / 2.0
            target = table.probs[k]
            ok = (target - delta) <= est <= (target + 2 * eps * eps + delta)
            rows.append(BucketCheck(i, k, target, est, lo, hi, ok))
    return GoodnessReport(rows=tuple(rows), trials=trials, epsilon=eps)


# ---------------------------------------------------------------------------
# induced marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalsReport:
    """Estimated activation marginals x_i (with normal CIs) alongside the
    estimated optimum membership probabilities they are dominated by."""

    x_hat: tuple
    x_se: tuple
    opt_hat: tuple
    trials: int
    membership_ok: bool | None

    def csv_rows(self):
        yield ("element", "x_hat", "x_se", "opt_membership_hat")
        for i, (xh, se, oh) in enumerate(zip(self.x_hat, self.x_se, self.opt_hat)):
            yield (i, repr(xh), repr(se), repr(oh))

    def summary(self):
        return {
            "x_hat": list(self.x_hat),
            "x_se": list(self.x_se),
            "opt_membership_hat": list(self.opt_hat),
            "trials": self.trials,
            "membership_ok": self.membership_ok,
        }


def induced_marginals(table, matroid, dists, trials, seed):
    """Estimate x_i = P(i active) by averaging per-trial activation
    probabilities, and P(i in OPT) from the same draws. When the family
    supports an exact membership check, verifies that the lower CI corner of
    x lies inside the matroid polytope (the polytope is downward closed, so
    that corner decides whether the CI box meets it)."""
    rng = stream(seed, PHASE_MARGINALS)
    n = matroid.n
    prob_sum = np.zeros(n)
    prob_sq = np.zeros(n)
    opt_count = np.zeros(n, dtype=np.int64)
    for _ in range(trials):
        values = sample_values(dists, rng)
        opt_set, _ = opt_value(matroid, values)
        for i in range(n):
            p = table.activation_probability(i, values[i])
            prob_sum[i] += p
            prob_sq[i] += p * p
            if i in opt_set:
                opt_count[i] += 1
    x_hat = prob_sum / trials
    var = np.maximum(prob_sq / trials - x_hat**2, 0.0)
    se = np.sqrt(var / trials)
    lower = np.clip(x_hat - 1.96 * se, 0.0, 1.0)
    try:
        membership_ok = polytope_membership(matroid, lower.tolist())
    except ValueError:
        membership_ok = None
    return MarginalsReport(
        x_hat=tuple(float(v) for v in x_hat),
        x_se=tuple(float(v) for v in se),
        opt_hat=tuple(float(c / trials) for c in opt_count),
        trials=trials,
        membership_ok=membership_ok,
    )


# ---------------------------------------------------------------------------
# end-to-end runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProphetRun:
    values: tuple
    active: frozenset
    accepted: frozenset
    accepted_value: float
    opt_set: frozenset
    opt_value: float


def run_prophet(matroid, dists, table, scheme, order, seed):
    """One full pass: draw values, activate through the table, feed the
    policy in arrival order, and compare against the offline optimum."""
    rng = stream(seed, PHASE_PROPHET)
    values = sample_values(dists, rng)
    active = frozenset(
        i for i in range(matroid.n)
        if rng.random() < table.activation_probability(i, values[i])
    )
    run = scheme.run(matroid, order, active, rng)
    if not run.accepted <= active:
        raise IndependenceViolation("scheme accepted an inactive element")
    if not matroid.is_independent(run.accepted):
        raise IndependenceViolation("scheme produced a dependent accepted set")
    opt_set, opt_val = opt_value(matroid, values)
    accepted_value = sum(magnitude(values[e]) for e in run.accepted)
    return ProphetRun(
        values=tuple(values),
        active=active,
        accepted=run.accepted,
        accepted_value=accepted_value,
        opt_set=opt_set,
        opt_value=opt_val,
    )


def prophet_trials(matroid, dists, table, scheme, trials, seed, order=None):
    """(alg, opt) value arrays over seeded trials.

    Takes the vectorized path (batched values, searchsorted bucket lookup,
    batch scheme run, partition-based optimum) when every ingredient
    supports it; otherwise loops single trials. Both paths are deterministic
    in the seed.
    """
    rng = stream(seed, PHASE_PROPHET)
    n = matroid.n
    floats = table.float_thresholds()
    batch_ok = (
        floats is not None
        and isinstance(matroid, UniformMatroid)
        and sample_values_matrix(dists, stream(seed, PHASE_PROPHET, 0), 1) is not None
    )
    if batch_ok:
        values = sample_values_matrix(dists, rng, trials)
        probs = np.asarray(table.probs)
        act_prob = np.zeros((trials, n))
        for i in range(n):
            bucket = np.searchsorted(floats[i], values[:, i], side="right") - 1
            hit = bucket >= 0
            act_prob[hit, i] = probs[bucket[hit]]
        active = rng.random((trials, n)) < act_prob
        accepted = scheme.run_batch(matroid, order, active, rng)
        if accepted is None:
            accepted = np.zeros_like(active)
            perm = list(order) if order is not None else list(range(n))
            for t in range(trials):
                run = scheme.run(
                    matroid, perm, frozenset(np.flatnonzero(active[t]).tolist()), rng
                )
                for e in run.accepted:
                    accepted[t, e] = True
        if (accepted & ~active).any():
            raise IndependenceViolation("scheme accepted an inactive element")
        if (accepted.sum(axis=1) > matroid.r).any():
            raise IndependenceViolation("scheme produced a dependent accepted set")
        alg = (values * accepted).sum(axis=1)
        r = matroid.r
        if r:
            top = np.sort(values, axis=1)[:, n - r :]
            opt = np.maximum(top, 0.0).sum(axis=1)
        else:
            opt = np.zeros(trials)
        return alg, opt

    alg = np.empty(trials)
    opt = np.empty(trials)
    order_seq = list(order) if order is not None else list(range(n))
    for t in range(trials):
        values = sample_values(dists, rng)
        active = frozenset(
            i for i in range(n) if rng.random() < table.activation_probability(i, values[i])
        )
        run = scheme.run(matroid, order_seq, active, rng)
        if not run.accepted <= active or not matroid.is_independent(run.accepted):
            raise IndependenceViolation("invalid accepted set in prophet run")
        alg[t] = sum(magnitude(values[e]) for e in run.accepted)
        opt[t] = opt_value(matroid, values)[1]
    return alg, opt


def estimate_prophet_ratio(matroid, dists, table, scheme, trials, seed, order=None, n_boot=1000):
    """Competitive-ratio report (sum ALG)/(sum OPT) with a bootstrap CI."""
    alg, opt = prophet_trials(matroid, dists, table, scheme, trials, seed, order=order)
    return ratio_report(alg, opt, seed=seed, n_boot=n_boot)


@dataclass(frozen=True)
class ActiveValueReport:
    """Ratio of expected active value to expected optimum, with the
    small-value loss term measured separately."""

    active_ratio: float
    active_ci: tuple
    loss_ratio: float
    loss_ci: tuple
    trials: int
    mean_opt: float

    def summary(self):
        return {
            "active_value_ratio": self.active_ratio,
            "active_value_ci": list(self.active_ci),
            "small_value_loss_ratio": self.loss_ratio,
            "small_value_loss_ci": list(self.loss_ci),
            "trials": self.trials,
            "mean_opt": self.mean_opt,
        }


def active_value_vs_opt(table, matroid, dists, trials, seed, n_boot=1000):
    """Estimate E[sum of active values] / E[OPT] and the small-value loss
    E[sum over optimal elements below their bottom threshold] / E[OPT].

    The active value is averaged analytically over the activation coins
    (sum_i v_i p_i(v_i)), which has the same expectation as sampling the
    active set with lower variance.
    """
    rng = stream(seed, PHASE_VERIFY, 1)
    n = matroid.n
    active_vals = np.empty(trials)
    losses = np.empty(trials)
    opts = np.empty(trials)
    for t in range(trials):
        values = sample_values(dists, rng)
        act = 0.0
        for i in range(n):
            act += magnitude(values[i]) * table.activation_probability(i, values[i])
        opt_set, opt_val = opt_value(matroid, values)
        loss = sum(
            magnitude(values[i])
            for i in opt_set
            if sort_key(values[i]) < table.thresholds[i][0]
        )
        active_vals[t] = act
        losses[t] = loss
        opts[t] = opt_val
    active = ratio_report(active_vals, opts, seed=seed, n_boot=n_boot)
    loss = ratio_report(losses, opts, seed=seed + 1, n_boot=n_boot)
    return ActiveValueReport(
        active_ratio=active.ratio,
        active_ci=(active.ci_lo, active.ci_hi),
        loss_ratio=loss.ratio,
        loss_ci=(loss.ci_lo, loss.ci_hi),
        trials=trials,
        mean_opt=float(opts.mean()),
    )
