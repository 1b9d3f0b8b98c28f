"""Measurement engine: Wilson intervals, determinism, aborts, ratios."""

import math

import numpy as np
import pytest

from crslab.distributions import stream
from crslab.errors import IndependenceViolation
from crslab.evaluation import (
    ElementStats,
    estimate_selectability,
    exact_selectability,
    ratio_report,
    wilson_interval,
)
from crslab.matroids import UniformMatroid
from crslab.schemes import EvenMixtureScheme, GreedyScheme, Scheme, SchemeRun


class TestWilson:
    def test_degenerate(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi

    def test_asymmetric_near_zero(self):
        lo, hi = wilson_interval(1, 1000)
        assert lo > 0.0
        assert hi - 0.001 > 0.001 - lo

    def test_coverage_on_synthetic_bernoulli(self):
        # 95% nominal coverage within one point over 10^4 repetitions
        rng = stream(77)
        p, n, reps = 0.3, 200, 10_000
        draws = rng.binomial(n, p, size=reps)
        covered = 0
        for k in draws:
            lo, hi = wilson_interval(int(k), n)
            covered += lo <= p <= hi
        assert covered / reps == pytest.approx(0.95, abs=0.01)


class TestEstimateSelectability:
    def test_zero_trials_rejected(self):
        with pytest.raises(ValueError):
            estimate_selectability(GreedyScheme(), UniformMatroid(2, 1), [0.5, 0.5], trials=0)

    def test_x_zero_marks_insufficient(self):
        report = estimate_selectability(
            GreedyScheme(), UniformMatroid(3, 1), [0.0] * 3, trials=500, seed=1
        )
        assert all(e.insufficient for e in report.elements)
        assert report.min_estimate is None

    def test_greedy_first_element_always_kept(self):
        report = estimate_selectability(
            GreedyScheme(), UniformMatroid(4, 1), [0.25] * 4, trials=4000, seed=2
        )
        assert report.stats(0).estimate == 1.0

    def test_membership_precondition(self):
        with pytest.raises(ValueError, match="polytope"):
            estimate_selectability(GreedyScheme(), UniformMatroid(2, 1), [0.9, 0.9], trials=10)

    def test_compat_warning_recorded(self):
        report = estimate_selectability(
            GreedyScheme(), UniformMatroid(4, 2), [0.4] * 4, trials=100, seed=3
        )
        assert any("rank-1" in w for w in report.warnings)

    def test_deterministic_across_workers(self):
        kwargs = dict(trials=20_000, seed=11)
        a = estimate_selectability(
            EvenMixtureScheme(), UniformMatroid(6, 1), [0.15] * 6, **kwargs
        )
        b = estimate_selectability(
            EvenMixtureScheme(), UniformMatroid(6, 1), [0.15] * 6, workers=2, **kwargs
        )
        assert a.elements == b.elements
        assert list(a.csv_rows()) == list(b.csv_rows())

    def test_independence_violation_aborts(self):
        class Rogue(Scheme):
            kind = "rogue"

            def run(self, matroid, order, active, rng):
                return SchemeRun(accepted=frozenset(active), decisions=())

        with pytest.raises(IndependenceViolation):
            estimate_selectability(
                Rogue(), UniformMatroid(3, 1), [0.3] * 3, trials=2000, seed=0
            )

    def test_accept_inactive_aborts(self):
        class Eager(Scheme):
            kind = "eager"

            def run(self, matroid, order, active, rng):
                return SchemeRun(accepted=frozenset({0}), decisions=())

        with pytest.raises(IndependenceViolation):
            estimate_selectability(
                Eager(), UniformMatroid(3, 1), [0.0, 0.5, 0.5], trials=2000, seed=0
            )

    def test_adversarial_order_kinds(self):
        # target_last pushes the probed element behind the whole mass
        m = UniformMatroid(5, 1)
        x = [0.2] * 5
        report = estimate_selectability(
            EvenMixtureScheme(), m, x, order="target_last", target=2,
            trials=40_000, seed=14,
        )
        from crslab.schemes import ArrivalOrder, f_n

        expected = f_n([0.2] * 4) / 2
        s = report.stats(2)
        sigma = math.sqrt(expected * (1 - expected) / s.active)
        assert abs(s.estimate - expected) < 4 * sigma
        # descending_x runs and stays independent-valid
        rep2 = estimate_selectability(
            EvenMixtureScheme(), m, [0.5, 0.2, 0.1, 0.1, 0.1],
            order="descending_x", trials=5000, seed=15,
        )
        assert rep2.min_estimate > 0

    def test_estimate_consistent_with_exact(self):
        m = UniformMatroid(4, 1)
        x = [0.2, 0.3, 0.25, 0.2]
        exact = exact_selectability(EvenMixtureScheme(), m, x)
        report = estimate_selectability(EvenMixtureScheme(), m, x, trials=50_000, seed=21)
        for i in range(4):
            s = report.stats(i)
            sigma = math.sqrt(exact[i] * (1 - exact[i]) / s.active)
            assert abs(s.estimate - exact[i]) < 4 * sigma


class TestExactSelectability:
    def test_greedy_first_element_one(self):
        m = UniformMatroid(3, 1)
        got = exact_selectability(GreedyScheme(), m, [0.3, 0.3, 0.3])[0]
        assert got == pytest.approx(1.0, abs=1e-12)

    def test_size_guard(self):
        with pytest.raises(ValueError):
            exact_selectability(GreedyScheme(), UniformMatroid(17, 1), [0.01] * 17)

    def test_respects_order(self):
        from crslab.schemes import ArrivalOrder

        m = UniformMatroid(2, 1)
        rev = exact_selectability(GreedyScheme(), m, [0.5, 0.5], order=ArrivalOrder((1, 0)))
        assert rev[1] == 1.0
        assert rev[0] == 0.5


class TestRatioReport:
    def test_null_scheme_zero(self):
        r = ratio_report([0.0] * 100, np.linspace(1, 2, 100))
        assert r.ratio == 0.0

    def test_clairvoyant_one(self):
        opt = np.linspace(1, 2, 100)
        r = ratio_report(opt, opt)
        assert r.ratio == pytest.approx(1.0)
        assert r.ci_lo == pytest.approx(1.0)
        assert r.ci_hi == pytest.approx(1.0)

    def test_bootstrap_brackets_truth(self):
        rng = stream(13)
        opt = rng.uniform(1, 2, 5000)
        alg = opt * rng.uniform(0.4, 0.6, 5000)
        r = ratio_report(alg, opt, seed=3)
        assert r.ci_lo < 0.5 < r.ci_hi
        assert r.ci_hi - r.ci_lo < 0.02

    def test_deterministic(self):
        rng = stream(1)
        opt = rng.uniform(1, 2, 500)
        alg = opt * 0.5
        assert ratio_report(alg, opt, seed=5) == ratio_report(alg, opt, seed=5)


def test_csv_rows_shape():
    stats = ElementStats(0, 10, 5, 0.5, 0.2, 0.8)
    assert not stats.insufficient
    report_rows = list(
        estimate_selectability(
            GreedyScheme(), UniformMatroid(2, 1), [0.5, 0.0], trials=100, seed=0
        ).csv_rows()
    )
    assert report_rows[0] == ("element", "active", "accepted", "estimate", "ci_lo", "ci_hi")
    assert report_rows[2][3] == "insufficient data"
