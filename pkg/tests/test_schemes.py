"""Scheme law tests against closed forms and enumeration oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crslab.distributions import stream
from crslab.evaluation import estimate_selectability, exact_selectability
from crslab.matroids import LaminarMatroid, UniformMatroid
from crslab.schemes import (
    AcceptSecondScheme,
    ArrivalOrder,
    BGreedyScheme,
    CountingScheme,
    EvenMixtureScheme,
    GreedyScheme,
    NullScheme,
    b_greedy_lower_bound,
    counting_selectability_uniform,
    f_n,
    make_order,
    minimize_f_n,
    scheme_from_config,
    uniform_rank_bound,
)

RANK1 = UniformMatroid(10, 1)


class TestOrders:
    def test_kinds(self):
        assert make_order("identity", 4).permutation == (0, 1, 2, 3)
        assert make_order("reverse", 4).permutation == (3, 2, 1, 0)
        assert make_order("descending_x", 4, x=[0.1, 0.9, 0.9, 0.2]).permutation == (1, 2, 3, 0)
        assert make_order("target_last", 4, target=1).permutation == (0, 2, 3, 1)

    def test_random_is_per_trial(self):
        with pytest.raises(ValueError):
            make_order("random", 4)

    def test_not_a_permutation(self):
        with pytest.raises(ValueError):
            ArrivalOrder((0, 0, 1))


class TestSingleItemRuns:
    def test_greedy_empty(self):
        run = GreedyScheme().run(RANK1, None, frozenset(), stream(0))
        assert run.accepted == frozenset()

    def test_greedy_first_active(self):
        run = GreedyScheme().run(RANK1, range(10), {3, 7}, stream(0))
        assert run.accepted == {3}

    def test_accept_second(self):
        scheme = AcceptSecondScheme()
        assert scheme.run(RANK1, range(10), {3}, stream(0)).accepted == frozenset()
        assert scheme.run(RANK1, range(10), {3, 7, 9}, stream(0)).accepted == {7}

    def test_accept_second_always_one_with_two_actives(self, rng):
        scheme = AcceptSecondScheme()
        for _ in range(50):
            active = frozenset(rng.choice(10, size=rng.integers(2, 10), replace=False).tolist())
            assert len(scheme.run(RANK1, range(10), active, stream(1)).accepted) == 1

    def test_mixture_single_element_half(self):
        m = UniformMatroid(1, 1)
        assert exact_selectability(EvenMixtureScheme(), m, [1.0])[0] == pytest.approx(0.5)

    def test_mixture_accepts_first_or_second(self, rng):
        scheme = EvenMixtureScheme()
        for t in range(100):
            active = sorted(rng.choice(10, size=3, replace=False).tolist())
            run = scheme.run(RANK1, range(10), frozenset(active), stream(t))
            assert run.accepted in ({active[0]}, {active[1]})


class TestMixtureLaw:
    def test_exact_matches_f_formula(self):
        n = 6
        m = UniformMatroid(n, 1)
        x = [1.0 / n] * n
        exact = exact_selectability(EvenMixtureScheme(), m, x)
        for i in range(n):
            assert exact[i] == pytest.approx(f_n(x[:i]) / 2.0, abs=1e-12)

    def test_three_element_value(self):
        m = UniformMatroid(3, 1)
        exact = exact_selectability(EvenMixtureScheme(), m, [1 / 3] * 3)
        assert exact[2] == pytest.approx(4.0 / 9.0, abs=1e-12)

    @given(st.lists(st.floats(0.01, 0.5), min_size=1, max_size=6))
    @settings(max_examples=25, deadline=None)
    def test_min_selectability_at_least_1_over_e(self, raw):
        total = sum(raw)
        x = [v / max(1.0, total) for v in raw]
        m = UniformMatroid(len(x), 1)
        exact = exact_selectability(EvenMixtureScheme(), m, x)
        assert min(exact) >= 1.0 / math.e - 1e-9

    def test_batch_matches_exact_law(self):
        n, trials = 5, 60_000
        m = UniformMatroid(n, 1)
        x = [0.19] * n
        exact = exact_selectability(EvenMixtureScheme(), m, x)
        report = estimate_selectability(EvenMixtureScheme(), m, x, trials=trials, seed=5)
        for i in range(n):
            stats = report.stats(i)
            sigma = math.sqrt(exact[i] * (1 - exact[i]) / stats.active)
            assert abs(stats.estimate - exact[i]) < 4 * sigma


class TestFn:
    def test_f1_constant(self):
        assert f_n([0.3]) == pytest.approx(1.0)
        assert f_n([]) == pytest.approx(1.0)

    def test_f2_value(self):
        assert f_n([0.5, 0.5]) == pytest.approx(0.75)

    def test_f3_uniform(self):
        assert f_n([1 / 3] * 3) == pytest.approx(20.0 / 27.0)

    @given(st.lists(st.floats(0.0, 1.0), max_size=7))
    @settings(max_examples=50, deadline=None)
    def test_equals_direct_formula(self, x):
        direct = math.prod(1 - v for v in x) + sum(
            x[j] * math.prod(1 - x[k] for k in range(len(x)) if k != j)
            for j in range(len(x))
        )
        assert f_n(x) == pytest.approx(direct, abs=1e-12)


class TestMinimizeFn:
    def test_n1(self):
        argmin, value = minimize_f_n(1)
        assert value == pytest.approx(1.0)
        assert argmin == (1.0,)

    def test_n2(self):
        argmin, value = minimize_f_n(2)
        assert value == pytest.approx(0.75, abs=1e-6)
        assert argmin == pytest.approx((0.5, 0.5), abs=1e-3)

    def test_n5_closed_form(self):
        _, value = minimize_f_n(5)
        assert value == pytest.approx(0.8**5 + 0.8**4, abs=1e-6)

    def test_minima_decrease_and_exceed_2_over_e(self):
        values = [minimize_f_n(n)[1] for n in range(1, 7)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(v > 2.0 / math.e for v in values)

    def test_rejects_large_n(self):
        with pytest.raises(ValueError):
            minimize_f_n(7)


class TestCountingClosedForm:
    def test_pure_greedy(self):
        assert counting_selectability_uniform([1.0], 2) == pytest.approx(0.5)
        for n in (3, 10, 50):
            assert counting_selectability_uniform([1.0], n) == pytest.approx(
                (1 - 1 / n) ** (n - 1)
            )

    def test_half_then_one_at_n3(self):
        assert counting_selectability_uniform([0.5, 1.0], 3) == pytest.approx(4.0 / 9.0)

    def test_converges_to_1_over_e(self):
        assert counting_selectability_uniform([0.5, 1.0], 1000) == pytest.approx(
            1.0 / math.e, abs=0.01
        )

    def test_closed_form_matches_exact_enumeration(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 7))
            probs = rng.random(3).tolist()
            m = UniformMatroid(n, 1)
            exact = exact_selectability(CountingScheme(probs), m, [1.0 / n] * n)
            assert exact[n - 1] == pytest.approx(
                counting_selectability_uniform(probs, n), abs=1e-12
            )

    def test_never_exceeds_max_qk(self, rng):
        # weighted average of the q_k cannot exceed their maximum
        n = 200
        q = [(1 - 1 / n) ** (n - 1)]
        for k in range(1, 6):
            q.append(q[-1] * (n - k) / (k * (n - 1.0)))
        for _ in range(50):
            probs = rng.random(5).tolist()
            assert counting_selectability_uniform(probs, n) <= max(q) + 1e-12


class TestBGreedy:
    def test_b1_rank1_equals_greedy(self):
        m = UniformMatroid(6, 1)
        x = [0.15] * 6
        a = exact_selectability(BGreedyScheme(1.0), m, x)
        b = exact_selectability(GreedyScheme(), m, x)
        assert a == pytest.approx(b, abs=1e-12)

    def test_b0_never_accepts(self):
        m = LaminarMatroid(4, [[0, 1, 2, 3]], [2])
        run = BGreedyScheme(0.0).run(m, range(4), {0, 1, 2, 3}, stream(3))
        assert run.accepted == frozenset()

    def test_output_independent(self, rng):
        m = LaminarMatroid(6, [[0, 1, 2], [0, 1, 2, 3, 4, 5]], [1, 3])
        scheme = BGreedyScheme(0.7)
        for t in range(200):
            active = frozenset(int(i) for i in np.flatnonzero(rng.random(6) < 0.8))
            run = scheme.run(m, range(6), active, stream(t))
            assert m.is_independent(run.accepted)
            assert run.accepted <= active

    def test_batch_agrees_with_exact_law(self):
        m = LaminarMatroid(5, [[0, 1], [0, 1, 2, 3, 4]], [1, 2])
        x = [0.5, 0.5, 0.3, 0.3, 0.3]
        scheme = BGreedyScheme(0.5)
        exact = exact_selectability(scheme, m, x)
        report = estimate_selectability(scheme, m, x, trials=60_000, seed=9)
        for i in range(5):
            stats = report.stats(i)
            sigma = math.sqrt(exact[i] * (1 - exact[i]) / stats.active)
            assert abs(stats.estimate - exact[i]) < 4.5 * sigma

    def test_batch_random_order_agrees_with_permutation_average(self):
        m = LaminarMatroid(4, [[0, 1, 2, 3]], [2])
        x = [0.5] * 4
        scheme = BGreedyScheme(0.4)
        per_perm = [
            exact_selectability(scheme, m, x, order=ArrivalOrder(p))
            for p in itertools.permutations(range(4))
        ]
        averaged = [float(np.mean([law[i] for law in per_perm])) for i in range(4)]
        report = estimate_selectability(scheme, m, x, order="random", trials=80_000, seed=4)
        for i in range(4):
            stats = report.stats(i)
            sigma = math.sqrt(averaged[i] * (1 - averaged[i]) / stats.active)
            assert abs(stats.estimate - averaged[i]) < 4.5 * sigma

    def test_batch_random_order_nested_sets_and_free_element(self):
        # nested chain (two sets per inner element) plus an unconstrained
        # element: exercises the padded membership table under random orders
        m = LaminarMatroid(5, [[0, 1], [0, 1, 2, 3]], [1, 2])
        x = [0.5, 0.5, 0.5, 0.5, 0.8]
        scheme = BGreedyScheme(0.6)
        per_perm = [
            exact_selectability(scheme, m, x, order=ArrivalOrder(p))
            for p in itertools.permutations(range(5))
        ]
        averaged = [float(np.mean([law[i] for law in per_perm])) for i in range(5)]
        report = estimate_selectability(scheme, m, x, order="random", trials=80_000, seed=8)
        for i in range(5):
            stats = report.stats(i)
            sigma = math.sqrt(averaged[i] * (1 - averaged[i]) / stats.active)
            assert abs(stats.estimate - averaged[i]) < 4.5 * sigma

    def test_warning_on_non_laminar(self):
        from conftest import triangle_matroid

        assert BGreedyScheme(0.13).compatibility_warning(triangle_matroid())
        assert BGreedyScheme(0.13).compatibility_warning(UniformMatroid(3, 2)) is None


class TestRcrsEstimate:
    def test_zero_b_gives_zero_estimates(self):
        from crslab.schemes import rcrs_selectability_estimate

        m = UniformMatroid(4, 1)
        report = rcrs_selectability_estimate(m, 0.0, [0.25] * 4, trials=2000, seed=1)
        assert all(e.estimate == 0.0 for e in report.elements if not e.insufficient)

    def test_rank_one_matches_permutation_average(self):
        from crslab.schemes import rcrs_selectability_estimate

        m = UniformMatroid(4, 1)
        x = [0.25] * 4
        scheme = BGreedyScheme(0.25)
        per_perm = [
            exact_selectability(scheme, m, x, order=ArrivalOrder(p))
            for p in itertools.permutations(range(4))
        ]
        averaged = [float(np.mean([law[i] for law in per_perm])) for i in range(4)]
        report = rcrs_selectability_estimate(m, 0.25, x, trials=60_000, seed=6)
        for i in range(4):
            stats = report.stats(i)
            sigma = math.sqrt(averaged[i] * (1 - averaged[i]) / stats.active)
            assert abs(stats.estimate - averaged[i]) < 4.5 * sigma


class TestClosedFormBounds:
    def test_b_greedy_bound_at_013(self):
        assert 0.0714 <= b_greedy_lower_bound(0.13) <= 0.0716

    def test_bound_vanishes_at_zero(self):
        assert b_greedy_lower_bound(1e-9) == pytest.approx(0.0, abs=1e-8)

    def test_bound_vacuous_at_half(self):
        assert b_greedy_lower_bound(0.5) < 0

    def test_bound_domain_error(self):
        with pytest.raises(ValueError):
            b_greedy_lower_bound(1.0)

    def test_uniform_rank_bound(self):
        b = 0.13
        assert uniform_rank_bound(b, 1) == pytest.approx(b * (1 - b * math.exp(1 - b)))
        assert uniform_rank_bound(b, 0) == 0.0
        assert uniform_rank_bound(0.5, 4000) == pytest.approx(0.5, abs=1e-9)
        values = [uniform_rank_bound(0.3, r) for r in range(1, 8)]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestConfig:
    def test_round_trip(self):
        for cfg in (
            {"kind": "greedy"},
            {"kind": "accept_second"},
            {"kind": "even_mixture"},
            {"kind": "counting", "probs": [0.5, 1.0]},
            {"kind": "b_greedy", "b": 0.13},
            {"kind": "null"},
        ):
            scheme = scheme_from_config(cfg)
            assert scheme.to_config() == cfg

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            scheme_from_config({"kind": "psychic"})

    def test_null_scheme(self):
        run = NullScheme().run(RANK1, range(10), {1, 2, 3}, stream(0))
        assert run.accepted == frozenset()
