import numpy as np
import pytest

from robust_psi.core import init_samples_n0, stat_bias_u, tau_threshold, theoretical_sample_bound
from robust_psi.environment import Environment, GaussianArm, Offset, random_gaussian_instance, true_medians
from robust_psi.evaluation import check_accuracy, good_event_holds
from robust_psi.pareto import pareto_front, subopt_gaps
from robust_psi.rpsi import (
    RpsiConfig,
    StateError,
    eliminate,
    identify,
    initialize,
    run,
    sampling_step,
    select_arm,
)


def synthetic_env(seed, epsilon=0.0, adversary=None):
    return random_gaussian_instance(10, 2, 0, 10, 0.1, seed, adversary or Offset(), epsilon)


def manual_state(medians, u, params):
    """A freshly initialised state whose medians and biases are then overwritten."""
    medians = np.asarray(medians, dtype=float)
    env = Environment(tuple(GaussianArm(row, 0.1) for row in medians))
    state = initialize(RpsiConfig(params), env, 0)
    state.emp_median[:] = medians
    state.bias[:] = u
    return state


class TestInitialize:
    def test_synthetic_counts(self, synth_params):
        state = initialize(RpsiConfig(synth_params), synthetic_env(0), 1)
        assert state.total_samples == 550
        assert list(state.rounds) == [1] * 10
        assert state.undecided == list(range(10)) and state.predicted == []
        assert len(set(state.bias)) == 1
        assert state.bias[0] == stat_bias_u(synth_params, 1)

    def test_single_arm(self, synth_params):
        env = Environment((GaussianArm((1.0, 2.0), 0.1),))
        state = initialize(RpsiConfig(synth_params), env, 0)
        assert state.undecided == [0]
        assert state.total_samples == init_samples_n0(synth_params, 1, 2)

    def test_medians_follow_store(self, synth_params):
        state = initialize(RpsiConfig(synth_params), synthetic_env(3, 0.2), 3)
        for i in range(10):
            np.testing.assert_array_equal(state.emp_median[i], np.median(state.store[i].values, axis=0))


class TestSampling:
    def test_first_batch_is_79(self, synth_params):
        env = synthetic_env(0)
        state = initialize(RpsiConfig(synth_params), env, 5)
        before = state.emp_median.copy()
        u0 = state.bias[0]
        n = sampling_step(state, env, 5)
        assert n == 79
        assert state.total_samples == 550 + 79
        assert state.rounds[0] == 2 and state.bias[0] < u0
        np.testing.assert_array_equal(state.emp_median[1:], before[1:])

    def test_select_ties_lowest(self, synth_params):
        state = initialize(RpsiConfig(synth_params), synthetic_env(0), 0)
        assert select_arm(state) == 0

    def test_select_prefers_lagging_arm(self, synth_params):
        env = synthetic_env(0)
        state = initialize(RpsiConfig(synth_params), env, 0)
        for arm in range(10):
            if arm != 6:
                sampling_step(state, env, 0, arm)
        assert select_arm(state) == 6

    def test_select_singleton_and_empty(self, synth_params):
        state = manual_state([(0, 0), (1, 1)], 1.0, synth_params)
        state.undecided = [1]
        assert select_arm(state) == 1
        state.undecided = []
        with pytest.raises(StateError):
            select_arm(state)

    def test_select_ignores_decided_arms(self, synth_params):
        state = manual_state([(0, 0), (1, 1), (2, 2)], [5.0, 1.0, 2.0], synth_params)
        state.undecided = [1, 2]
        assert select_arm(state) == 2


class TestEliminate:
    def test_far_apart(self, synth_params):
        state = manual_state([(0, 0), (10, 10)], 1.0, synth_params)
        assert eliminate(state, 0.0) == [0]
        assert state.undecided == [1]

    def test_overlap_keeps_all(self, synth_params):
        state = manual_state([(0, 0), (10, 10)], 1.0, synth_params)
        assert eliminate(state, 4.5) == []
        assert state.undecided == [0, 1]

    def test_simultaneous(self, synth_params):
        # 0 falls to 1 and 1 falls to 2 in the same step; 3 is incomparable with everyone
        state = manual_state([(0, 0), (5, 5), (10, 10), (10.5, -20)], 0.5, synth_params)
        assert eliminate(state, 0.0) == [0, 1]
        assert state.undecided == [2, 3]

    def test_removed_never_predicted(self, synth_params):
        state = manual_state([(0, 0), (10, 10)], 0.01, synth_params)
        eliminate(state, 0.0)
        identify(state, 0.1)
        assert 0 not in state.predicted


class TestIdentify:
    def test_blocked_from_o1(self, synth_params):
        state = manual_state([(0, 0), (10, 10)], 0.01, synth_params)
        o1, o2, early = identify(state, 0.1)
        assert o1 == [1]
        # U = 0.01 <= alpha/4, so O1 is committed and the run ends
        assert early and state.predicted == [1] and state.undecided == [0]

    def test_singleton(self, synth_params):
        state = manual_state([(3, 3)], 1.0, synth_params)
        o1, o2, early = identify(state, 0.1)
        assert (o1, o2, early) == ([0], [0], False)
        assert state.undecided == [] and state.predicted == [0]

    def test_o2_guard(self, synth_params):
        # arm 1 could still beat arm 0 by alpha, so it is not committed while U is large
        state = manual_state([(0, 0), (0.3, 0.3)], 0.1, synth_params)
        o1, o2, early = identify(state, 0.2)
        assert o1 == [1] and o2 == [] and not early
        assert state.undecided == [0, 1]

    def test_incomparable_pair_committed(self, synth_params):
        state = manual_state([(0, 5), (5, 0)], 0.1, synth_params)
        o1, o2, early = identify(state, 0.2)
        assert o1 == o2 == [0, 1] and not early

    def test_early_return_when_all_small(self, synth_params):
        state = manual_state([(0, 5), (5, 0), (1, -1)], 0.0, synth_params)
        o1, o2, early = identify(state, 0.1)
        assert early and o1 == [0, 1] and state.predicted == [0, 1]


class TestRun:
    def test_single_arm(self, synth_params):
        env = Environment((GaussianArm((1.0,), 0.1),))
        p, trace = run(RpsiConfig(synth_params), env, 0)
        assert p == [0]
        assert len(trace.loops) == 1

    def test_synthetic_adversary_free(self, synth_params):
        for seed in range(10):
            env = synthetic_env(seed)
            p, trace = run(RpsiConfig(synth_params), env, seed)
            medians = true_medians(env)
            assert set(pareto_front(medians)) <= set(p)
            assert not check_accuracy(p, medians, 0.0, synth_params.alpha)
            assert trace.terminated_via in ("empty_S", "early_return")

    def test_sample_accounting(self, synth_params):
        env = synthetic_env(4, 0.2)
        params = synth_params.replace(epsilon=0.2)
        p, trace = run(RpsiConfig(params), env, 4)
        assert trace.total_samples == trace.batch_samples + 10 * trace.n0

    def test_cap(self, synth_params):
        p, trace = run(RpsiConfig(synth_params, max_total_samples=600), synthetic_env(0), 0)
        assert trace.terminated_via == "cap"
        assert trace.total_samples <= 600

    def test_cap_during_init(self, synth_params):
        p, trace = run(RpsiConfig(synth_params, max_total_samples=100), synthetic_env(0), 0)
        assert p == [] and trace.terminated_via == "cap"

    def test_deterministic(self, synth_params):
        params = synth_params.replace(epsilon=0.3)
        a = run(RpsiConfig(params), synthetic_env(2, 0.3), 17)
        b = run(RpsiConfig(params), synthetic_env(2, 0.3), 17)
        assert a[0] == b[0] and a[1].total_samples == b[1].total_samples

    @pytest.mark.parametrize("eps", [0.0, 0.2, 0.4])
    def test_invariants(self, synth_params, eps):
        params = synth_params.replace(epsilon=eps)
        tau_a = tau_threshold(params, params.alpha)
        for seed in range(15):
            env = synthetic_env(100 + seed, eps)
            p, trace = run(RpsiConfig(params), env, seed)
            seen_s = set(range(10))
            for loop in trace.loops:
                s = set(loop.undecided)
                assert s <= seen_s
                seen_s = s
                assert not s & set(loop.predicted)
                if s:
                    rounds = [loop.rounds[i] for i in s]
                    assert max(rounds) - min(rounds) <= 1
            assert max(max(loop.rounds) for loop in trace.loops) <= tau_a
            assert not set(trace.eliminated) & set(p)
            assert len(p) == len(set(p))

    def test_within_gap_free_bound(self, synth_params):
        for eps in (0.0, 0.2):
            params = synth_params.replace(epsilon=eps)
            for seed in range(10):
                env = synthetic_env(seed, eps)
                gaps = subopt_gaps(true_medians(env))
                bound = theoretical_sample_bound(params, list(gaps), 10, 2)
                p, trace = run(RpsiConfig(params), env, seed)
                if good_event_holds(trace.estimates, true_medians(env), params):
                    assert trace.total_samples <= bound.gap_free

    def test_optimal_arms_rarely_eliminated(self, synth_params):
        bad = 0
        runs = 60
        for seed in range(runs):
            env = synthetic_env(500 + seed)
            _, trace = run(RpsiConfig(synth_params), env, seed, record_estimates=False)
            bad += bool(set(trace.eliminated) & set(pareto_front(true_medians(env))))
        assert bad / runs <= synth_params.delta
