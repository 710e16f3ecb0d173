"""Shared linear model: closed-form oracles, replay equivalence, UCB properties."""
import numpy as np
import pytest

from mabtuner.bandit import (
    ArmScore,
    LinearModelState,
    UcbParameters,
    constant_alpha,
    estimate_theta,
    forget,
    sqrt_log_alpha,
    ucb_score,
    update,
)


def batch_ridge(contexts: np.ndarray, rewards: np.ndarray, lam: float) -> np.ndarray:
    """Independent oracle: dense solve of (X'X + lam I) theta = X'r."""
    d = contexts.shape[1]
    return np.linalg.solve(contexts.T @ contexts + lam * np.eye(d), contexts.T @ rewards)


def params(alpha: float = 1.0) -> UcbParameters:
    return UcbParameters(alpha_schedule=constant_alpha(alpha))


class TestEstimateTheta:
    def test_fresh_state_gives_zero(self):
        state = LinearModelState.fresh(3, lam=1.0)
        assert np.allclose(estimate_theta(state), 0.0)

    def test_diagonal_closed_form(self):
        # V = diag(2, 1), b = (2, 0)  =>  theta = (1, 0)
        state = LinearModelState(v=np.diag([2.0, 1.0]), b=np.array([2.0, 0.0]), d=2, lam=1.0)
        assert np.allclose(estimate_theta(state), [1.0, 0.0])

    def test_matches_batch_ridge_oracle(self):
        rng = np.random.default_rng(7)
        d, lam = 4, 1.0
        contexts = rng.normal(size=(20, d))
        rewards = rng.normal(size=20)
        state = LinearModelState.fresh(d, lam)
        state = update(state, list(zip(contexts, rewards)))
        expected = batch_ridge(contexts, rewards, lam)
        assert np.allclose(estimate_theta(state), expected, rtol=1e-9, atol=1e-12)

    def test_pure(self):
        state = LinearModelState.fresh(2)
        before = state.v.copy()
        estimate_theta(state)
        assert np.array_equal(state.v, before)


class TestUcbScore:
    def test_fresh_state_unit_direction(self):
        state = LinearModelState.fresh(2, lam=1.0)
        score = ucb_score(state, params(alpha=1.0), [1.0, 0.0])
        assert score.expected == pytest.approx(0.0)
        assert score.ucb == pytest.approx(1.0)

    def test_zero_alpha_disables_exploration(self):
        state = LinearModelState(v=np.diag([2.0, 1.0]), b=np.array([2.0, 0.0]), d=2, lam=1.0)
        score = ucb_score(state, params(alpha=0.0), [1.0, 1.0])
        assert score.ucb == score.expected

    def test_diagonal_closed_form(self):
        # V = diag(2, 1), b = (2, 0), x = (1, 0): expected 1, bonus sqrt(1/2)
        state = LinearModelState(v=np.diag([2.0, 1.0]), b=np.array([2.0, 0.0]), d=2, lam=1.0)
        score = ucb_score(state, params(alpha=1.0), [1.0, 0.0])
        assert score.expected == pytest.approx(1.0)
        assert score.ucb == pytest.approx(1.0 + np.sqrt(0.5))

    def test_dimension_mismatch(self):
        state = LinearModelState.fresh(3)
        with pytest.raises(ValueError, match="dimension"):
            ucb_score(state, params(), [1.0, 2.0])

    def test_ucb_never_below_expected(self):
        rng = np.random.default_rng(3)
        state = LinearModelState.fresh(4)
        state = update(state, [(rng.normal(size=4), rng.normal()) for _ in range(6)])
        for _ in range(50):
            score = ucb_score(state, params(alpha=rng.uniform(0, 3)), rng.normal(size=4))
            assert score.ucb >= score.expected

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(11)
        state = update(
            LinearModelState.fresh(3), [(rng.normal(size=3), rng.normal()) for _ in range(5)]
        )
        x = rng.normal(size=3)
        alphas = sorted(rng.uniform(0, 2, size=6))
        ucbs = [ucb_score(state, params(alpha=a), x).ucb for a in alphas]
        assert all(lo <= hi + 1e-12 for lo, hi in zip(ucbs, ucbs[1:]))

    def test_bonus_shrinks_with_observations_along_direction(self):
        state = LinearModelState.fresh(3)
        x = np.array([1.0, 0.5, 0.0])
        widths = []
        for _ in range(5):
            score = ucb_score(state, params(alpha=1.0), x)
            widths.append(score.ucb - score.expected)
            state = update(state, [(x, 1.0)])
        assert all(later <= earlier + 1e-12 for earlier, later in zip(widths, widths[1:]))

    def test_weight_sharing_identical_contexts_identical_scores(self):
        rng = np.random.default_rng(5)
        state = update(
            LinearModelState.fresh(4), [(rng.normal(size=4), rng.normal()) for _ in range(8)]
        )
        x = rng.normal(size=4)
        a = ucb_score(state, params(), x, arm_id="arm_a")
        b = ucb_score(state, params(), x, arm_id="arm_b")
        assert (a.expected, a.ucb) == (b.expected, b.ucb)


class TestUpdate:
    def test_empty_round_only_advances_round_counter(self):
        state = LinearModelState.fresh(2)
        after = update(state, [])
        assert after.t == state.t + 1
        assert np.array_equal(after.v, state.v)
        assert np.array_equal(after.b, state.b)

    def test_single_observation_outer_product(self):
        state = LinearModelState.fresh(2, lam=1.0)
        after = update(state, [(np.array([1.0, 0.0]), 2.0)])
        assert np.allclose(after.v, np.diag([2.0, 1.0]))
        assert np.allclose(after.b, [2.0, 0.0])

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        obs = [(rng.normal(size=3), rng.normal()) for _ in range(7)]
        state = LinearModelState.fresh(3)
        forward = update(state, obs)
        backward = update(state, list(reversed(obs)))
        assert np.allclose(forward.v, backward.v)
        assert np.allclose(forward.b, backward.b)

    def test_input_state_not_mutated(self):
        state = LinearModelState.fresh(2)
        v_before = state.v.copy()
        update(state, [(np.ones(2), 1.0)])
        assert np.array_equal(state.v, v_before)

    def test_positive_definite_after_many_updates(self):
        rng = np.random.default_rng(13)
        state = LinearModelState.fresh(4, lam=1.0)
        for _ in range(100):
            obs = [(rng.normal(size=4), rng.normal()) for _ in range(100)]
            state = update(state, obs)
        np.linalg.cholesky(state.v)  # raises if not positive definite
        # Replay equivalence after 10^4 observations.
        assert state.t == 100

    def test_replay_equivalence_across_rounds(self):
        rng = np.random.default_rng(17)
        d, lam = 4, 2.0
        state = LinearModelState.fresh(d, lam)
        all_contexts, all_rewards = [], []
        for _ in range(10):
            k = rng.integers(0, 4)
            contexts = rng.normal(size=(k, d))
            rewards = rng.normal(size=k)
            state = update(state, list(zip(contexts, rewards)))
            all_contexts.extend(contexts)
            all_rewards.extend(rewards)
        expected = batch_ridge(np.array(all_contexts), np.array(all_rewards), lam)
        got = estimate_theta(state)
        assert np.allclose(got, expected, rtol=1e-9, atol=1e-12)
        # V equals lam*I plus the sum of all outer products.
        x = np.array(all_contexts)
        assert np.allclose(state.v, lam * np.eye(d) + x.T @ x)


class TestForget:
    def test_resets_to_prior(self):
        rng = np.random.default_rng(1)
        state = update(
            LinearModelState.fresh(3, lam=0.5),
            [(rng.normal(size=3), rng.normal()) for _ in range(5)],
        )
        fresh = forget(state)
        assert np.allclose(fresh.v, 0.5 * np.eye(3))
        assert np.allclose(fresh.b, 0.0)
        assert fresh.t == state.t
        assert (fresh.d, fresh.lam) == (state.d, state.lam)

    def test_theta_zero_after_forget(self):
        state = update(LinearModelState.fresh(2), [(np.ones(2), 3.0)])
        assert np.allclose(estimate_theta(forget(state)), 0.0)

    def test_idempotent(self):
        state = update(LinearModelState.fresh(2), [(np.ones(2), 3.0)])
        once, twice = forget(state), forget(forget(state))
        assert np.array_equal(once.v, twice.v)
        assert np.array_equal(once.b, twice.b)
        assert once.t == twice.t


class TestParameters:
    def test_fresh_validates_inputs(self):
        with pytest.raises(ValueError):
            LinearModelState.fresh(0)
        with pytest.raises(ValueError):
            LinearModelState.fresh(2, lam=0.0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            constant_alpha(-0.1)
        with pytest.raises(ValueError):
            sqrt_log_alpha(-1.0)

    def test_sqrt_log_schedule_grows(self):
        schedule = sqrt_log_alpha(2.0)
        values = [schedule(t) for t in (1, 2, 10, 100)]
        assert values[0] == 0.0
        assert all(lo <= hi for lo, hi in zip(values, values[1:]))
