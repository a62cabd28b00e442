import math
from dataclasses import replace

import numpy as np
import pytest

from ail_errors import EmptyBufferError, ShapeError
from nn_core import forward
from sac import (
    AgentReplayBuffer,
    SacBatch,
    act,
    act_with_log_prob,
    critic_features,
    critic_target,
    init_optimizers,
    init_policy,
    load_agent_buffer,
    load_policy,
    sac_update,
    save_agent_buffer,
    save_policy,
    soft_update,
)


def _bundle(seed=0, state_dim=3, action_dim=2, **kwargs):
    return init_policy(state_dim, action_dim, [16, 16], "relu", np.random.default_rng(seed), **kwargs)


def _batch(rng, n=32, state_dim=3, action_dim=2):
    return SacBatch(
        states=rng.normal(size=(n, state_dim)),
        actions=rng.uniform(-1, 1, size=(n, action_dim)),
        rewards=rng.normal(size=n),
        next_states=rng.normal(size=(n, state_dim)),
        terminals=np.zeros(n),
    )


def test_zero_mean_actor_gives_zero_deterministic_action():
    bundle = _bundle()
    actor = bundle.actor
    weights = list(actor.weights)
    biases = list(actor.biases)
    weights[-1] = np.zeros_like(weights[-1])
    biases[-1] = np.concatenate([np.zeros(2), np.array([0.3, -1.0])])
    zeroed = replace(bundle, actor=actor.with_parameters([p for pair in zip(weights, biases) for p in pair]))
    np.testing.assert_array_equal(act(zeroed, np.array([0.5, -2.0, 1.0]), "deterministic"), np.zeros(2))


def test_sampled_actions_respect_bounds():
    bundle = _bundle(seed=1, action_scale=2.0)
    states = np.random.default_rng(2).normal(size=(10000, 3)) * 5
    actions = act(bundle, states, "stochastic", np.random.default_rng(3))
    assert np.all(np.abs(actions) <= 2.0)
    with pytest.raises(ValueError):
        act(bundle, states[0], "stochastic")


def test_log_prob_matches_change_of_variables():
    bundle = _bundle(seed=4)
    states = np.random.default_rng(5).normal(size=(50, 3))
    actions, log_probs = act_with_log_prob(bundle, states, np.random.default_rng(6))
    out = forward(bundle.actor, states)
    mu, log_std = out[:, :2], np.clip(out[:, 2:], -5.0, 2.0)
    z = np.random.default_rng(6).standard_normal(mu.shape)
    u = mu + np.exp(log_std) * z
    np.testing.assert_allclose(actions, np.tanh(u), rtol=0, atol=1e-15)
    gaussian = np.sum(-0.5 * ((u - mu) / np.exp(log_std)) ** 2 - log_std - 0.5 * math.log(2 * math.pi), axis=1)
    expected = gaussian - np.sum(np.log(1.0 - np.tanh(u) ** 2), axis=1)
    np.testing.assert_allclose(log_probs, expected, rtol=0, atol=1e-8)


def test_critic_target_hand_computation():
    bundle = _bundle(seed=7, gamma=0.9)
    next_state = np.array([[0.2, -0.4, 1.1]])
    y = critic_target(bundle, np.array([1.5]), next_state, np.zeros(1), np.random.default_rng(8))
    action, log_prob = act_with_log_prob(bundle, next_state[0], np.random.default_rng(8))
    x = np.concatenate([next_state[0], action])
    q = min(forward(bundle.q1_target, x)[0], forward(bundle.q2_target, x)[0])
    expected = 1.5 + 0.9 * (q - 0.2 * log_prob)
    assert abs(y[0] - expected) < 1e-10
    terminal = critic_target(bundle, np.array([1.5]), next_state, np.ones(1), np.random.default_rng(8))
    assert terminal[0] == 1.5


def test_zero_discount_target_is_reward():
    bundle = _bundle(seed=9, gamma=0.0)
    rng = np.random.default_rng(10)
    rewards = rng.normal(size=5)
    np.testing.assert_array_equal(critic_target(bundle, rewards, rng.normal(size=(5, 3)), np.zeros(5), rng), rewards)


def test_soft_update_rate_one_copies_critics():
    bundle = _bundle(seed=11, target_update_rate=1.0)
    optimizers = init_optimizers(bundle, 1e-3, 1e-3, 1e-3)
    updated, _, _ = sac_update(bundle, _batch(np.random.default_rng(12)), optimizers, np.random.default_rng(13))
    for a, b in zip(updated.q1_target.parameters(), updated.q1.parameters()):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(updated.q2_target.parameters(), updated.q2.parameters()):
        np.testing.assert_array_equal(a, b)


def test_soft_update_mixture():
    a = _bundle(seed=14).q1
    b = _bundle(seed=15).q1
    mixed = soft_update(a, b, 0.25)
    for m, s, t in zip(mixed.parameters(), b.parameters(), a.parameters()):
        np.testing.assert_allclose(m, 0.25 * s + 0.75 * t)


def test_sac_update_changes_networks_and_temperature():
    bundle = _bundle(seed=16)
    optimizers = init_optimizers(bundle, 1e-3, 1e-3, 1e-3)
    updated, opts, report = sac_update(bundle, _batch(np.random.default_rng(17)), optimizers, np.random.default_rng(18))
    assert np.isfinite(report.critic_loss) and np.isfinite(report.actor_loss)
    assert updated.log_alpha != bundle.log_alpha
    assert opts.actor.step == 1 and opts.q1.step == 1 and opts.alpha.step == 1
    assert not np.array_equal(updated.actor.weights[0], bundle.actor.weights[0])


def test_fixed_temperature_is_not_optimized():
    bundle = _bundle(seed=19, learn_temperature=False)
    optimizers = init_optimizers(bundle, 1e-3, 1e-3, 1e-3)
    updated, _, _ = sac_update(bundle, _batch(np.random.default_rng(20)), optimizers, np.random.default_rng(21))
    assert updated.log_alpha == bundle.log_alpha


def test_sac_update_rejects_bad_batches():
    bundle = _bundle(seed=22)
    optimizers = init_optimizers(bundle, 1e-3, 1e-3, 1e-3)
    batch = _batch(np.random.default_rng(23))
    bad = replace(batch, rewards=np.full(32, np.nan))
    with pytest.raises(ShapeError):
        sac_update(bundle, bad, optimizers, np.random.default_rng(0))
    empty = SacBatch(np.zeros((0, 3)), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ShapeError):
        sac_update(bundle, empty, optimizers, np.random.default_rng(0))


@pytest.mark.slow
def test_policy_learns_best_action_on_one_state_task():
    bundle = init_policy(1, 1, [32, 32], "relu", np.random.default_rng(24), gamma=0.5, target_update_rate=0.05,
                         learn_temperature=False)
    bundle = replace(bundle, log_alpha=-20.0)
    optimizers = init_optimizers(bundle, 1e-3, 3e-3, 1e-3)
    rng = np.random.default_rng(25)
    state = np.ones((64, 1))
    for _ in range(1500):
        actions = rng.uniform(-1, 1, size=(64, 1))
        rewards = -(actions[:, 0] - 0.5) ** 2
        batch = SacBatch(state, actions, rewards, state, np.zeros(64))
        bundle, optimizers, _ = sac_update(bundle, batch, optimizers, rng)
    assert abs(act(bundle, np.array([1.0]), "deterministic")[0] - 0.5) < 0.2


def test_critic_features_width():
    bundle = _bundle(seed=26)
    features = critic_features(bundle, np.random.default_rng(27).normal(size=(7, 5)))
    assert features.shape == (7, 16)


def test_policy_checkpoint_round_trip(tmp_path):
    bundle = _bundle(seed=28, action_scale=2.0)
    optimizers = init_optimizers(bundle, 1e-3, 1e-3, 1e-3)
    bundle, optimizers, _ = sac_update(bundle, _batch(np.random.default_rng(29)), optimizers, np.random.default_rng(30))
    save_policy(tmp_path / "policy.npz", bundle, optimizers)
    loaded, opts = load_policy(tmp_path / "policy.npz")
    assert loaded.log_alpha == bundle.log_alpha and loaded.action_scale == 2.0
    assert opts.actor.step == 1
    states = np.random.default_rng(31).normal(size=(4, 3))
    np.testing.assert_array_equal(act(loaded, states, "deterministic"), act(bundle, states, "deterministic"))
    for a, b in zip(loaded.q2_target.parameters(), bundle.q2_target.parameters()):
        np.testing.assert_array_equal(a, b)


def test_agent_buffer_ring_and_round_trip(tmp_path):
    buffer = AgentReplayBuffer(3, 2, 1)
    with pytest.raises(EmptyBufferError):
        buffer.sample(1, np.random.default_rng(0))
    for i in range(5):
        buffer.push(np.full(2, i), np.array([i * 0.1]), np.full(2, i + 1), -float(i))
    assert len(buffer) == 3 and buffer.next_slot == 2
    np.testing.assert_array_equal(buffer.states[:, 0], [3.0, 4.0, 2.0])
    save_agent_buffer(tmp_path / "agent.npz", buffer)
    loaded = load_agent_buffer(tmp_path / "agent.npz")
    np.testing.assert_array_equal(loaded.states, buffer.states)
    np.testing.assert_array_equal(loaded.true_rewards, buffer.true_rewards)
    assert loaded.next_slot == buffer.next_slot
    a = buffer.sample(6, np.random.default_rng(1))
    b = loaded.sample(6, np.random.default_rng(1))
    np.testing.assert_array_equal(a.states, b.states)
