import math

import numpy as np
import pytest

from ail_errors import RejectedBatchError, ShapeError, UndefinedStatisticError
from diffusion import Normalizer, build_schedule, diffusion_loss, init_noise_predictor
from discriminator import (
    DiscriminatorModel,
    LabeledBatch,
    batch_loss,
    confidence,
    confidence_batch,
    confidence_from_losses,
    dynamic_threshold,
    filter_pseudo,
    generate_pseudo,
    group_bce,
    init_discriminator,
    load_discriminator,
    reward_from_confidence,
    save_discriminator,
    surrogate_reward,
    train_step,
)
from nn_core import adam_init

DELTA = 1e-6


def _model(seed=0, dim=3, T=10, hidden=(16,), noise_draws=1):
    rng = np.random.default_rng(seed)
    expert = rng.normal(size=(50, dim))
    sched = build_schedule(T, 0.05, 0.45)
    return init_discriminator(expert, sched, list(hidden), 4, "tanh", rng, DELTA, noise_draws), expert


def test_zero_losses_clamp_to_upper_bound():
    assert confidence_from_losses(np.zeros(10), DELTA) == 1.0 - DELTA


def test_constant_ln2_losses_give_half_and_reward_ln2():
    conf = confidence_from_losses(np.full(10, math.log(2.0)), DELTA)
    assert conf == pytest.approx(0.5, abs=1e-15)
    assert float(reward_from_confidence(conf)) == pytest.approx(math.log(2.0), abs=1e-15)


def test_reward_at_clamp_bounds():
    assert float(reward_from_confidence(DELTA)) == pytest.approx(DELTA, rel=1e-6)
    assert float(reward_from_confidence(1.0 - DELTA)) == pytest.approx(13.815510557964274, abs=1e-9)
    assert np.isfinite(reward_from_confidence(1.0 - DELTA))


def test_confidence_matches_explicit_step_loop():
    model, expert = _model(seed=1)
    pairs = expert[:5] + 0.3
    conf = confidence_batch(model, pairs, np.random.default_rng(42))
    eps = np.random.default_rng(42).standard_normal((10, 1, 5, 3))
    x = model.normalizer.normalize(pairs)
    for i in range(5):
        total = 0.0
        for t in range(1, 11):
            total += math.exp(-diffusion_loss(model.eps_net, x[i], t, eps[t - 1, 0, i], model.sched))
        expected = min(max(total / 10, DELTA), 1.0 - DELTA)
        assert abs(conf[i] - expected) < 1e-12


def test_multiple_noise_draws_average_over_draws():
    model, expert = _model(seed=2, noise_draws=3)
    pairs = expert[:2]
    conf = confidence_batch(model, pairs, np.random.default_rng(5))
    eps = np.random.default_rng(5).standard_normal((10, 3, 2, 3))
    x = model.normalizer.normalize(pairs)
    for i in range(2):
        values = [
            math.exp(-diffusion_loss(model.eps_net, x[i], t, eps[t - 1, m, i], model.sched))
            for t in range(1, 11)
            for m in range(3)
        ]
        assert abs(conf[i] - min(max(sum(values) / 30, DELTA), 1 - DELTA)) < 1e-12


def test_single_pair_confidence_and_reward():
    model, expert = _model(seed=3)
    s, a = expert[0, :2], expert[0, 2:]
    conf = confidence(model, s, a, np.random.default_rng(9))
    assert DELTA <= conf <= 1 - DELTA
    reward = surrogate_reward(model, s, a, np.random.default_rng(9))
    assert reward == pytest.approx(-math.log(1 - conf), rel=1e-12)
    with pytest.raises(ShapeError):
        confidence(model, s, np.zeros(3), np.random.default_rng(9))


def test_dynamic_threshold_is_mean_confidence():
    model, expert = _model(seed=4)
    tau = dynamic_threshold(model, expert[:20], np.random.default_rng(11))
    conf = confidence_batch(model, expert[:20], np.random.default_rng(11))
    acc = 0.0
    for c in conf:
        acc += c
    assert tau == pytest.approx(acc / 20, abs=1e-15)
    with pytest.raises(UndefinedStatisticError):
        dynamic_threshold(model, np.zeros((0, 3)), np.random.default_rng(11))


def test_filter_pseudo_bounds_and_brute_force():
    model, expert = _model(seed=5)
    candidates = generate_pseudo(model, 40, np.random.default_rng(1))
    assert filter_pseudo(model, candidates, 1.0 - DELTA, np.random.default_rng(2)).shape == (0, 3)
    np.testing.assert_array_equal(filter_pseudo(model, candidates, 0.0, np.random.default_rng(2)), candidates)
    conf = confidence_batch(model, candidates, np.random.default_rng(3))
    tau = float(np.median(conf))
    accepted = filter_pseudo(model, candidates, tau, np.random.default_rng(3))
    expected = np.array([c for c, d in zip(candidates, conf) if d > tau])
    np.testing.assert_array_equal(accepted, expected)


def test_raising_one_step_loss_lowers_confidence():
    rng = np.random.default_rng(12)
    for _ in range(50):
        losses = rng.uniform(0.5, 3.0, size=10)
        base = confidence_from_losses(losses, DELTA)
        t = int(rng.integers(10))
        raised = losses.copy()
        raised[t] += rng.uniform(0.1, 2.0)
        assert confidence_from_losses(raised, DELTA) < base

    batch = rng.uniform(0.5, 3.0, size=(10, 2, 6))
    raised = batch.copy()
    raised[3, 1, :] += 1.0
    assert np.all(confidence_from_losses(raised, DELTA) < confidence_from_losses(batch, DELTA))


def test_filter_pseudo_shrinks_as_threshold_rises():
    model, expert = _model(seed=6)
    candidates = generate_pseudo(model, 60, np.random.default_rng(4))
    conf = confidence_batch(model, candidates, np.random.default_rng(5))
    thresholds = np.quantile(conf, [0.1, 0.3, 0.5, 0.8])
    previous = None
    for tau in thresholds:
        accepted = filter_pseudo(model, candidates, tau, np.random.default_rng(5))
        rows = {tuple(r) for r in accepted}
        if previous is not None:
            assert rows <= previous
            assert len(rows) <= len(previous)
        previous = rows


def test_group_bce_at_half_is_ln2():
    half = np.full(6, 0.5)
    assert group_bce(half, np.ones(6), True) == pytest.approx(math.log(2.0), abs=1e-15)
    assert group_bce(half, np.ones(6), False) == pytest.approx(math.log(2.0), abs=1e-15)


def _batch(rng, dim=3, weights=1.0):
    return LabeledBatch(
        expert=rng.normal(size=(8, dim)) * 0.1,
        pseudo=rng.normal(size=(6, dim)) * 0.1,
        agent=rng.normal(size=(10, dim)) + 2.0,
        expert_weights=np.full(8, weights) * np.linspace(0.5, 1.0, 8),
        pseudo_weights=np.full(6, weights),
    )


def test_doubling_weights_doubles_positive_terms():
    model, _ = _model(seed=6)
    one = batch_loss(model, _batch(np.random.default_rng(0), weights=1.0), np.random.default_rng(7))
    two = batch_loss(model, _batch(np.random.default_rng(0), weights=2.0), np.random.default_rng(7))
    assert two.terms["expert"] + two.terms["pseudo"] == pytest.approx(2 * (one.terms["expert"] + one.terms["pseudo"]), rel=1e-12)
    assert two.terms["agent"] == pytest.approx(one.terms["agent"], rel=1e-12)


def test_rejected_batches():
    model, _ = _model(seed=7)
    rng = np.random.default_rng(0)
    no_agent = LabeledBatch(rng.normal(size=(4, 3)), np.zeros((0, 3)), np.zeros((0, 3)), np.ones(4), np.zeros(0))
    with pytest.raises(RejectedBatchError):
        batch_loss(model, no_agent, rng)
    no_positive = LabeledBatch(np.zeros((0, 3)), np.zeros((0, 3)), rng.normal(size=(4, 3)), np.zeros(0), np.zeros(0))
    with pytest.raises(RejectedBatchError):
        batch_loss(model, no_positive, rng)
    with pytest.raises(ShapeError):
        LabeledBatch(rng.normal(size=(2, 3)), np.zeros((0, 3)), rng.normal(size=(2, 3)), np.array([1.0, 0.0]), np.zeros(0))


def test_empty_pseudo_group_contributes_zero():
    model, _ = _model(seed=8)
    rng = np.random.default_rng(1)
    batch = LabeledBatch(rng.normal(size=(4, 3)), np.zeros((0, 3)), rng.normal(size=(5, 3)), np.ones(4), np.zeros(0))
    result = batch_loss(model, batch, np.random.default_rng(2))
    assert result.terms["pseudo"] == 0.0
    assert result.total == pytest.approx(result.terms["expert"] + result.terms["agent"], rel=1e-15)


def test_train_step_reports_pre_update_confidences():
    model, _ = _model(seed=9)
    batch = _batch(np.random.default_rng(3))
    before = batch_loss(model, batch, np.random.default_rng(4))
    update = train_step(model, batch, adam_init(model.eps_net, 1e-3), np.random.default_rng(4))
    assert update.loss == pytest.approx(before.total, rel=1e-15)
    np.testing.assert_array_equal(update.confidences["expert"], before.confidences["expert"])
    assert update.optimizer.step == 1


@pytest.mark.slow
def test_repeated_steps_on_fixed_batch_reduce_loss():
    model, _ = _model(seed=10, hidden=(32, 32))
    batch = _batch(np.random.default_rng(5))
    optimizer = adam_init(model.eps_net, 5e-3)
    initial = batch_loss(model, batch, np.random.default_rng(123)).total
    for i in range(50):
        update = train_step(model, batch, optimizer, np.random.default_rng(1000 + i))
        model, optimizer = update.model, update.optimizer
    final = batch_loss(model, batch, np.random.default_rng(123)).total
    assert final < 0.8 * initial


@pytest.mark.slow
def test_separable_clusters_are_discriminated():
    rng = np.random.default_rng(11)
    sched = build_schedule(10, 0.05, 0.45)
    eps_net = init_noise_predictor(2, 10, [64, 64], 8, "tanh", rng)
    model = DiscriminatorModel(eps_net, sched, Normalizer(np.zeros(2), np.ones(2)), DELTA, 1)
    optimizer = adam_init(model.eps_net, 3e-3)
    noise = np.random.default_rng(12)
    for _ in range(500):
        batch = LabeledBatch(
            expert=rng.normal(size=(64, 2)) * 0.05,
            pseudo=np.zeros((0, 2)),
            agent=rng.normal(size=(64, 2)) * 0.05 + 3.0,
            expert_weights=np.ones(64),
            pseudo_weights=np.zeros(0),
        )
        update = train_step(model, batch, optimizer, noise)
        model, optimizer = update.model, update.optimizer
    expert_conf = confidence_batch(model, rng.normal(size=(200, 2)) * 0.05, noise).mean()
    agent_conf = confidence_batch(model, rng.normal(size=(200, 2)) * 0.05 + 3.0, noise).mean()
    assert expert_conf - agent_conf >= 0.3


def test_checkpoint_round_trip(tmp_path):
    model, expert = _model(seed=12)
    optimizer = adam_init(model.eps_net, 1e-3)
    update = train_step(model, _batch(np.random.default_rng(0)), optimizer, np.random.default_rng(1))
    save_discriminator(tmp_path / "disc.npz", update.model, update.optimizer)
    loaded, opt = load_discriminator(tmp_path / "disc.npz")
    assert opt.step == 1 and loaded.clamp_delta == DELTA and loaded.sched.T == 10
    a = confidence_batch(update.model, expert[:5], np.random.default_rng(2))
    b = confidence_batch(loaded, expert[:5], np.random.default_rng(2))
    np.testing.assert_array_equal(a, b)
    save_discriminator(tmp_path / "bare.npz", update.model)
    _, missing = load_discriminator(tmp_path / "bare.npz")
    assert missing is None
