"""
Confidence, surrogate reward, dynamic threshold and pseudo-expert filtering.

信頼度 D、代理報酬 R = -log(1 - D)、動的閾値 tau、疑似エキスパートの選別。

Noise layout: evaluating n pairs draws one array of shape (T, M, n, d) from the
noise source, ordered (step, draw, pair, dimension). Rows passed to the noise
predictor follow the same order flattened.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import ShapeError, UndefinedStatisticError
from diffusion import NoisePredictor, Normalizer, diffusion_loss, fit_normalizer, init_noise_predictor, reverse_sample


@dataclass(frozen=True)
class DiscriminatorModel:
    """
    Attributes:
        eps_net (NoisePredictor): Noise predictor eps_phi.
        sched (DiffusionSchedule): Diffusion schedule.
        normalizer (Normalizer): Frozen expert statistics.
        clamp_delta (float): Confidences are clamped to [delta, 1 - delta].
        noise_draws (int): Noise draws M per step t.
    """

    eps_net: NoisePredictor
    sched: object
    normalizer: Normalizer
    clamp_delta: float = 1e-6
    noise_draws: int = 1

    @property
    def data_dim(self):
        return self.eps_net.data_dim

    def with_eps_net(self, eps_net):
        return DiscriminatorModel(eps_net, self.sched, self.normalizer, self.clamp_delta, self.noise_draws)


def init_discriminator(expert_pairs, sched, hidden, embed_dim, activation, rng, clamp_delta=1e-6, noise_draws=1):
    """
    Creates an untrained discriminator whose normalizer is fitted on the expert pairs.

    Args:
        expert_pairs (ndarray): (n, d) raw expert (s, a) rows.
        sched (DiffusionSchedule): Diffusion schedule.
        hidden (sequence of int): Noise-predictor hidden widths.
        embed_dim (int): Step-embedding width.
        activation (str): Hidden activation.
        rng (numpy.random.Generator): Initialization randomness.
        clamp_delta (float): Confidence clamp.
        noise_draws (int): Noise draws per step.

    Returns:
        DiscriminatorModel: Untrained model.
    """
    expert_pairs = np.asarray(expert_pairs, dtype=np.float64)
    eps_net = init_noise_predictor(expert_pairs.shape[1], sched.T, hidden, embed_dim, activation, rng)
    return DiscriminatorModel(eps_net, sched, fit_normalizer(expert_pairs), float(clamp_delta), int(noise_draws))


def draw_noise(model, n, noise_source):
    return noise_source.standard_normal((model.sched.T, model.noise_draws, n, model.data_dim))


def stacked_rows(model, x_norm, eps):
    """Flattens (x, eps) into predictor rows ordered (step, draw, pair); returns (x0, t, eps) rows."""
    T, M, n, d = eps.shape
    x0 = np.tile(x_norm, (T * M, 1))
    steps = np.repeat(np.arange(1, T + 1), M * n)
    return x0, steps, eps.reshape(-1, d)


def step_losses(model, x_norm, eps):
    """Per-step denoising losses, shape (T, M, n), for normalized pairs."""
    T, M, n, _ = eps.shape
    x0, steps, flat_eps = stacked_rows(model, x_norm, eps)
    return np.asarray(diffusion_loss(model.eps_net, x0, steps, flat_eps, model.sched)).reshape(T, M, n)


def confidence_from_losses(losses, clamp_delta):
    """
    Clamped mean of exp(-L) over steps (and noise draws).

    Args:
        losses (ndarray): (T,) for one pair or (T, M, n) for a batch.
        clamp_delta (float): Clamp bound.

    Returns:
        float or ndarray: Confidence per pair.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim == 1:
        raw = float(np.mean(np.exp(-losses)))
        return float(np.clip(raw, clamp_delta, 1.0 - clamp_delta))
    raw = np.exp(-losses).mean(axis=(0, 1))
    return np.clip(raw, clamp_delta, 1.0 - clamp_delta)


def _as_pairs(model, pairs):
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim == 1:
        pairs = pairs[None, :]
    if pairs.ndim != 2 or pairs.shape[1] != model.data_dim:
        raise ShapeError(f"pairs must have shape (n, {model.data_dim}), got {np.shape(pairs)}")
    return pairs


def confidence_batch(model, pairs, noise_source):
    """
    Confidences of raw (s, a) rows, using fresh noise for every (step, draw, pair).

    Args:
        model (DiscriminatorModel): Discriminator.
        pairs (ndarray): (n, d) raw concatenated pairs.
        noise_source (numpy.random.Generator): Noise source.

    Returns:
        ndarray: (n,) confidences in [clamp_delta, 1 - clamp_delta].
    """
    pairs = _as_pairs(model, pairs)
    if pairs.shape[0] == 0:
        return np.zeros(0)
    eps = draw_noise(model, pairs.shape[0], noise_source)
    losses = step_losses(model, model.normalizer.normalize(pairs), eps)
    return confidence_from_losses(losses, model.clamp_delta)


def _concat(model, s, a):
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if s.ndim != 1 or a.ndim != 1 or s.size + a.size != model.data_dim:
        raise ShapeError(f"state and action lengths must add up to {model.data_dim}")
    return np.concatenate([s, a])


def confidence(model, s, a, noise_source):
    """Confidence D(s, a) in (0, 1) for a single pair."""
    return float(confidence_batch(model, _concat(model, s, a), noise_source)[0])


def reward_from_confidence(conf):
    """Surrogate reward -log(1 - D)."""
    return -np.log1p(-np.asarray(conf, dtype=np.float64))


def surrogate_reward(model, s, a, noise_source):
    """
    Surrogate reward R(s, a) = -log(1 - D(s, a)), finite thanks to the clamp.

    代理報酬。クランプにより常に有限。
    """
    return float(reward_from_confidence(confidence(model, s, a, noise_source)))


def surrogate_reward_batch(model, states, actions, noise_source):
    """Surrogate rewards for (n, ds) states and (n, da) actions."""
    pairs = np.concatenate([np.atleast_2d(states), np.atleast_2d(actions)], axis=1)
    return reward_from_confidence(confidence_batch(model, pairs, noise_source))


def dynamic_threshold(model, expert_batch, noise_source):
    """
    Acceptance threshold tau: the mean confidence over an expert batch.

    Raises:
        UndefinedStatisticError: If the batch is empty.
    """
    expert_batch = _as_pairs(model, expert_batch)
    if expert_batch.shape[0] == 0:
        raise UndefinedStatisticError("dynamic threshold is undefined for an empty expert batch")
    return float(np.mean(confidence_batch(model, expert_batch, noise_source)))


def filter_pseudo(model, candidates, tau, noise_source):
    """
    Keeps the candidates whose confidence is strictly greater than tau, in order.

    Args:
        model (DiscriminatorModel): Discriminator.
        candidates (ndarray): (n, d) raw (denormalized) candidate pairs.
        tau (float): Threshold.
        noise_source (numpy.random.Generator): Noise source.

    Returns:
        ndarray: (k, d) accepted rows, k <= n.
    """
    candidates = _as_pairs(model, candidates)
    conf = confidence_batch(model, candidates, noise_source)
    return candidates[conf > tau]


def generate_pseudo(model, n, noise_source):
    """Runs the reverse chain and maps the n samples back to raw (s, a) space."""
    return model.normalizer.denormalize(reverse_sample(model.eps_net, model.sched, noise_source, n))
