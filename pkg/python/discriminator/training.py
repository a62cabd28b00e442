"""
Importance-weighted adversarial training step.

重要度重み付きの判別器学習ステップ。
Loss = sum_i w_i BCE(D_i, 1) / n_pseudo + sum_i w_i BCE(D_i, 1) / n_expert
     + sum_j BCE(D_j, 0) / n_agent, with empty groups contributing 0.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import NonFiniteError, RejectedBatchError, ShapeError
from diffusion.ddpm import forward_noise
from discriminator.model import draw_noise, stacked_rows
from nn_core import adam_step


@dataclass(frozen=True)
class LabeledBatch:
    """
    One discriminator minibatch of normalized pairs.

    Attributes:
        expert (ndarray): (n_e, d) expert pairs.
        pseudo (ndarray): (n_p, d) pseudo-expert pairs (may be empty).
        agent (ndarray): (n_a, d) agent pairs.
        expert_weights (ndarray): (n_e,) positive importance weights.
        pseudo_weights (ndarray): (n_p,) positive importance weights.
    """

    expert: np.ndarray
    pseudo: np.ndarray
    agent: np.ndarray
    expert_weights: np.ndarray
    pseudo_weights: np.ndarray

    def __post_init__(self):
        for name in ("expert", "pseudo", "agent", "expert_weights", "pseudo_weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.expert.shape[0] != self.expert_weights.shape[0] or self.pseudo.shape[0] != self.pseudo_weights.shape[0]:
            raise ShapeError("one importance weight per expert and pseudo-expert pair is required")
        weights = np.concatenate([self.expert_weights, self.pseudo_weights])
        if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise ShapeError("importance weights must be finite and strictly positive")

    def groups(self):
        """Returns [(name, pairs, weights, positive)] for the non-empty groups."""
        out = []
        for name, pairs, weights, positive in (
            ("expert", self.expert, self.expert_weights, True),
            ("pseudo", self.pseudo, self.pseudo_weights, True),
            ("agent", self.agent, np.ones(self.agent.shape[0]), False),
        ):
            if pairs.shape[0] > 0:
                out.append((name, pairs, weights, positive))
        return out


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    terms: dict
    confidences: dict


@dataclass(frozen=True)
class DiscriminatorUpdate:
    """Result of train_step(); confidences are the pre-update values used by the loss."""

    model: object
    optimizer: object
    loss: float
    terms: dict
    confidences: dict


def group_bce(conf, weights, positive):
    """
    Weighted, mean-reduced binary cross-entropy of one group.

    Args:
        conf (ndarray): Clamped confidences.
        weights (ndarray): Per-sample weights.
        positive (bool): Target 1 (expert, pseudo-expert) or 0 (agent).

    Returns:
        float: sum_i w_i * BCE(D_i, target) / n.
    """
    conf = np.asarray(conf, dtype=np.float64)
    per_sample = -np.log(conf) if positive else -np.log1p(-conf)
    return float(np.sum(np.asarray(weights) * per_sample) / conf.shape[0])


def _check_batch(model, batch):
    if batch.agent.shape[0] == 0 or (batch.expert.shape[0] == 0 and batch.pseudo.shape[0] == 0):
        raise RejectedBatchError("batch needs agent pairs and at least one expert or pseudo-expert pair")
    for name, pairs, _, _ in batch.groups():
        if pairs.ndim != 2 or pairs.shape[1] != model.data_dim:
            raise ShapeError(f"{name} pairs must have shape (n, {model.data_dim})")


def _evaluate(model, batch, noise_source, with_grads):
    _check_batch(model, batch)
    groups = batch.groups()
    x = np.concatenate([g[1] for g in groups])
    T = model.sched.T
    M = model.noise_draws
    n = x.shape[0]
    eps = draw_noise(model, n, noise_source)
    x0, steps, flat_eps = stacked_rows(model, x, eps)
    xt = forward_noise(x0, steps, flat_eps, model.sched)
    pred, cache = model.eps_net.predict_cache(xt, steps)
    residual = flat_eps - pred
    losses = np.sum(residual * residual, axis=1)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError("non-finite discriminator loss")

    kernel = np.exp(-losses).reshape(T, M, n)
    raw = kernel.mean(axis=(0, 1))
    delta = model.clamp_delta
    conf = np.clip(raw, delta, 1.0 - delta)

    terms, confidences = {}, {}
    d_conf = np.zeros(n)
    offset = 0
    for name, pairs, weights, positive in groups:
        size = pairs.shape[0]
        part = slice(offset, offset + size)
        terms[name] = group_bce(conf[part], weights, positive)
        confidences[name] = conf[part]
        if positive:
            d_conf[part] = -weights / (size * conf[part])
        else:
            d_conf[part] = 1.0 / (size * (1.0 - conf[part]))
        offset += size
    total = float(sum(terms.values()))
    for name in ("expert", "pseudo", "agent"):
        terms.setdefault(name, 0.0)
        confidences.setdefault(name, np.zeros(0))

    if not with_grads:
        return total, terms, confidences, None

    # Clamped confidences pass no gradient.
    d_conf = d_conf * ((raw > delta) & (raw < 1.0 - delta))
    d_losses = -(kernel / (T * M)) * d_conf[None, None, :]
    grads = model.eps_net.backward(cache, -2.0 * residual * d_losses.reshape(-1)[:, None])
    return total, terms, confidences, grads


def batch_loss(model, batch, noise_source):
    """
    Evaluates the weighted discriminator loss without updating the model.

    Returns:
        LossBreakdown: Total loss, per-group terms and per-group confidences.
    """
    total, terms, confidences, _ = _evaluate(model, batch, noise_source, with_grads=False)
    return LossBreakdown(total, terms, confidences)


def train_step(model, batch, optimizer, noise_source):
    """
    Computes the weighted adversarial loss and applies one Adam step to eps_phi.

    重み付き敵対的損失を計算し、eps_phi に Adam を 1 ステップ適用する。

    Args:
        model (DiscriminatorModel): Current discriminator.
        batch (LabeledBatch): Normalized expert / pseudo-expert / agent pairs.
        optimizer (AdamState): Optimizer state for model.eps_net.
        noise_source (numpy.random.Generator): Noise for this step.

    Returns:
        DiscriminatorUpdate: Updated model and optimizer, the loss and the confidences.

    Raises:
        RejectedBatchError: If the agent group or both positive groups are empty.
    """
    total, terms, confidences, grads = _evaluate(model, batch, noise_source, with_grads=True)
    eps_net, optimizer = adam_step(model.eps_net, optimizer, grads)
    return DiscriminatorUpdate(model.with_eps_net(eps_net), optimizer, total, terms, confidences)
