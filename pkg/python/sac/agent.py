"""
SAC actor, critics, temperature and the combined update.

SAC の方策・価値関数・温度パラメータと更新処理。
Actor output is [mean, log_std] per action dimension; log_std is clipped to
[LOG_STD_MIN, LOG_STD_MAX] and receives no gradient outside that range.
"""

from dataclasses import dataclass, replace

import numpy as np

from ail_errors import NonFiniteError, ShapeError
from nn_core import ParamVector, adam_init, adam_step, backward, forward, forward_cache, init_dense, penultimate

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PolicyBundle:
    """
    Attributes:
        actor (DenseNet): state -> [mean, log_std].
        q1, q2 (DenseNet): (state, action) -> Q.
        q1_target, q2_target (DenseNet): Target critics.
        log_alpha (float): Log entropy temperature.
        gamma (float): Discount.
        target_update_rate (float): Soft-update coefficient rho.
        target_entropy (float): Temperature target, -dim(A) by default.
        action_scale (float): Actions lie in [-action_scale, action_scale].
        learn_temperature (bool): Whether the temperature is optimized.
    """

    actor: object
    q1: object
    q2: object
    q1_target: object
    q2_target: object
    log_alpha: float
    gamma: float
    target_update_rate: float
    target_entropy: float
    action_scale: float = 1.0
    learn_temperature: bool = True

    @property
    def state_dim(self):
        return self.actor.input_size

    @property
    def action_dim(self):
        return self.actor.output_size // 2

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha))


@dataclass(frozen=True)
class SacOptimizers:
    actor: object
    q1: object
    q2: object
    alpha: object


@dataclass(frozen=True)
class SacBatch:
    """Transitions with surrogate rewards; terminals mark true terminations only."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


@dataclass(frozen=True)
class SacReport:
    critic_loss: float
    actor_loss: float
    alpha_loss: float
    alpha: float
    mean_q: float
    mean_target: float


def init_policy(state_dim, action_dim, hidden, activation, rng, gamma=0.99, target_update_rate=0.005,
                init_alpha=0.2, action_scale=1.0, learn_temperature=True):
    """
    Creates a PolicyBundle; target critics start as exact copies of the critics.

    Args:
        state_dim, action_dim (int): Environment dimensions.
        hidden (sequence of int): Hidden widths for actor and critics.
        activation (str): Hidden activation.
        rng (numpy.random.Generator): Initialization randomness.
        gamma (float): Discount in [0, 1).
        target_update_rate (float): rho in (0, 1].
        init_alpha (float): Initial temperature, > 0.
        action_scale (float): Action bound.
        learn_temperature (bool): Optimize the temperature.

    Returns:
        PolicyBundle: Fresh policy.
    """
    if not (0.0 <= gamma < 1.0) or not (0.0 < target_update_rate <= 1.0) or init_alpha <= 0.0:
        raise ShapeError(f"invalid SAC settings: gamma={gamma}, rho={target_update_rate}, alpha={init_alpha}")
    actor = init_dense([state_dim, *hidden, 2 * action_dim], activation, rng, output_scale=0.1)
    critic_sizes = [state_dim + action_dim, *hidden, 1]
    q1 = init_dense(critic_sizes, activation, rng)
    q2 = init_dense(critic_sizes, activation, rng)
    return PolicyBundle(actor, q1, q2, q1, q2, float(np.log(init_alpha)), float(gamma), float(target_update_rate),
                        -float(action_dim), float(action_scale), bool(learn_temperature))


def init_optimizers(bundle, actor_lr, critic_lr, alpha_lr):
    return SacOptimizers(
        adam_init(bundle.actor, actor_lr),
        adam_init(bundle.q1, critic_lr),
        adam_init(bundle.q2, critic_lr),
        adam_init(ParamVector((np.array(bundle.log_alpha),)), alpha_lr),
    )


def _states(bundle, states):
    states = np.asarray(states, dtype=np.float64)
    single = states.ndim == 1
    batch = states[None, :] if single else states
    if batch.ndim != 2 or batch.shape[1] != bundle.state_dim:
        raise ShapeError(f"states must have last dimension {bundle.state_dim}, got shape {states.shape}")
    return batch, single


def _log_one_minus_tanh_sq(u):
    # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def _squashed_sample(bundle, states, rng):
    out, cache = forward_cache(bundle.actor, states)
    da = bundle.action_dim
    mu = out[:, :da]
    raw_log_std = out[:, da:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    z = rng.standard_normal(mu.shape)
    u = mu + std * z
    squashed = np.tanh(u)
    log_prob = np.sum(-0.5 * z * z - log_std - _HALF_LOG_2PI - _log_one_minus_tanh_sq(u), axis=1)
    log_prob = log_prob - da * np.log(bundle.action_scale)
    return {
        "cache": cache,
        "mu": mu,
        "raw_log_std": raw_log_std,
        "log_std": log_std,
        "std": std,
        "z": z,
        "u": u,
        "squashed": squashed,
        "action": bundle.action_scale * squashed,
        "log_prob": log_prob,
    }


def act_with_log_prob(bundle, states, rng):
    """
    Samples squashed-Gaussian actions and their log-probabilities.

    Returns:
        tuple: (actions, log_probs); a vector and a float for a single state.
    """
    batch, single = _states(bundle, states)
    sample = _squashed_sample(bundle, batch, rng)
    if single:
        return sample["action"][0], float(sample["log_prob"][0])
    return sample["action"], sample["log_prob"]


def act(bundle, state, mode, rng=None):
    """
    Selects an action.

    行動を選択する。stochastic はスカッシュ付きガウスからサンプル、
    deterministic は平均の tanh を返す。

    Args:
        bundle (PolicyBundle): Policy.
        state (ndarray): (ds,) state or (n, ds) batch.
        mode (str): "stochastic" or "deterministic".
        rng (numpy.random.Generator or None): Needed for stochastic mode.

    Returns:
        ndarray: Action(s) within [-action_scale, action_scale].
    """
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs a random generator")
        return act_with_log_prob(bundle, state, rng)[0]
    if mode != "deterministic":
        raise ValueError(f"unknown action mode '{mode}'")
    batch, single = _states(bundle, state)
    mu = forward(bundle.actor, batch)[:, :bundle.action_dim]
    actions = bundle.action_scale * np.tanh(mu)
    return actions[0] if single else actions


def _critic_inputs(states, actions):
    return np.concatenate([states, actions], axis=1)


def critic_features(bundle, pairs):
    """Penultimate-layer features of Q1 for (n, ds + da) pairs."""
    return penultimate(bundle.q1, np.asarray(pairs, dtype=np.float64))


def critic_target(bundle, rewards, next_states, terminals, rng):
    """
    Soft Bellman target y = r + gamma (1 - terminal) (min(Q1', Q2')(s', a') - alpha log pi(a'|s')).

    Args:
        bundle (PolicyBundle): Policy.
        rewards (ndarray): (n,) surrogate rewards.
        next_states (ndarray): (n, ds).
        terminals (ndarray): (n,) 1 for true terminations.
        rng (numpy.random.Generator): Draws a' ~ pi(.|s').

    Returns:
        ndarray: (n,) targets.
    """
    next_states, _ = _states(bundle, next_states)
    sample = _squashed_sample(bundle, next_states, rng)
    x = _critic_inputs(next_states, sample["action"])
    q_next = np.minimum(forward(bundle.q1_target, x)[:, 0], forward(bundle.q2_target, x)[:, 0])
    soft_value = q_next - bundle.alpha * sample["log_prob"]
    rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
    terminals = np.asarray(terminals, dtype=np.float64).reshape(-1)
    return rewards + bundle.gamma * (1.0 - terminals) * soft_value


def soft_update(target, source, rate):
    """Returns target with parameters rate * source + (1 - rate) * target."""
    mixed = [rate * s + (1.0 - rate) * t for s, t in zip(source.parameters(), target.parameters())]
    return target.with_parameters(mixed)


def _critic_step(net, state, x, y):
    q, cache = forward_cache(net, x)
    err = q[:, 0] - y
    loss = float(np.mean(err * err))
    grads = backward(net, x, (2.0 * err / err.shape[0])[:, None], cache=cache)
    net, state = adam_step(net, state, grads.parameters)
    return net, state, loss, q[:, 0]


def _check(name, value, step_info):
    if not np.isfinite(value):
        raise NonFiniteError(f"non-finite {name} in SAC update ({step_info})")


def sac_update(bundle, batch, optimizers, rng):
    """
    One critic step, one actor step, one temperature step and a soft target update.

    クリティック・アクター・温度をそれぞれ 1 ステップ更新し、ターゲットをソフト更新する。

    Args:
        bundle (PolicyBundle): Current policy.
        batch (SacBatch): Non-empty batch with finite surrogate rewards.
        optimizers (SacOptimizers): Adam states.
        rng (numpy.random.Generator): Action-sampling randomness.

    Returns:
        tuple: (PolicyBundle, SacOptimizers, SacReport).

    Raises:
        ShapeError: On an empty batch or non-finite rewards.
        NonFiniteError: If a loss becomes NaN/Inf.
    """
    states, _ = _states(bundle, batch.states)
    n = states.shape[0]
    if n == 0:
        raise ShapeError("SAC batch is empty")
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    if not np.all(np.isfinite(rewards)):
        raise ShapeError("SAC batch holds non-finite rewards")
    actions = np.asarray(batch.actions, dtype=np.float64)

    # Critics
    y = critic_target(bundle, rewards, batch.next_states, batch.terminals, rng)
    x = _critic_inputs(states, actions)
    q1, q1_opt, loss1, q_pred = _critic_step(bundle.q1, optimizers.q1, x, y)
    q2, q2_opt, loss2, _ = _critic_step(bundle.q2, optimizers.q2, x, y)
    critic_loss = 0.5 * (loss1 + loss2)
    info = f"batch={n}, mean_target={float(np.mean(y)):.6g}, mean_reward={float(np.mean(rewards)):.6g}"
    _check("critic loss", critic_loss, info)

    # Actor, against the updated critics
    alpha = bundle.alpha
    sample = _squashed_sample(bundle, states, rng)
    xa = _critic_inputs(states, sample["action"])
    q1_val, c1 = forward_cache(q1, xa)
    q2_val, c2 = forward_cache(q2, xa)
    use_q1 = q1_val[:, 0] <= q2_val[:, 0]
    q_min = np.where(use_q1, q1_val[:, 0], q2_val[:, 0])
    ones = np.ones((n, 1))
    ds = bundle.state_dim
    g1 = backward(q1, xa, ones, cache=c1).input[:, ds:]
    g2 = backward(q2, xa, ones, cache=c2).input[:, ds:]
    grad_action = np.where(use_q1[:, None], g1, g2)

    actor_loss = float(np.mean(alpha * sample["log_prob"] - q_min))
    _check("actor loss", actor_loss, info)
    t = sample["squashed"]
    d_u = 2.0 * alpha * t - grad_action * bundle.action_scale * (1.0 - t * t)
    d_mu = d_u / n
    inside = (sample["raw_log_std"] > LOG_STD_MIN) & (sample["raw_log_std"] < LOG_STD_MAX)
    d_log_std = (-alpha + d_u * sample["std"] * sample["z"]) / n * inside
    actor_grads = backward(bundle.actor, states, np.concatenate([d_mu, d_log_std], axis=1), cache=sample["cache"])
    actor, actor_opt = adam_step(bundle.actor, optimizers.actor, actor_grads.parameters)

    # Temperature
    entropy_gap = float(np.mean(sample["log_prob"] + bundle.target_entropy))
    alpha_loss = -bundle.log_alpha * entropy_gap
    log_alpha, alpha_opt = bundle.log_alpha, optimizers.alpha
    if bundle.learn_temperature:
        params, alpha_opt = adam_step(ParamVector((np.array(bundle.log_alpha),)), optimizers.alpha, [np.array(-entropy_gap)])
        log_alpha = float(params.arrays[0])
    _check("temperature", log_alpha, info)

    rate = bundle.target_update_rate
    updated = replace(
        bundle,
        actor=actor,
        q1=q1,
        q2=q2,
        q1_target=soft_update(bundle.q1_target, q1, rate),
        q2_target=soft_update(bundle.q2_target, q2, rate),
        log_alpha=log_alpha,
    )
    report = SacReport(critic_loss, actor_loss, float(alpha_loss), float(np.exp(log_alpha)), float(np.mean(q_pred)), float(np.mean(y)))
    return updated, SacOptimizers(actor_opt, q1_opt, q2_opt, alpha_opt), report
