"""
Training loop: agent collection, discriminator updates with prioritized expert
replay, pseudo-expert generation, surrogate-reward SAC updates and evaluation.

学習ループ本体。各ステップで
    収集 → 判別器更新（優先度付き再生）→ 優先度更新 → 疑似エキスパート生成 → SAC 更新
を行い、一定間隔で評価・チェックポイントを書き出す。
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from ail_errors import TrainingAbort, UndefinedStatisticError
from diffusion import build_schedule
from discriminator import (
    LabeledBatch,
    dynamic_threshold,
    filter_pseudo,
    generate_pseudo,
    init_discriminator,
    load_discriminator,
    save_discriminator,
    surrogate_reward_batch,
    train_step,
)
from envs import random_controller, rollout, sample_initial_state, step
from harness.metrics import compute_pcc, evaluate_fd_to_expert
from harness.persistence import restore_rng, rng_state, run_logs
from nn_core import adam_init
from pedr import AnnealSchedule, PriorityBuffer, ReplayCoordinator, read_buffer_snapshot, write_buffer_snapshot
from record_io import load_json, write_json_atomic
from sac import (
    AgentReplayBuffer,
    SacBatch,
    act,
    init_optimizers,
    init_policy,
    load_agent_buffer,
    load_policy,
    sac_update,
    save_agent_buffer,
    save_policy,
)

RNG_STREAMS = ("init", "env", "policy", "noise", "replay", "generation", "eval")


@dataclass
class TrainingState:
    """Everything needed to continue a run from a step boundary."""

    config: object
    spec: object
    expert_pairs: list
    disc: object
    disc_opt: object
    policy: object
    policy_opt: object
    coordinator: object
    agent_buffer: object
    rngs: dict
    env_state: np.ndarray
    step: int = 0
    episode_t: int = 0
    tau: float = None
    acceptance_rate: float = None
    disc_loss: float = None
    last_expert_batch: np.ndarray = None
    evaluations: int = 0

    @property
    def all_expert_pairs(self):
        return np.concatenate(self.expert_pairs)


@dataclass(frozen=True)
class EvaluationResult:
    step: int
    true_returns: list
    surrogate_returns: list
    pcc: float
    fd_pseudo: float
    fd_random: float

    @property
    def mean_true_return(self):
        return sum(self.true_returns) / len(self.true_returns)

    @property
    def mean_surrogate_return(self):
        return sum(self.surrogate_returns) / len(self.surrogate_returns)


def spawn_rngs(seed):
    seeds = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(RNG_STREAMS, seeds)}


def _expert_buffers(config, spec, expert_pairs):
    zeta = config.zeta if config.use_pedr else 0.0
    buffers = []
    for pairs in expert_pairs:
        buffer = PriorityBuffer(pairs.shape[0], spec.state_dim, spec.action_dim, zeta)
        buffer.push_many(pairs)
        buffers.append(buffer)
    return buffers


def init_training_state(config, spec, expert_pairs):
    """
    Builds the initial state of a run.

    Args:
        config (RunConfig): Validated configuration.
        spec (EnvSpec): Environment.
        expert_pairs (list of ndarray): Raw (s, a) rows, one array per expert trajectory.

    Returns:
        TrainingState
    """
    rngs = spawn_rngs(config.seed)
    all_pairs = np.concatenate(expert_pairs)
    sched = build_schedule(config.T, config.beta_start, config.beta_end)
    disc = init_discriminator(all_pairs, sched, config.eps_hidden, config.embed_dim, config.eps_activation,
                              rngs["init"], config.clamp_delta, config.noise_draws)
    policy = init_policy(spec.state_dim, spec.action_dim, config.sac_hidden, config.sac_activation, rngs["init"],
                         config.gamma, config.target_update_rate, config.init_alpha, spec.action_high)
    zeta = config.zeta if config.use_pedr else 0.0
    coordinator = ReplayCoordinator(
        _expert_buffers(config, spec, expert_pairs),
        PriorityBuffer(config.pseudo_capacity, spec.state_dim, spec.action_dim, zeta),
        config.pseudo_ratio,
        AnnealSchedule(config.eta_start, config.total_steps),
        update_priorities=config.use_pedr,
    )
    return TrainingState(
        config=config,
        spec=spec,
        expert_pairs=list(expert_pairs),
        disc=disc,
        disc_opt=adam_init(disc.eps_net, config.disc_lr),
        policy=policy,
        policy_opt=init_optimizers(policy, config.actor_lr, config.critic_lr, config.alpha_lr),
        coordinator=coordinator,
        agent_buffer=AgentReplayBuffer(config.agent_capacity, spec.state_dim, spec.action_dim),
        rngs=rngs,
        env_state=sample_initial_state(spec, rngs["env"]),
    )


def collect_step(state, n):
    """Takes one environment step with the behaviour policy (uniform during warmup)."""
    spec = state.spec
    if n < state.config.warmup_steps:
        action = state.rngs["policy"].uniform(spec.action_low, spec.action_high, size=spec.action_dim)
    else:
        action = act(state.policy, state.env_state, "stochastic", state.rngs["policy"])
    next_state, true_reward, done = step(spec, state.env_state, action, state.episode_t)
    # Time-limit ends are truncations, so the transition is never terminal.
    state.agent_buffer.push(state.env_state, action, next_state, true_reward, terminal=False)
    if done:
        state.env_state = sample_initial_state(spec, state.rngs["env"])
        state.episode_t = 0
    else:
        state.env_state = next_state
        state.episode_t += 1


def discriminator_step(state, n):
    """Samples a composite batch, trains the discriminator once and refreshes priorities."""
    config = state.config
    composite = state.coordinator.sample(config.k_expert, n, state.rngs["replay"])
    agent = state.agent_buffer.sample(config.disc_agent_batch, state.rngs["replay"])
    normalize = state.disc.normalizer.normalize
    batch = LabeledBatch(
        expert=normalize(composite.expert_entries),
        pseudo=normalize(composite.pseudo_draw.entries),
        agent=normalize(np.concatenate([agent.states, agent.actions], axis=1)),
        expert_weights=composite.expert_weights,
        pseudo_weights=composite.pseudo_draw.weights,
    )
    update = train_step(state.disc, batch, state.disc_opt, state.rngs["noise"])
    state.disc, state.disc_opt = update.model, update.optimizer
    state.coordinator.update_from_confidences(composite, update.confidences["expert"], update.confidences["pseudo"])
    state.disc_loss = update.loss
    state.last_expert_batch = composite.expert_entries


def generation_event(state, n):
    """
    Generates candidates by reverse diffusion and keeps those above tau.

    Returns:
        dict: generation.csv row.
    """
    config = state.config
    noise = state.rngs["noise"]
    if config.tau_full_dataset or state.last_expert_batch is None:
        reference = state.all_expert_pairs
    else:
        reference = state.last_expert_batch
    tau = dynamic_threshold(state.disc, reference, noise)
    candidates = generate_pseudo(state.disc, config.gen_count, state.rngs["generation"])
    accepted = filter_pseudo(state.disc, candidates, tau, noise)
    pseudo_buffer = state.coordinator.pseudo_buffer
    pseudo_buffer.push_many(accepted)
    state.tau = tau
    state.acceptance_rate = accepted.shape[0] / candidates.shape[0]
    return {
        "step": n + 1,
        "tau": tau,
        "generated": int(candidates.shape[0]),
        "accepted": int(accepted.shape[0]),
        "acceptance_rate": state.acceptance_rate,
        "pseudo_buffer_size": len(pseudo_buffer),
    }


def policy_step(state):
    """One SAC update on agent transitions relabelled with the current surrogate reward."""
    sample = state.agent_buffer.sample(state.config.sac_batch, state.rngs["replay"])
    rewards = surrogate_reward_batch(state.disc, sample.states, sample.actions, state.rngs["noise"])
    batch = SacBatch(sample.states, sample.actions, rewards, sample.next_states, sample.terminals)
    state.policy, state.policy_opt, report = sac_update(state.policy, batch, state.policy_opt, state.rngs["policy"])
    return report


def subsample_rows(rows, k, rng):
    if rows.shape[0] <= k:
        return rows
    return rows[np.sort(rng.choice(rows.shape[0], size=k, replace=False))]


def fd_or_none(policy, expert, comparison):
    feature_dim = policy.q1.layer_sizes[-2]
    if expert.shape[0] < feature_dim + 1 or comparison.shape[0] < feature_dim + 1:
        return None
    try:
        return evaluate_fd_to_expert(policy, expert, comparison)
    except UndefinedStatisticError:
        return None


def random_policy_pairs(spec, count, rng):
    """(s, a) rows from uniform-random rollouts, `count` rows in episode order."""
    controller = random_controller(spec, rng)
    episodes = math.ceil(count / spec.horizon)
    trajs = [rollout(spec, controller, sample_initial_state(spec, rng)) for _ in range(episodes)]
    return np.concatenate([t.pairs() for t in trajs])[:count]


def evaluate(state):
    """
    Deterministic-policy episodes with true and surrogate returns, PCC and FD.

    決定的方策で評価し、真の収益・代理収益・PCC・FD を求める。
    """
    config, spec = state.config, state.spec
    rng = state.rngs["eval"]
    noise = state.rngs["noise"]
    policy = state.policy
    true_returns, surrogate_returns = [], []
    for _ in range(config.eval_episodes):
        traj = rollout(spec, lambda s: act(policy, s, "deterministic"), sample_initial_state(spec, rng))
        rewards = surrogate_reward_batch(state.disc, traj.states, traj.actions, noise)
        surrogate = 0.0
        for r in rewards:
            surrogate += float(r)
        true_returns.append(traj.episode_return)
        surrogate_returns.append(surrogate)

    pcc = None
    if len(true_returns) >= 2:
        try:
            pcc = compute_pcc(surrogate_returns, true_returns)
        except UndefinedStatisticError:
            pass

    expert = subsample_rows(state.all_expert_pairs, config.fd_sample, rng)
    pseudo_buffer = state.coordinator.pseudo_buffer
    pseudo = subsample_rows(pseudo_buffer.entries[:len(pseudo_buffer)], config.fd_sample, rng)
    random_pairs = random_policy_pairs(spec, config.fd_sample, rng)
    state.evaluations += 1
    return EvaluationResult(
        state.step,
        true_returns,
        surrogate_returns,
        pcc,
        fd_or_none(policy, expert, pseudo),
        fd_or_none(policy, expert, random_pairs),
    )


def save_training_state(run_dir, state):
    """
    Writes a complete snapshot under run_dir/checkpoints; state.json is written last.
    """
    ck = Path(run_dir) / "checkpoints"
    ck.mkdir(parents=True, exist_ok=True)
    save_discriminator(ck / "discriminator.npz", state.disc, state.disc_opt)
    save_policy(ck / "policy.npz", state.policy, state.policy_opt)
    coordinator = state.coordinator
    for j, buffer in enumerate(coordinator.expert_buffers):
        write_buffer_snapshot(ck / f"expert_buffer_{j:03d}.csv", buffer)
    write_buffer_snapshot(ck / "pseudo_buffer.csv", coordinator.pseudo_buffer)
    save_agent_buffer(ck / "agent_buffer.npz", state.agent_buffer)
    write_json_atomic(
        ck / "state.json",
        {
            "schema_version": 1,
            "record_type": "training_state",
            "step": state.step,
            "episode_t": state.episode_t,
            "env_state": state.env_state.tolist(),
            "tau": state.tau,
            "acceptance_rate": state.acceptance_rate,
            "disc_loss": state.disc_loss,
            "last_expert_batch": None if state.last_expert_batch is None else state.last_expert_batch.tolist(),
            "evaluations": state.evaluations,
            "rotation": coordinator.rotation,
            "num_expert_buffers": len(coordinator.expert_buffers),
            "rngs": {name: rng_state(rng) for name, rng in state.rngs.items()},
        },
    )


def load_training_state(run_dir, config, spec, expert_pairs):
    """
    Rebuilds a TrainingState from save_training_state() output.

    Raises:
        FileNotFoundError: If the snapshot is missing.
    """
    ck = Path(run_dir) / "checkpoints"
    if not (ck / "state.json").is_file():
        raise FileNotFoundError(f"No training snapshot in {ck}\nStart the run without --resume first.")
    info = load_json(ck / "state.json")
    disc, disc_opt = load_discriminator(ck / "discriminator.npz")
    policy, policy_opt = load_policy(ck / "policy.npz")
    buffers = [read_buffer_snapshot(ck / f"expert_buffer_{j:03d}.csv") for j in range(info["num_expert_buffers"])]
    coordinator = ReplayCoordinator(
        buffers,
        read_buffer_snapshot(ck / "pseudo_buffer.csv"),
        config.pseudo_ratio,
        AnnealSchedule(config.eta_start, config.total_steps),
        update_priorities=config.use_pedr,
    )
    coordinator.rotation = int(info["rotation"])
    batch = info["last_expert_batch"]
    return TrainingState(
        config=config,
        spec=spec,
        expert_pairs=list(expert_pairs),
        disc=disc,
        disc_opt=disc_opt,
        policy=policy,
        policy_opt=policy_opt,
        coordinator=coordinator,
        agent_buffer=load_agent_buffer(ck / "agent_buffer.npz"),
        rngs={name: restore_rng(s) for name, s in info["rngs"].items()},
        env_state=np.array(info["env_state"], dtype=np.float64),
        step=int(info["step"]),
        episode_t=int(info["episode_t"]),
        tau=info["tau"],
        acceptance_rate=info["acceptance_rate"],
        disc_loss=info["disc_loss"],
        last_expert_batch=None if batch is None else np.array(batch, dtype=np.float64),
        evaluations=int(info["evaluations"]),
    )


def _record_evaluation(state, result, metrics_log, episodes_log):
    for i, (true_ret, surr_ret) in enumerate(zip(result.true_returns, result.surrogate_returns)):
        episodes_log.append({"step": result.step, "episode": i, "true_return": true_ret, "surrogate_return": surr_ret})
    metrics_log.append({
        "step": result.step,
        "mean_true_return": result.mean_true_return,
        "mean_surrogate_return": result.mean_surrogate_return,
        "tau": state.tau,
        "pseudo_buffer_size": len(state.coordinator.pseudo_buffer),
        "acceptance_rate": state.acceptance_rate,
        "disc_loss": state.disc_loss,
        "pcc": result.pcc,
        "fd_pseudo": result.fd_pseudo,
        "fd_random": result.fd_random,
    })


def run_training(config, spec, expert_pairs, run_dir, resume=False):
    """
    Runs (or resumes) the full training loop.

    学習ループ全体を実行（または再開）する。

    Args:
        config (RunConfig): Validated configuration.
        spec (EnvSpec): Environment.
        expert_pairs (list of ndarray): Expert (s, a) rows per trajectory.
        run_dir (Path): Existing run directory.
        resume (bool): Continue from run_dir/checkpoints.

    Returns:
        tuple: (TrainingState, list of metrics rows).

    Raises:
        TrainingAbort: If any phase fails; carries the step and phase.
    """
    run_dir = Path(run_dir)
    metrics_log, episodes_log, generation_log = run_logs(run_dir)
    if resume:
        state = load_training_state(run_dir, config, spec, expert_pairs)
        for log in (metrics_log, episodes_log, generation_log):
            log.truncate_after(state.step)
        print(f"[train] Resuming at step {state.step}", flush=True)
    else:
        state = init_training_state(config, spec, expert_pairs)
        for log in (metrics_log, episodes_log, generation_log):
            log.create()
        save_training_state(run_dir, state)

    steps = range(state.step, config.total_steps)
    progress = tqdm(steps, initial=state.step, total=config.total_steps, desc="[train]", disable=not config.progress)
    for n in progress:
        phase = "collect"
        try:
            collect_step(state, n)
            if n >= config.warmup_steps:
                since = n - config.warmup_steps
                if since % config.disc_every == 0:
                    phase = "discriminator"
                    discriminator_step(state, n)
                if config.use_pseudo and (n + 1) % config.gen_every == 0 and state.disc_loss is not None:
                    phase = "generation"
                    generation_log.append(generation_event(state, n))
                if since % config.policy_every == 0:
                    phase = "policy"
                    policy_step(state)
            state.step = n + 1
            if state.step % config.eval_every == 0:
                phase = "evaluation"
                result = evaluate(state)
                _record_evaluation(state, result, metrics_log, episodes_log)
                phase = "checkpoint"
                save_training_state(run_dir, state)
                fd_text = "n/a" if result.fd_pseudo is None else f"{result.fd_pseudo:.4g}"
                tau_text = "n/a" if state.tau is None else f"{state.tau:.4f}"
                progress.write(
                    f"[train] step {state.step}: return {result.mean_true_return:.3f} "
                    f"(surrogate {result.mean_surrogate_return:.3f}), tau {tau_text}, "
                    f"pseudo {len(state.coordinator.pseudo_buffer)}, FD(pseudo) {fd_text}"
                )
        except TrainingAbort:
            raise
        except Exception as e:
            raise TrainingAbort(n, phase, f"{type(e).__name__}: {e}") from e
    progress.close()

    if state.step % config.eval_every != 0 and state.step > 0:
        save_training_state(run_dir, state)
    return state, metrics_log.read()
