"""
Rollouts, trajectory files and demonstration sets.

ロールアウト、軌跡ファイル、デモ集合の入出力。

Trajectory file: one header line
    #diffimit-trajectory,version=1,env=...,state_dim=..,action_dim=..,horizon=..,count=..,seed=..,episode=..,controller=..,return=..
followed by `count` rows: state..., action..., next_state..., reward, done.

Demo set directory: traj_000.csv ... plus manifest.json and expert.json.
"""

import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ail_errors import NonFiniteError, ShapeError
from envs.dynamics import get_spec, sample_initial_state, step
from record_io import format_header, format_real, format_row, load_json, parse_header, write_json_atomic, write_text_atomic

TRAJECTORY_TAG = "diffimit-trajectory"
SCRIPTED_CONTROLLER = "scripted_pd"


@dataclass
class Trajectory:
    """
    One episode.

    Attributes:
        states, actions, next_states (ndarray): (H, .) arrays.
        rewards (ndarray): (H,) true rewards.
        dones (ndarray): (H,) bool.
        metadata (dict): env, seed, episode, controller.
    """

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.states.shape[0])

    @property
    def episode_return(self):
        total = 0.0
        for r in self.rewards:
            total += float(r)
        return total

    def pairs(self):
        return np.concatenate([self.states, self.actions], axis=1)


def mean_return(returns):
    """Sequential mean of episode returns (shared by gen-demos and eval)."""
    total = 0.0
    for r in returns:
        total += float(r)
    return total / len(returns)


def rollout(spec, controller, initial_state, metadata=None):
    """
    Runs one full-horizon episode.

    Args:
        spec (EnvSpec): Environment.
        controller (callable): state -> action.
        initial_state (ndarray): Starting state.
        metadata (dict or None): Stored on the trajectory.

    Returns:
        Trajectory: horizon transitions.

    Raises:
        NonFiniteError: If the controller emits a non-finite action.
    """
    H = spec.horizon
    states = np.zeros((H, spec.state_dim))
    actions = np.zeros((H, spec.action_dim))
    next_states = np.zeros((H, spec.state_dim))
    rewards = np.zeros(H)
    dones = np.zeros(H, dtype=bool)
    state = np.asarray(initial_state, dtype=np.float64)
    for t in range(H):
        action = np.asarray(controller(state), dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(action)):
            raise NonFiniteError(f"{spec.name}: controller emitted a non-finite action at step {t}")
        action = np.clip(action, spec.action_low, spec.action_high)
        next_state, reward, done = step(spec, state, action, t)
        states[t], actions[t], next_states[t] = state, action, next_state
        rewards[t], dones[t] = reward, done
        state = next_state
    return Trajectory(states, actions, next_states, rewards, dones, dict(metadata or {}))


def collect_trajectories(spec, controller, n, seed, controller_id=SCRIPTED_CONTROLLER):
    """
    Collects n full-horizon episodes from seeded initial states.

    シード付き初期状態から n エピソードを収集する。

    Args:
        spec (EnvSpec): Environment.
        controller (callable): state -> action.
        n (int): Episode count, n >= 1.
        seed (int): Seed for the initial states.
        controller_id (str): Recorded in the metadata.

    Returns:
        list of Trajectory
    """
    if n < 1:
        raise ShapeError(f"need at least one trajectory, got n={n}")
    rng = np.random.default_rng(seed)
    trajectories = []
    for episode in range(n):
        initial = sample_initial_state(spec, rng)
        meta = {"env": spec.name, "seed": int(seed), "episode": episode, "controller": controller_id}
        trajectories.append(rollout(spec, controller, initial, meta))
    return trajectories


def trajectory_text(traj):
    states_dim = traj.states.shape[1]
    meta = traj.metadata
    spec = get_spec(meta["env"])
    header = format_header(
        TRAJECTORY_TAG,
        {
            "version": 1,
            "env": meta["env"],
            "state_dim": states_dim,
            "action_dim": traj.actions.shape[1],
            "horizon": spec.horizon,
            "count": len(traj),
            "seed": meta.get("seed", ""),
            "episode": meta.get("episode", ""),
            "controller": meta.get("controller", ""),
            "return": format_real(traj.episode_return),
        },
    )
    lines = [header]
    for t in range(len(traj)):
        row = format_row([*traj.states[t], *traj.actions[t], *traj.next_states[t], traj.rewards[t]])
        lines.append(f"{row},{int(traj.dones[t])}")
    return "\n".join(lines) + "\n"


def write_trajectory(path, traj):
    write_text_atomic(path, trajectory_text(traj))


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Trajectory file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        fields = parse_header(f.readline(), TRAJECTORY_TAG)
        rows = [line.strip().split(",") for line in f if line.strip()]
    if len(rows) != int(fields["count"]):
        raise ShapeError(f"{path}: header count {fields['count']} but {len(rows)} rows")
    return fields, rows


def read_trajectory(path):
    """
    Reads a trajectory file written by write_trajectory().

    Raises:
        FileNotFoundError: If the file does not exist.
        ShapeError: If the rows do not match the header.
    """
    fields, rows = _read_rows(path)
    ds, da = int(fields["state_dim"]), int(fields["action_dim"])
    width = 2 * ds + da + 2
    if any(len(r) != width for r in rows):
        raise ShapeError(f"{path}: every row must have {width} columns")
    data = np.array([[float(v) for v in r[:-1]] for r in rows]).reshape(len(rows), width - 1)
    meta = {
        "env": fields["env"],
        "seed": int(fields["seed"]) if fields.get("seed") else None,
        "episode": int(fields["episode"]) if fields.get("episode") else None,
        "controller": fields.get("controller", ""),
        "return": float(fields["return"]),
    }
    return Trajectory(
        data[:, :ds],
        data[:, ds:ds + da],
        data[:, ds + da:2 * ds + da],
        data[:, -1],
        np.array([r[-1] == "1" for r in rows]),
        meta,
    )


def load_expert_pairs(path):
    """
    Reads only the state and action columns of a trajectory file.

    報酬列は読まない（学習経路は真の報酬を参照しない）。

    Returns:
        ndarray: (count, state_dim + action_dim) pairs.
    """
    fields, rows = _read_rows(path)
    width = int(fields["state_dim"]) + int(fields["action_dim"])
    return np.array([[float(v) for v in r[:width]] for r in rows]).reshape(len(rows), width)


def write_demo_set(out_dir, spec, trajectories, seed):
    """
    Writes a demo set directory (trajectory files, manifest.json, expert.json).

    The set is assembled in a sibling temporary directory and moved into place,
    so an interrupted write leaves no partial set behind.

    Returns:
        dict: The manifest.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = out_dir.with_name(out_dir.name + ".partial")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()

    files, returns = [], []
    for i, traj in enumerate(trajectories):
        name = f"traj_{i:03d}.csv"
        write_trajectory(staging / name, traj)
        files.append(name)
        returns.append(traj.episode_return)

    manifest = {
        "schema_version": 1,
        "record_type": "demo_set",
        "env": spec.name,
        "seed": int(seed),
        "controller": SCRIPTED_CONTROLLER,
        "num_trajectories": len(trajectories),
        "horizon": spec.horizon,
        "files": files,
        "returns": returns,
        "mean_return": mean_return(returns),
    }
    expert = {
        "schema_version": 1,
        "record_type": "scripted_expert",
        "env": spec.name,
        "controller": SCRIPTED_CONTROLLER,
        "kp": spec.kp,
        "kd": spec.kd,
        "seed": int(seed),
        "episodes": len(trajectories),
    }
    write_json_atomic(staging / "manifest.json", manifest)
    write_json_atomic(staging / "expert.json", expert)

    if out_dir.exists():
        shutil.rmtree(out_dir)
    staging.rename(out_dir)
    return manifest


def load_demo_set(demos_dir, n=None):
    """
    Loads the expert pairs of a demo set, one array per trajectory.

    Args:
        demos_dir (Path): Demo set directory.
        n (int or None): Use only the first n trajectories.

    Returns:
        tuple: (EnvSpec, list of (H, d) pair arrays, manifest dict).
    """
    demos_dir = Path(demos_dir)
    manifest = load_json(demos_dir / "manifest.json")
    spec = get_spec(manifest["env"])
    files = manifest["files"]
    if n is not None:
        if not 1 <= n <= len(files):
            raise ShapeError(f"demo set holds {len(files)} trajectories, requested {n}")
        files = files[:n]
    pairs = [load_expert_pairs(demos_dir / name) for name in files]
    for p in pairs:
        if p.shape[1] != spec.pair_dim:
            raise ShapeError(f"{demos_dir}: pair width {p.shape[1]} does not match {spec.name}")
    return spec, pairs, manifest
