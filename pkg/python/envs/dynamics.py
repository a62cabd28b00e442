"""
Point-mass dynamics.

質点ダイナミクス。状態は (位置..., 速度...)、行動は力（位置と同次元）。
Explicit Euler with x' = x + v dt and v' = v + a dt; the reward is computed on
the pre-step state and the clipped action.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import ConfigError, NonFiniteError, ShapeError


@dataclass(frozen=True)
class EnvSpec:
    """
    Attributes:
        name (str): Environment identifier.
        action_dim (int): Number of controlled axes (state holds position and velocity per axis).
        action_low, action_high (float): Per-component action bounds.
        dt (float): Integration step.
        horizon (int): Episode length.
        init_position (float): Initial positions ~ U[-init_position, init_position].
        init_velocity (float): Initial velocities ~ U[-init_velocity, init_velocity].
        kp, kd (float): Scripted expert gains.
    """

    name: str
    action_dim: int
    action_low: float
    action_high: float
    dt: float
    horizon: int
    init_position: float
    init_velocity: float
    kp: float = 1.2
    kd: float = 1.8

    def __post_init__(self):
        if self.action_dim < 1 or self.horizon < 1 or self.dt <= 0 or self.action_low >= self.action_high:
            raise ConfigError(f"invalid environment spec '{self.name}'")

    @property
    def state_dim(self):
        return 2 * self.action_dim

    @property
    def pair_dim(self):
        return self.state_dim + self.action_dim


ENV_SPECS = {
    "pointmass2d": EnvSpec("pointmass2d", 2, -1.0, 1.0, 0.05, 200, 0.4, 0.1),
    "doubleintegrator1d": EnvSpec("doubleintegrator1d", 1, -1.0, 1.0, 0.05, 100, 1.0, 0.2),
}


def get_spec(name):
    """
    Looks up an environment by name.

    Raises:
        ConfigError: If the name is unknown.
    """
    try:
        return ENV_SPECS[name]
    except KeyError:
        raise ConfigError(f"unknown environment '{name}' (available: {', '.join(sorted(ENV_SPECS))})") from None


def sample_initial_state(spec, rng):
    """Draws an initial state from the spec's box."""
    pos = rng.uniform(-spec.init_position, spec.init_position, size=spec.action_dim)
    vel = rng.uniform(-spec.init_velocity, spec.init_velocity, size=spec.action_dim)
    return np.concatenate([pos, vel])


def step(spec, state, action, t=0):
    """
    Advances the environment by one step.

    1 ステップ進める。行動は範囲内にクリップされる。

    Args:
        spec (EnvSpec): Environment.
        state (ndarray): (2 * action_dim,) current state.
        action (ndarray): (action_dim,) action, clipped to the bounds.
        t (int): Index of this step within the episode.

    Returns:
        tuple: (next_state, true_reward, done) with done = t + 1 >= horizon.

    Raises:
        ShapeError: On wrong state or action length.
        NonFiniteError: If the state or action is not finite.
    """
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64).reshape(-1)
    if state.shape != (spec.state_dim,) or action.shape != (spec.action_dim,):
        raise ShapeError(f"{spec.name}: expected state ({spec.state_dim},) and action ({spec.action_dim},)")
    if not np.all(np.isfinite(state)) or not np.all(np.isfinite(action)):
        raise NonFiniteError(f"{spec.name}: non-finite state or action at step {t}")
    action = np.clip(action, spec.action_low, spec.action_high)
    pos = state[:spec.action_dim]
    vel = state[spec.action_dim:]
    reward = -(pos @ pos + 0.1 * (vel @ vel) + 0.01 * (action @ action))
    next_state = np.concatenate([pos + vel * spec.dt, vel + action * spec.dt])
    return next_state, float(reward), t + 1 >= spec.horizon
