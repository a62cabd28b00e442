"""
Scripted controllers.
"""

import numpy as np


def scripted_expert(spec, state):
    """
    PD law a = clip(-kp * pos - kd * vel, bounds).

    PD 制御則によるスクリプトエキスパート。
    """
    state = np.asarray(state, dtype=np.float64)
    pos = state[:spec.action_dim]
    vel = state[spec.action_dim:]
    return np.clip(-spec.kp * pos - spec.kd * vel, spec.action_low, spec.action_high)


def random_controller(spec, rng):
    """Returns a controller drawing uniform actions within the bounds."""

    def controller(state):
        return rng.uniform(spec.action_low, spec.action_high, size=spec.action_dim)

    return controller
