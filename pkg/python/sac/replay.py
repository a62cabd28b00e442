"""
Agent transition ring buffer with uniform sampling.

エージェント遷移のリングバッファ（一様サンプリング）。
True rewards are stored for evaluation bookkeeping only; training batches get
surrogate rewards attached after sampling.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import EmptyBufferError, ShapeError
from nn_core.checkpoint import load_arrays, save_arrays

KIND = "agent_buffer"


@dataclass(frozen=True)
class AgentSample:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


class AgentReplayBuffer:
    def __init__(self, capacity, state_dim, action_dim):
        if capacity < 1:
            raise ShapeError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.next_states = np.zeros((self.capacity, state_dim))
        self.true_rewards = np.zeros(self.capacity)
        self.terminals = np.zeros(self.capacity)
        self.size = 0
        self.next_slot = 0

    def __len__(self):
        return self.size

    def push(self, state, action, next_state, true_reward, terminal=False):
        i = self.next_slot
        self.states[i] = state
        self.actions[i] = action
        self.next_states[i] = next_state
        self.true_rewards[i] = true_reward
        self.terminals[i] = float(terminal)
        self.next_slot = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, k, rng):
        """Draws k transitions uniformly with replacement (without true rewards)."""
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty agent buffer")
        idx = rng.integers(0, self.size, size=k)
        return AgentSample(self.states[idx], self.actions[idx], self.next_states[idx], self.terminals[idx])


def save_agent_buffer(path, buffer):
    n = buffer.size
    save_arrays(
        path,
        {
            "states": buffer.states[:n],
            "actions": buffer.actions[:n],
            "next_states": buffer.next_states[:n],
            "true_rewards": buffer.true_rewards[:n],
            "terminals": buffer.terminals[:n],
            "layout": np.array([buffer.capacity, buffer.next_slot], dtype=np.int64),
        },
        KIND,
    )


def load_agent_buffer(path):
    arrays = load_arrays(path, KIND)
    capacity, next_slot = (int(v) for v in arrays["layout"])
    states = arrays["states"]
    buffer = AgentReplayBuffer(capacity, states.shape[1], arrays["actions"].shape[1])
    n = states.shape[0]
    buffer.states[:n] = states
    buffer.actions[:n] = arrays["actions"]
    buffer.next_states[:n] = arrays["next_states"]
    buffer.true_rewards[:n] = arrays["true_rewards"]
    buffer.terminals[:n] = arrays["terminals"]
    buffer.size = n
    buffer.next_slot = next_slot
    return buffer
