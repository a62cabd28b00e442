"""
N expert buffers plus one pseudo-expert buffer, sampled together.

N 個のエキスパートバッファと 1 個の疑似エキスパートバッファの協調サンプリング。
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import EmptyBufferError, ShapeError


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear ramp of the importance exponent from eta_start to 1 over total_steps."""

    eta_start: float
    total_steps: int

    def __post_init__(self):
        if not (0.0 < self.eta_start <= 1.0):
            raise ShapeError(f"eta_start must lie in (0, 1], got {self.eta_start}")
        if self.total_steps < 0:
            raise ShapeError(f"total_steps must be non-negative, got {self.total_steps}")

    def value(self, step):
        if self.total_steps == 0:
            return 1.0
        fraction = min(max(step, 0) / self.total_steps, 1.0)
        return self.eta_start + (1.0 - self.eta_start) * fraction


def split_counts(k, n_buffers, offset):
    """
    Splits k draws over n buffers as evenly as possible.

    The k mod n leftover draws go to consecutive buffers starting at `offset`.
    """
    base, extra = divmod(k, n_buffers)
    counts = [base] * n_buffers
    for j in range(extra):
        counts[(offset + j) % n_buffers] += 1
    return counts


@dataclass(frozen=True)
class CompositeSample:
    """
    Attributes:
        expert_draws (list of SampleBatch): One draw per expert buffer.
        pseudo_draw (SampleBatch): Pseudo-expert draw (empty when the buffer is empty).
    """

    expert_draws: list
    pseudo_draw: object

    @property
    def expert_entries(self):
        return np.concatenate([d.entries for d in self.expert_draws])

    @property
    def expert_weights(self):
        return np.concatenate([d.weights for d in self.expert_draws])


class ReplayCoordinator:
    """
    Samples composite batches across the expert buffers and the pseudo-expert buffer.

    Args:
        expert_buffers (list of PriorityBuffer): One buffer per expert trajectory.
        pseudo_buffer (PriorityBuffer): Pseudo-expert buffer.
        ratio (int): Pseudo-expert draws per expert draw.
        anneal (AnnealSchedule): Importance-exponent schedule.
        update_priorities (bool): False keeps every priority at its insertion value
            (uniform replay when the buffers use zeta = 0).
    """

    def __init__(self, expert_buffers, pseudo_buffer, ratio, anneal, update_priorities=True):
        if not expert_buffers:
            raise ShapeError("at least one expert buffer is required")
        if ratio < 0:
            raise ShapeError(f"pseudo ratio must be non-negative, got {ratio}")
        self.expert_buffers = list(expert_buffers)
        self.pseudo_buffer = pseudo_buffer
        self.ratio = int(ratio)
        self.anneal = anneal
        self.priority_updates = bool(update_priorities)
        self.rotation = 0

    def sample(self, k_expert, step, rng):
        """
        Draws k_expert expert entries (round-robin split) plus ratio * k_expert pseudo entries.

        エキスパートを均等配分で k_expert 個、疑似エキスパートを ratio 倍サンプリングする。

        Args:
            k_expert (int): Expert draws, at least one per expert buffer.
            step (int): Training step for the eta schedule.
            rng (numpy.random.Generator): Sampling randomness.

        Returns:
            CompositeSample: Per-buffer draws with their own normalized weights.

        Raises:
            EmptyBufferError: If any expert buffer is empty.
        """
        n = len(self.expert_buffers)
        if k_expert < n:
            raise ShapeError(f"k_expert={k_expert} cannot cover {n} expert buffers")
        for j, buffer in enumerate(self.expert_buffers):
            if len(buffer) == 0:
                raise EmptyBufferError(f"expert buffer {j} is empty")
        eta = self.anneal.value(step)
        counts = split_counts(k_expert, n, self.rotation)
        self.rotation = (self.rotation + k_expert % n) % n
        draws = [buffer.sample(c, eta, rng) for buffer, c in zip(self.expert_buffers, counts)]
        k_pseudo = self.ratio * k_expert if len(self.pseudo_buffer) > 0 else 0
        pseudo = self.pseudo_buffer.sample(k_pseudo, eta, rng)
        return CompositeSample(draws, pseudo)

    def update_from_confidences(self, composite, expert_confidence, pseudo_confidence):
        """
        Routes discriminator confidences back to the buffers the samples came from.

        Returns:
            int: Number of stale updates skipped.
        """
        if not self.priority_updates:
            return 0
        skipped = 0
        offset = 0
        for buffer, draw in zip(self.expert_buffers, composite.expert_draws):
            size = len(draw)
            skipped += buffer.update_priorities(draw.indices, expert_confidence[offset:offset + size], draw.serials)
            offset += size
        if len(composite.pseudo_draw) > 0:
            skipped += self.pseudo_buffer.update_priorities(
                composite.pseudo_draw.indices, pseudo_confidence, composite.pseudo_draw.serials
            )
        return skipped
