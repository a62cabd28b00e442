"""
Priority buffer with FIFO eviction and proportional sampling.

FIFO 退避と比例サンプリングを持つ優先度バッファ。
The sum tree stores p_i ** zeta. Each slot also carries the serial number of
the push that filled it, so updates aimed at an evicted entry can be detected.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ail_errors import EmptyBufferError, ShapeError
from pedr.sumtree import SumTree
from record_io import format_header, format_real, format_row, parse_header, write_text_atomic

SNAPSHOT_TAG = "diffimit-priority-buffer"


@dataclass(frozen=True)
class SampleBatch:
    """
    Attributes:
        indices (ndarray): Slot indices.
        serials (ndarray): Push serial numbers of the sampled entries.
        entries (ndarray): (k, dim) sampled pairs.
        weights (ndarray): Importance weights normalized to max 1.
        probabilities (ndarray): Sampling probabilities P(i).
    """

    indices: np.ndarray
    serials: np.ndarray
    entries: np.ndarray
    weights: np.ndarray
    probabilities: np.ndarray

    def __len__(self):
        return int(self.indices.shape[0])


def _empty_sample(dim):
    return SampleBatch(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros((0, dim)), np.zeros(0), np.zeros(0))


class PriorityBuffer:
    """
    Fixed-capacity store of (s, a) pairs with priorities.

    Args:
        capacity (int): Maximum number of entries.
        state_dim (int): State length.
        action_dim (int): Action length.
        zeta (float): Prioritization exponent, zeta >= 0 (0 means uniform).
    """

    def __init__(self, capacity, state_dim, action_dim, zeta=0.6):
        if capacity < 1:
            raise ShapeError(f"capacity must be positive, got {capacity}")
        if zeta < 0:
            raise ShapeError(f"zeta must be non-negative, got {zeta}")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.zeta = float(zeta)
        self.entries = np.zeros((self.capacity, self.dim))
        self.priorities = np.zeros(self.capacity)
        self.serials = np.full(self.capacity, -1, dtype=np.int64)
        self.tree = SumTree(self.capacity)
        self.size = 0
        self.next_slot = 0
        self.pushed = 0
        self.stale_updates = 0

    @property
    def dim(self):
        return self.state_dim + self.action_dim

    def __len__(self):
        return self.size

    def max_priority(self):
        """Current maximum priority over live entries (1 when empty)."""
        if self.size == 0:
            return 1.0
        return float(self.priorities[:self.size].max())

    def _set_priority(self, slot, priority):
        self.priorities[slot] = priority
        self.tree.update(slot, priority ** self.zeta)

    def push(self, entry, priority=None):
        """
        Stores one pair, evicting the oldest entry when full.

        Args:
            entry (ndarray): (dim,) concatenated (s, a).
            priority (float or None): Priority; defaults to max_priority().

        Returns:
            int: Slot index that now holds the entry.
        """
        entry = np.asarray(entry, dtype=np.float64)
        if entry.shape != (self.dim,):
            raise ShapeError(f"entry must have shape ({self.dim},), got {entry.shape}")
        if priority is None:
            priority = self.max_priority()
        if priority < 0 or not np.isfinite(priority):
            raise ShapeError(f"priority must be finite and non-negative, got {priority}")
        slot = self.next_slot
        self.entries[slot] = entry
        self.serials[slot] = self.pushed
        self._set_priority(slot, float(priority))
        self.pushed += 1
        self.next_slot = (slot + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return slot

    def push_many(self, entries):
        """Pushes rows with max-priority insertion; returns their slot indices."""
        entries = np.asarray(entries, dtype=np.float64).reshape(-1, self.dim)
        return [self.push(row) for row in entries]

    def probabilities(self):
        """P(i) for the live slots 0..size-1."""
        if self.size == 0:
            return np.zeros(0)
        return self.tree.leaves()[:self.size] / self.tree.total

    def sample(self, k, eta, rng):
        """
        Samples k entries with replacement, P(i) proportional to p_i ** zeta.

        比例サンプリングと重要度重み w_i = (1 / (N P(i))) ** eta（バッチ最大値で正規化）。

        Args:
            k (int): Number of draws (0 returns an empty batch).
            eta (float): Importance-weight exponent.
            rng (numpy.random.Generator): Sampling randomness.

        Returns:
            SampleBatch: Draws with normalized weights.

        Raises:
            EmptyBufferError: If the buffer is empty and k > 0.
        """
        if k < 0:
            raise ShapeError(f"sample size must be non-negative, got {k}")
        if k == 0:
            return _empty_sample(self.dim)
        if self.size == 0:
            raise EmptyBufferError("cannot sample from an empty priority buffer")
        total = self.tree.total
        masses = rng.random(k) * total
        masses = np.minimum(masses, np.nextafter(total, 0.0))
        indices = self.tree.prefix_find_many(masses)
        probs = self.tree.leaves()[indices] / total
        raw = (1.0 / (self.size * probs)) ** eta
        weights = raw / raw.max()
        return SampleBatch(indices, self.serials[indices].copy(), self.entries[indices].copy(), weights, probs)

    def update_priorities(self, indices, confidences, serials=None):
        """
        Sets p_i = |1 - D_i| for the given slots.

        Args:
            indices (sequence of int): Slot indices from sample().
            confidences (sequence of float): Discriminator confidences in [0, 1].
            serials (sequence of int or None): Serials from sample(); entries
                overwritten since then are skipped and counted in stale_updates.

        Returns:
            int: Number of skipped (stale) updates.
        """
        indices = np.asarray(indices, dtype=np.int64)
        confidences = np.asarray(confidences, dtype=np.float64)
        if indices.shape != confidences.shape:
            raise ShapeError("one confidence per index is required")
        if np.any(~np.isfinite(confidences)) or np.any((confidences < 0.0) | (confidences > 1.0)):
            raise ShapeError("confidences must lie in [0, 1]")
        live = (indices >= 0) & (indices < self.size)
        if serials is not None:
            serials = np.asarray(serials, dtype=np.int64)
            live &= self.serials[np.clip(indices, 0, self.capacity - 1)] == serials
        slots = indices[live]
        priorities = np.abs(1.0 - confidences[live])
        # Repeated slots: the last update wins, as with sequential writes.
        unique_slots, last = np.unique(slots[::-1], return_index=True)
        last_priorities = priorities[::-1][last]
        self.priorities[unique_slots] = last_priorities
        self.tree.update_many(unique_slots, last_priorities ** self.zeta)
        skipped = int(np.count_nonzero(~live))
        self.stale_updates += skipped
        return skipped


def write_buffer_snapshot(path, buffer):
    """
    Writes the live entries and priorities, in slot order, to a text snapshot.

    バッファのスナップショット（エントリと優先度）を書き出す。
    """
    header = format_header(
        SNAPSHOT_TAG,
        {
            "version": 1,
            "state_dim": buffer.state_dim,
            "action_dim": buffer.action_dim,
            "capacity": buffer.capacity,
            "size": buffer.size,
            "next": buffer.next_slot,
            "pushed": buffer.pushed,
            "stale": buffer.stale_updates,
            "zeta": format_real(buffer.zeta),
        },
    )
    lines = [header]
    for slot in range(buffer.size):
        lines.append(format_row([*buffer.entries[slot], buffer.priorities[slot]]))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_buffer_snapshot(path):
    """
    Rebuilds a PriorityBuffer from write_buffer_snapshot() output.

    Raises:
        FileNotFoundError: If the file does not exist.
        ShapeError: If the rows do not match the header.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Buffer snapshot not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        fields = parse_header(f.readline(), SNAPSHOT_TAG)
        rows = [line for line in f if line.strip()]
    buffer = PriorityBuffer(int(fields["capacity"]), int(fields["state_dim"]), int(fields["action_dim"]), float(fields["zeta"]))
    size = int(fields["size"])
    if len(rows) != size:
        raise ShapeError(f"{path}: header says {size} rows, found {len(rows)}")
    pushed = int(fields["pushed"])
    for slot, line in enumerate(rows):
        values = np.array([float(v) for v in line.split(",")])
        if values.shape != (buffer.dim + 1,):
            raise ShapeError(f"{path}: row {slot} has {values.size} columns, expected {buffer.dim + 1}")
        buffer.entries[slot] = values[:-1]
        buffer.priorities[slot] = values[-1]
        # Live serials cover pushed - size .. pushed - 1 and slot = serial mod capacity.
        serial = pushed - size + ((slot - (pushed - size)) % buffer.capacity)
        buffer.serials[slot] = serial
    buffer.tree.update_many(np.arange(size), buffer.priorities[:size] ** buffer.zeta)
    buffer.size = size
    buffer.next_slot = int(fields["next"])
    buffer.pushed = pushed
    buffer.stale_updates = int(fields["stale"])
    return buffer
