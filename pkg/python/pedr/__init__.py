"""
pedr package

Prioritized expert demonstration replay: sum-tree priority buffers (one per
expert trajectory plus one pseudo-expert buffer), proportional sampling with
annealed importance weights, and the buffer coordinator.
優先度付きエキスパートデモ再生（サムツリー、重要度重み、バッファ協調）。
"""

from pedr.buffer import PriorityBuffer, SampleBatch, read_buffer_snapshot, write_buffer_snapshot
from pedr.coordinator import AnnealSchedule, CompositeSample, ReplayCoordinator, split_counts
from pedr.sumtree import SumTree

__version__ = "0.1.0"
