"""
envs package

Deterministic toy control tasks, scripted PD experts and demonstration files.
決定的な制御タスク、スクリプト化された PD エキスパート、デモファイル入出力。
"""

from envs.dynamics import ENV_SPECS, EnvSpec, get_spec, sample_initial_state, step
from envs.expert import random_controller, scripted_expert
from envs.trajectory import (
    Trajectory,
    collect_trajectories,
    load_demo_set,
    load_expert_pairs,
    read_trajectory,
    rollout,
    write_demo_set,
    write_trajectory,
)

__version__ = "0.1.0"
