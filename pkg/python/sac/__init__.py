"""
sac package

Soft actor-critic with a tanh-squashed Gaussian actor, twin critics with
target copies and a learned entropy temperature, driven by the surrogate reward.
代理報酬で学習するソフトアクタークリティック。
"""

from sac.agent import (
    PolicyBundle,
    SacBatch,
    SacOptimizers,
    SacReport,
    act,
    act_with_log_prob,
    critic_features,
    critic_target,
    init_optimizers,
    init_policy,
    sac_update,
    soft_update,
)
from sac.checkpoint import load_policy, save_policy
from sac.replay import AgentReplayBuffer, load_agent_buffer, save_agent_buffer

__version__ = "0.1.0"
