"""
discriminator package

Diffusion-based discriminator: per-pair confidence, surrogate reward, the
dynamic acceptance threshold, pseudo-expert generation and filtering, and the
importance-weighted adversarial training step.
拡散モデル判別器（信頼度、代理報酬、動的閾値、疑似エキスパート生成と選別、学習ステップ）。
"""

from discriminator.checkpoint import load_discriminator, save_discriminator
from discriminator.model import (
    DiscriminatorModel,
    confidence,
    confidence_batch,
    confidence_from_losses,
    dynamic_threshold,
    filter_pseudo,
    generate_pseudo,
    init_discriminator,
    reward_from_confidence,
    surrogate_reward,
    surrogate_reward_batch,
)
from discriminator.training import DiscriminatorUpdate, LabeledBatch, batch_loss, group_bce, train_step

__version__ = "0.1.0"
