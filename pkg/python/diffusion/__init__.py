"""
diffusion package

DDPM machinery over concatenated state-action vectors: linear variance
schedule, forward noising, the denoising loss and reverse-process sampling.
状態・行動ベクトル上の DDPM（分散スケジュール、順過程、損失、逆過程サンプリング）。
"""

from diffusion.ddpm import diffusion_loss, diffusion_loss_and_grad, forward_noise, reverse_sample
from diffusion.predictor import Normalizer, NoisePredictor, fit_normalizer, init_noise_predictor
from diffusion.schedule import DiffusionSchedule, build_schedule

__version__ = "0.1.0"

__all__ = [
    "DiffusionSchedule",
    "NoisePredictor",
    "Normalizer",
    "build_schedule",
    "diffusion_loss",
    "diffusion_loss_and_grad",
    "fit_normalizer",
    "forward_noise",
    "init_noise_predictor",
    "reverse_sample",
]
