"""
Discriminator checkpoints: noise predictor, schedule, normalizer and clamp.
"""

import numpy as np

from diffusion import NoisePredictor, Normalizer, build_schedule
from discriminator.model import DiscriminatorModel
from nn_core.checkpoint import adam_from_arrays, adam_to_arrays, load_arrays, net_from_arrays, net_to_arrays, save_arrays

KIND = "discriminator"


def save_discriminator(path, model, optimizer=None):
    """
    Writes the discriminator (and optionally its Adam state) to an .npz file.

    判別器（任意で Adam 状態も）を .npz に保存する。
    """
    arrays = net_to_arrays(model.eps_net.net, "eps_net/")
    arrays["eps_net/embedding"] = model.eps_net.embedding
    arrays["schedule"] = np.array([model.sched.T, model.sched.beta_start, model.sched.beta_end], dtype=np.float64)
    arrays["normalizer/mean"] = model.normalizer.mean
    arrays["normalizer/std"] = model.normalizer.std
    arrays["clamp_delta"] = np.array(model.clamp_delta)
    arrays["noise_draws"] = np.array(model.noise_draws, dtype=np.int64)
    if optimizer is not None:
        arrays.update(adam_to_arrays(optimizer, "adam/"))
    save_arrays(path, arrays, KIND)


def load_discriminator(path):
    """
    Reads a discriminator checkpoint.

    Returns:
        tuple: (DiscriminatorModel, AdamState or None).
    """
    arrays = load_arrays(path, KIND)
    eps_net = NoisePredictor(net_from_arrays(arrays, "eps_net/"), np.array(arrays["eps_net/embedding"], dtype=np.float64))
    T, beta_start, beta_end = (float(x) for x in arrays["schedule"])
    model = DiscriminatorModel(
        eps_net,
        build_schedule(int(T), beta_start, beta_end),
        Normalizer(np.array(arrays["normalizer/mean"]), np.array(arrays["normalizer/std"])),
        float(arrays["clamp_delta"]),
        int(arrays["noise_draws"]),
    )
    optimizer = adam_from_arrays(arrays, eps_net, "adam/") if "adam/m" in arrays else None
    return model, optimizer
