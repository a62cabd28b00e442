"""
Policy checkpoints: actor, critics, targets, temperature and optional optimizer states.
"""

import numpy as np

from nn_core import ParamVector
from nn_core.checkpoint import adam_from_arrays, adam_to_arrays, load_arrays, net_from_arrays, net_to_arrays, save_arrays
from sac.agent import PolicyBundle, SacOptimizers

KIND = "policy"
_NETS = ("actor", "q1", "q2", "q1_target", "q2_target")


def save_policy(path, bundle, optimizers=None):
    """
    Writes a PolicyBundle (and optionally its Adam states) to an .npz file.

    方策一式を .npz に保存する。
    """
    arrays = {}
    for name in _NETS:
        arrays.update(net_to_arrays(getattr(bundle, name), f"{name}/"))
    arrays["scalars"] = np.array([
        bundle.log_alpha, bundle.gamma, bundle.target_update_rate, bundle.target_entropy, bundle.action_scale,
        float(bundle.learn_temperature),
    ])
    if optimizers is not None:
        for name in ("actor", "q1", "q2", "alpha"):
            arrays.update(adam_to_arrays(getattr(optimizers, name), f"adam_{name}/"))
    save_arrays(path, arrays, KIND)


def load_policy(path):
    """
    Reads a policy checkpoint.

    Returns:
        tuple: (PolicyBundle, SacOptimizers or None).
    """
    arrays = load_arrays(path, KIND)
    nets = {name: net_from_arrays(arrays, f"{name}/") for name in _NETS}
    log_alpha, gamma, rate, target_entropy, action_scale, learn = (float(x) for x in arrays["scalars"])
    bundle = PolicyBundle(**nets, log_alpha=log_alpha, gamma=gamma, target_update_rate=rate,
                          target_entropy=target_entropy, action_scale=action_scale, learn_temperature=bool(learn))
    if "adam_actor/m" not in arrays:
        return bundle, None
    optimizers = SacOptimizers(
        adam_from_arrays(arrays, bundle.actor, "adam_actor/"),
        adam_from_arrays(arrays, bundle.q1, "adam_q1/"),
        adam_from_arrays(arrays, bundle.q2, "adam_q2/"),
        adam_from_arrays(arrays, ParamVector((np.array(log_alpha),)), "adam_alpha/"),
    )
    return bundle, optimizers
