"""
Adam optimizer over any model exposing parameters() / with_parameters().

parameters() / with_parameters() を持つモデル用の Adam 最適化。
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import ConfigError, NonFiniteError, ShapeError


@dataclass(frozen=True)
class ParamVector:
    """Bare list of parameter arrays (used for scalars such as a log-temperature)."""

    arrays: tuple

    def parameters(self):
        return list(self.arrays)

    def with_parameters(self, params):
        arrays = tuple(np.array(p, dtype=np.float64) for p in params)
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise NonFiniteError("non-finite value in parameters")
        return ParamVector(arrays)


@dataclass(frozen=True)
class AdamState:
    """
    Adam moment accumulators.

    Attributes:
        m (tuple of ndarray): First moments, one per parameter array.
        v (tuple of ndarray): Second moments, one per parameter array.
        step (int): Number of updates applied so far.
        lr (float): Learning rate.
        beta1, beta2, eps (float): Moment decay rates and denominator epsilon.
    """

    m: tuple
    v: tuple
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(model, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    Returns a fresh AdamState with zero moments shaped like model.parameters().

    Raises:
        ConfigError: If lr is negative or the betas are outside [0, 1).
    """
    if lr < 0 or not (0.0 <= beta1 < 1.0) or not (0.0 <= beta2 < 1.0) or eps <= 0:
        raise ConfigError(f"invalid Adam settings: lr={lr}, betas=({beta1}, {beta2}), eps={eps}")
    zeros = tuple(np.zeros_like(p) for p in model.parameters())
    return AdamState(zeros, tuple(np.zeros_like(z) for z in zeros), 0, float(lr), beta1, beta2, eps)


def adam_step(model, state, grads):
    """
    Applies one bias-corrected Adam update.

    バイアス補正付き Adam 更新を 1 回適用し、新しいモデルと状態を返す。

    Args:
        model: Object with parameters() and with_parameters().
        state (AdamState): Current optimizer state.
        grads (sequence of ndarray): Gradients in parameters() order.

    Returns:
        tuple: (updated model, updated AdamState).

    Raises:
        ShapeError: If a gradient shape differs from its parameter.
        NonFiniteError: If a gradient is NaN/Inf.
    """
    params = model.parameters()
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    if len(grads) != len(params):
        raise ShapeError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient passed to adam_step")

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)

    new_state = AdamState(tuple(new_m), tuple(new_v), step, state.lr, b1, b2, state.eps)
    return model.with_parameters(new_params), new_state
