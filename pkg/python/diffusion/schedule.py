"""
Linear variance schedule.

線形分散スケジュール。配列は長さ T+1 で、添字 t がステップ t に対応する
(beta[0] = 0, alpha[0] = alpha_bar[0] = 1, sigma[0] = 0)。
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import ConfigError


@dataclass(frozen=True)
class DiffusionSchedule:
    """
    Per-step schedule arrays, padded so that index t is step t.

    Attributes:
        T (int): Number of denoising steps.
        beta_start, beta_end (float): Endpoints of the linear beta ramp.
        beta, alpha, alpha_bar, sigma (ndarray): Arrays of length T + 1.
    """

    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray


def build_schedule(T, beta_start, beta_end):
    """
    Builds a linear beta schedule and its derived arrays.

    線形 beta スケジュールと派生配列を構築する。

    Args:
        T (int): Number of steps, T >= 1.
        beta_start (float): First beta, 0 < beta_start <= beta_end.
        beta_end (float): Last beta, beta_end < 1.

    Returns:
        DiffusionSchedule: Schedule with alpha = 1 - beta and the running product alpha_bar.

    Raises:
        ConfigError: If T or the beta range is invalid.
    """
    if int(T) != T or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    T = int(T)

    beta = np.zeros(T + 1)
    beta[1:] = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.ones(T + 1)
    for t in range(1, T + 1):
        alpha_bar[t] = alpha_bar[t - 1] * alpha[t]
    sigma = np.sqrt(beta)

    if not np.all(np.diff(alpha_bar) < 0.0) or alpha_bar[T] <= 0.0:
        raise ConfigError("alpha_bar is not strictly decreasing in (0, 1) for this schedule")

    return DiffusionSchedule(T, float(beta_start), float(beta_end), beta, alpha, alpha_bar, sigma)
