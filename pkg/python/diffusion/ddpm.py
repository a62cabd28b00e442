"""
Forward noising, denoising loss and reverse-process sampling.

順過程ノイズ付加、デノイジング損失、逆過程サンプリング。
"""

import numpy as np

from ail_errors import NonFiniteError, ShapeError


def _steps(t, sched):
    steps = np.asarray(t, dtype=np.int64)
    if np.any(steps < 1) or np.any(steps > sched.T):
        raise ShapeError(f"step index must lie in 1..{sched.T}")
    return steps


def forward_noise(x0, t, eps, sched):
    """
    Returns sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.

    Args:
        x0 (ndarray): Clean vector (d,) or batch (n, d).
        t (int or ndarray): Step index in 1..T, scalar or one per row.
        eps (ndarray): Noise with the same shape as x0.
        sched (DiffusionSchedule): Schedule.

    Returns:
        ndarray: Noised sample with the shape of x0.

    Raises:
        ShapeError: On a shape mismatch or a step outside 1..T.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"eps shape {eps.shape} does not match x0 shape {x0.shape}")
    ab = sched.alpha_bar[_steps(t, sched)]
    if x0.ndim == 2:
        ab = np.broadcast_to(ab, (x0.shape[0],))[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def diffusion_loss(eps_net, x0, t, eps, sched):
    """
    Denoising loss ||eps - eps_net(forward_noise(x0, t, eps), t)||^2.

    デノイジング損失。バッチ入力では行ごとの損失配列を返す。

    Args:
        eps_net: Noise model with predict(x, t).
        x0, t, eps, sched: As in forward_noise().

    Returns:
        float or ndarray: Loss per row (a float for a single vector).

    Raises:
        NonFiniteError: If the loss is not finite.
    """
    xt = forward_noise(x0, t, eps, sched)
    residual = np.asarray(eps, dtype=np.float64) - eps_net.predict(xt, t)
    loss = np.sum(residual * residual, axis=-1)
    if not np.all(np.isfinite(loss)):
        raise NonFiniteError("non-finite diffusion loss")
    return float(loss) if np.ndim(loss) == 0 else loss


def diffusion_loss_and_grad(eps_net, x0, t, eps, sched, upstream):
    """
    Per-row losses and the parameter gradient of sum(upstream * loss).

    Args:
        eps_net (NoisePredictor): Predictor with predict_cache() and backward().
        x0 (ndarray): (n, d) clean batch.
        t (int or ndarray): Step per row.
        eps (ndarray): (n, d) noise.
        sched (DiffusionSchedule): Schedule.
        upstream (ndarray): (n,) weight of each row's loss.

    Returns:
        tuple: (losses (n,), gradients in eps_net.parameters() order).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    xt = forward_noise(x0, t, eps, sched)
    pred, cache = eps_net.predict_cache(xt, t)
    residual = eps - pred
    loss = np.sum(residual * residual, axis=1)
    if not np.all(np.isfinite(loss)):
        raise NonFiniteError("non-finite diffusion loss")
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    grads = eps_net.backward(cache, -2.0 * residual * upstream[:, None])
    return loss, grads


def reverse_sample(eps_net, sched, noise_source, n):
    """
    Draws n samples by running the reverse chain from x^T ~ N(0, I) down to x^0.

    逆過程で n 個のサンプルを生成する。最終ステップ (t = 1) はノイズを加えない。

    Args:
        eps_net: Noise model with predict(x, t) and data_dim.
        sched (DiffusionSchedule): Schedule.
        noise_source (numpy.random.Generator): Source of the chain noise.
        n (int): Number of samples, n >= 0.

    Returns:
        ndarray: (n, data_dim) samples in the model's (normalized) space.
    """
    if n < 0:
        raise ShapeError(f"sample count must be non-negative, got {n}")
    d = eps_net.data_dim
    x = noise_source.standard_normal((n, d))
    if n == 0:
        return x
    for t in range(sched.T, 0, -1):
        eps_hat = eps_net.predict(x, t)
        coef = sched.beta[t] / np.sqrt(1.0 - sched.alpha_bar[t])
        x = (x - coef * eps_hat) / np.sqrt(sched.alpha[t])
        if t > 1:
            x = x + sched.sigma[t] * noise_source.standard_normal((n, d))
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("non-finite reverse sample")
    return x
