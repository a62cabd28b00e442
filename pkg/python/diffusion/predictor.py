"""
Noise predictor eps_phi(x, t) and the expert-statistics normalizer.

ノイズ予測器 eps_phi(x, t) とエキスパート統計による正規化。
The step index selects one learned embedding row, which is concatenated to x
before a dense network.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import NonFiniteError, ShapeError
from nn_core import DenseNet, backward, forward_cache, init_dense

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class NoisePredictor:
    """
    Dense network over concat(x, embedding[t - 1]).

    Attributes:
        net (DenseNet): Input size data_dim + embed_dim, output size data_dim.
        embedding (ndarray): (T, embed_dim) learned step embedding.
    """

    net: DenseNet
    embedding: np.ndarray

    def __post_init__(self):
        T, width = self.embedding.shape
        if self.net.input_size != self.net.output_size + width:
            raise ShapeError(
                f"network input {self.net.input_size} must equal data dim {self.net.output_size} "
                f"plus embedding width {width}"
            )
        if not np.all(np.isfinite(self.embedding)):
            raise NonFiniteError("non-finite value in step embedding")

    @property
    def data_dim(self):
        return self.net.output_size

    @property
    def steps(self):
        return self.embedding.shape[0]

    def parameters(self):
        return self.net.parameters() + [self.embedding]

    def with_parameters(self, params):
        return NoisePredictor(self.net.with_parameters(params[:-1]), np.asarray(params[-1], dtype=np.float64))

    def _inputs(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        batch = np.atleast_2d(x)
        if batch.shape[-1] != self.data_dim:
            raise ShapeError(f"input has length {batch.shape[-1]}, predictor expects {self.data_dim}")
        steps = np.broadcast_to(np.asarray(t, dtype=np.int64), (batch.shape[0],))
        if np.any(steps < 1) or np.any(steps > self.steps):
            raise ShapeError(f"step index outside 1..{self.steps}")
        return np.concatenate([batch, self.embedding[steps - 1]], axis=1), steps, x.ndim == 1

    def predict(self, x, t):
        """Predicts the noise for x (d,) or (n, d) at step t (int or per-row array)."""
        return self.predict_cache(x, t)[0]

    def predict_cache(self, x, t):
        inputs, steps, single = self._inputs(x, t)
        out, cache = forward_cache(self.net, inputs)
        cache = {"net": cache, "inputs": inputs, "steps": steps}
        return (out[0] if single else out), cache

    def backward(self, cache, upstream):
        """Returns parameter gradients (parameters() order) of upstream · predict(...)."""
        upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        grads = backward(self.net, cache["inputs"], upstream, cache=cache["net"])
        embed_grad = np.zeros_like(self.embedding)
        np.add.at(embed_grad, cache["steps"] - 1, grads.input[:, self.data_dim:])
        return grads.parameters + [embed_grad]


def init_noise_predictor(data_dim, T, hidden, embed_dim, activation, rng):
    """
    Creates a noise predictor with Kaiming-uniform weights and a N(0, 1) step embedding.

    Args:
        data_dim (int): Length of the concatenated (s, a) vector.
        T (int): Number of diffusion steps.
        hidden (sequence of int): Hidden layer widths.
        embed_dim (int): Step-embedding width.
        activation (str): Hidden activation.
        rng (numpy.random.Generator): Initialization randomness.

    Returns:
        NoisePredictor: Untrained predictor.
    """
    sizes = [data_dim + embed_dim, *hidden, data_dim]
    net = init_dense(sizes, activation, rng)
    embedding = rng.standard_normal((T, embed_dim))
    return NoisePredictor(net, embedding)


@dataclass(frozen=True)
class Normalizer:
    """Affine map to zero-mean / unit-variance using frozen expert statistics."""

    mean: np.ndarray
    std: np.ndarray

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


def fit_normalizer(pairs):
    """
    Fits a Normalizer on expert (s, a) rows; zero-spread columns get std 1.

    Args:
        pairs (ndarray): (n, d) expert pairs, n >= 1.

    Returns:
        Normalizer: Frozen statistics.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[0] == 0:
        raise ShapeError("normalizer needs a non-empty (n, d) array of expert pairs")
    mean = pairs.mean(axis=0)
    std = pairs.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return Normalizer(mean, std)
