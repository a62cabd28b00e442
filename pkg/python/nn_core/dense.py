"""
Dense network forward and backward passes.

全結合ネットワークの順伝播・逆伝播。
Weights are stored as (fan_in, fan_out) matrices so a batch of row vectors
multiplies from the left. Hidden layers share one activation; the output
layer is the identity.
"""

from dataclasses import dataclass

import numpy as np

from ail_errors import NonFiniteError, ShapeError

ACTIVATIONS = ("tanh", "relu")

_GAINS = {"tanh": 5.0 / 3.0, "relu": np.sqrt(2.0)}


def param_count(layer_sizes):
    """
    Returns the number of scalar parameters for the given layer sizes.

    層サイズから決まるパラメータ総数を返す。

    Args:
        layer_sizes (sequence of int): Sizes from input to output.

    Returns:
        int: Sum of weight and bias entries over all layers.
    """
    return int(sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:])))


def _check_finite(arrays, what):
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(f"non-finite value in {what}")


@dataclass(frozen=True)
class DenseNet:
    """
    Immutable multi-layer perceptron.

    Attributes:
        layer_sizes (tuple of int): Sizes from input to output, at least two entries.
        weights (tuple of ndarray): weights[i] has shape (layer_sizes[i], layer_sizes[i+1]).
        biases (tuple of ndarray): biases[i] has shape (layer_sizes[i+1],).
        activation (str): Hidden activation, "tanh" or "relu".
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ShapeError(f"layer_sizes must hold at least two positive sizes, got {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation '{self.activation}' (expected one of {ACTIVATIONS})")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError("one weight matrix and one bias vector per layer are required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ShapeError(
                    f"layer {i}: expected weight {(sizes[i], sizes[i + 1])} and bias {(sizes[i + 1],)}, "
                    f"got {w.shape} and {b.shape}"
                )
        _check_finite(self.weights + self.biases, "network parameters")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """Returns [W0, b0, W1, b1, ...]."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def with_parameters(self, params):
        """Returns a copy holding the given [W0, b0, ...] list."""
        params = [np.asarray(p, dtype=np.float64) for p in params]
        return DenseNet(self.layer_sizes, tuple(params[0::2]), tuple(params[1::2]), self.activation)


@dataclass(frozen=True)
class DenseGradients:
    """Parameter gradients in parameters() order plus the input gradient."""

    parameters: list
    input: np.ndarray


def init_dense(layer_sizes, activation, rng, output_scale=1.0):
    """
    Creates a network with Kaiming-uniform fan-in scaled weights and zero biases.

    Kaiming 一様初期化（fan-in スケーリング）でネットワークを生成する。

    Args:
        layer_sizes (sequence of int): Sizes from input to output.
        activation (str): "tanh" or "relu".
        rng (numpy.random.Generator): Source of the initial weights.
        output_scale (float): Extra factor on the last layer's bound.

    Returns:
        DenseNet: Freshly initialized network.
    """
    if activation not in ACTIVATIONS:
        raise ShapeError(f"unknown activation '{activation}' (expected one of {ACTIVATIONS})")
    sizes = tuple(int(s) for s in layer_sizes)
    weights, biases = [], []
    last = len(sizes) - 2
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = _GAINS[activation] * np.sqrt(3.0 / fan_in)
        if i == last:
            bound *= output_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(sizes, tuple(weights), tuple(biases), activation)


def _activate(kind, z):
    if kind == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(kind, z, h):
    if kind == "tanh":
        return 1.0 - h * h
    return (z > 0.0).astype(np.float64)


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_size:
        raise ShapeError(f"input has shape {x.shape}, network expects last dimension {net.input_size}")
    return batch, single


def forward_cache(net, x):
    """
    Runs the forward pass and keeps the intermediate values needed by backward().

    Args:
        net (DenseNet): Network.
        x (ndarray): Input vector (d,) or batch (n, d).

    Returns:
        tuple: (output, cache). output has shape (out,) or (n, out).
    """
    batch, single = _as_batch(net, x)
    inputs, pre, h = [], [], batch
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = z if i == last else _activate(net.activation, z)
    cache = {"inputs": inputs, "pre": pre, "single": single}
    return (h[0] if single else h), cache


def forward(net, x):
    """
    Evaluates the network.

    ネットワークを評価する（パラメータは変更しない）。

    Args:
        net (DenseNet): Network.
        x (ndarray): Input vector (d,) or batch (n, d).

    Returns:
        ndarray: Output vector (out,) or batch (n, out).

    Raises:
        ShapeError: If the input's last dimension differs from the first layer size.
    """
    return forward_cache(net, x)[0]


def penultimate(net, x):
    """
    Returns the activations of the last hidden layer (the network's feature space).

    Args:
        net (DenseNet): Network with at least one hidden layer.
        x (ndarray): Input vector or batch.

    Returns:
        ndarray: Hidden features, shape (h,) or (n, h).
    """
    if len(net.layer_sizes) < 3:
        raise ShapeError("network has no hidden layer")
    out, cache = forward_cache(net, x)
    features = cache["inputs"][-1]
    return features[0] if cache["single"] else features


def backward(net, x, upstream, cache=None):
    """
    Reverse-mode gradients of upstream · forward(net, x).

    逆伝播で全パラメータと入力に対する勾配を計算する（純粋関数）。

    Args:
        net (DenseNet): Network.
        x (ndarray): Input vector (d,) or batch (n, d).
        upstream (ndarray): Gradient w.r.t. the output, same shape as forward(net, x).
        cache (dict or None): Result of forward_cache(net, x) to skip recomputation.

    Returns:
        DenseGradients: Gradients for every parameter (batch-summed) and for the input.

    Raises:
        ShapeError: If upstream does not match the output shape.
    """
    if cache is None:
        _, cache = forward_cache(net, x)
    g = np.asarray(upstream, dtype=np.float64)
    if cache["single"]:
        g = g[None, :] if g.ndim == 1 else g
    n = cache["inputs"][0].shape[0]
    if g.shape != (n, net.output_size):
        raise ShapeError(f"upstream gradient has shape {np.shape(upstream)}, expected output shape")

    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        if i != last:
            z = cache["pre"][i]
            g = g * _activation_grad(net.activation, z, _activate(net.activation, z))
        grads_w[i] = cache["inputs"][i].T @ g
        grads_b[i] = g.sum(axis=0)
        g = g @ net.weights[i].T

    params = []
    for gw, gb in zip(grads_w, grads_b):
        params.extend([gw, gb])
    return DenseGradients(params, g[0] if cache["single"] else g)
