"""
Versioned .npz checkpoints for networks and optimizer states.

ネットワークと最適化状態の .npz チェックポイント。
Each network is stored as its layer sizes, activation name and one flat
row-major float64 parameter vector, so load(save(net)) is bit-exact.
"""

import os
from pathlib import Path

import numpy as np

from ail_errors import ShapeError
from nn_core.adam import AdamState
from nn_core.dense import DenseNet, param_count

FORMAT_VERSION = 1


def _flatten(arrays):
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.ravel(a) for a in arrays]).astype(np.float64)


def _unflatten(flat, shapes):
    out, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape, dtype=np.int64))
        out.append(flat[offset:offset + size].reshape(shape).copy())
        offset += size
    if offset != flat.size:
        raise ShapeError(f"flat parameter vector has {flat.size} values, layout needs {offset}")
    return out


def _layer_shapes(layer_sizes):
    shapes = []
    for a, b in zip(layer_sizes[:-1], layer_sizes[1:]):
        shapes.extend([(a, b), (b,)])
    return shapes


def net_to_arrays(net, prefix=""):
    """Returns the checkpoint arrays of one network under the given key prefix."""
    return {
        f"{prefix}layer_sizes": np.array(net.layer_sizes, dtype=np.int64),
        f"{prefix}activation": np.array(net.activation),
        f"{prefix}params": _flatten(net.parameters()),
    }


def net_from_arrays(arrays, prefix=""):
    """Rebuilds a network stored by net_to_arrays()."""
    sizes = tuple(int(s) for s in arrays[f"{prefix}layer_sizes"])
    flat = np.asarray(arrays[f"{prefix}params"], dtype=np.float64)
    if flat.size != param_count(sizes):
        raise ShapeError(f"checkpoint '{prefix}' holds {flat.size} parameters, layer sizes need {param_count(sizes)}")
    params = _unflatten(flat, _layer_shapes(sizes))
    return DenseNet(sizes, tuple(params[0::2]), tuple(params[1::2]), str(arrays[f"{prefix}activation"]))


def adam_to_arrays(state, prefix=""):
    """Returns the checkpoint arrays of one AdamState under the given key prefix."""
    return {
        f"{prefix}m": _flatten(state.m),
        f"{prefix}v": _flatten(state.v),
        f"{prefix}step": np.array(state.step, dtype=np.int64),
        f"{prefix}hyper": np.array([state.lr, state.beta1, state.beta2, state.eps]),
    }


def adam_from_arrays(arrays, model, prefix=""):
    """Rebuilds an AdamState whose moments are shaped like model.parameters()."""
    shapes = [p.shape for p in model.parameters()]
    lr, beta1, beta2, eps = (float(x) for x in arrays[f"{prefix}hyper"])
    return AdamState(
        tuple(_unflatten(np.asarray(arrays[f"{prefix}m"]), shapes)),
        tuple(_unflatten(np.asarray(arrays[f"{prefix}v"]), shapes)),
        int(arrays[f"{prefix}step"]),
        lr,
        beta1,
        beta2,
        eps,
    )


def save_arrays(path, arrays, kind):
    """
    Writes arrays to an .npz file atomically (temporary file, then rename).

    Args:
        path (Path): Destination file.
        arrays (dict): Name → ndarray.
        kind (str): Checkpoint kind recorded next to the format version.
    """
    path = Path(path)
    payload = dict(arrays)
    payload["format_version"] = np.array(FORMAT_VERSION, dtype=np.int64)
    payload["kind"] = np.array(kind)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **payload)
    os.replace(tmp, path)


def load_arrays(path, kind):
    """
    Reads an .npz checkpoint and checks its format version and kind.

    Raises:
        FileNotFoundError: If the file does not exist.
        ShapeError: If the version or kind does not match.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        arrays = {key: data[key] for key in data.files}
    version = int(arrays.get("format_version", -1))
    if version != FORMAT_VERSION:
        raise ShapeError(f"unsupported checkpoint format version {version} in {path}")
    if str(arrays.get("kind")) != kind:
        raise ShapeError(f"{path} holds a '{arrays.get('kind')}' checkpoint, expected '{kind}'")
    return arrays
