"""
Reward-quality and distribution metrics: PCC, Frechet distance, PCA export.

報酬品質と分布の指標（ピアソン相関、フレシェ距離、PCA 出力）。
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ail_errors import ShapeError, UndefinedStatisticError
from record_io import format_row, write_text_atomic
from sac import critic_features

PSD_TOLERANCE = 1e-8


def compute_pcc(x, y):
    """
    Pearson correlation coefficient.

    Args:
        x, y (sequence of float): Series of equal length >= 2.

    Returns:
        float: Correlation in [-1, 1].

    Raises:
        ShapeError: On unequal or too short series.
        UndefinedStatisticError: If either series has zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ShapeError("PCC needs two series of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatisticError("correlation is undefined for a zero-variance series")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def _symmetric_sqrt(matrix):
    values, vectors = linalg.eigh(matrix)
    if values.min() < -PSD_TOLERANCE:
        raise UndefinedStatisticError(f"covariance is not positive semi-definite (eigenvalue {values.min():.3e})")
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def compute_fd(features_a, features_b):
    """
    Gaussian Frechet distance between two feature sets.

    FD = ||mu_a - mu_b||^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^1/2 S_b S_a^1/2)^1/2).

    Args:
        features_a, features_b (ndarray): (n, d) rows, n >= d + 1 for both.

    Returns:
        float: Non-negative distance.

    Raises:
        ShapeError: On a dimension mismatch or too few rows.
        UndefinedStatisticError: If an eigenvalue is below -1e-8.
    """
    a = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    d = a.shape[1]
    if a.shape[0] < d + 1 or b.shape[0] < d + 1:
        raise ShapeError(f"FD needs at least {d + 1} rows per set, got {a.shape[0]} and {b.shape[0]}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))
    root_a = _symmetric_sqrt(cov_a)
    middle = root_a @ cov_b @ root_a
    values = linalg.eigvalsh((middle + middle.T) / 2.0)
    if values.min() < -PSD_TOLERANCE:
        raise UndefinedStatisticError(f"product covariance is not positive semi-definite (eigenvalue {values.min():.3e})")
    trace_sqrt = np.sum(np.sqrt(np.clip(values, 0.0, None)))
    diff = mu_a - mu_b
    fd = diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt
    return float(max(fd, 0.0))


def evaluate_fd_to_expert(bundle, expert_pairs, comparison_pairs):
    """
    FD between expert and comparison pairs in the Q1 penultimate feature space.

    Q ネットワークの最終隠れ層特徴空間でのフレシェ距離。

    Args:
        bundle (PolicyBundle): Trained policy (critic used as feature extractor).
        expert_pairs, comparison_pairs (ndarray): Raw (s, a) rows.

    Returns:
        float: compute_fd of the two feature sets.

    Raises:
        UndefinedStatisticError: If every feature is constant over both sets.
    """
    fa = critic_features(bundle, expert_pairs)
    fb = critic_features(bundle, comparison_pairs)
    both = np.concatenate([fa, fb])
    if np.all(both.max(axis=0) == both.min(axis=0)):
        raise UndefinedStatisticError("critic features are constant over both sets")
    return compute_fd(fa, fb)


@dataclass(frozen=True)
class PcaResult:
    """
    Attributes:
        mean (ndarray): (d,) centering vector.
        components (ndarray): (d, k) principal directions as columns.
        explained_variance (ndarray): (k,) variances, descending.
        projected (ndarray): (n, k) projected rows of the fitted data.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    projected: np.ndarray

    def project(self, pairs):
        return (np.asarray(pairs, dtype=np.float64) - self.mean) @ self.components


def export_pca(pairs, n_components=2, path=None, extra=None):
    """
    Fits the top principal directions of the sample covariance.

    Args:
        pairs (ndarray): (n, d) rows, n >= 3.
        n_components (int): Number of directions, <= d.
        path (Path or None): If given, writes a CSV `source,pc1,...` of the projected rows.
        extra (dict or None): More {source: rows} projected with the same basis into the CSV.

    Returns:
        PcaResult

    Raises:
        UndefinedStatisticError: If all rows are identical (rank 0).
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[0] < 3:
        raise ShapeError("PCA needs an (n, d) array with n >= 3")
    if not 1 <= n_components <= pairs.shape[1]:
        raise ShapeError(f"n_components must lie in 1..{pairs.shape[1]}")
    mean = pairs.mean(axis=0)
    cov = np.atleast_2d(np.cov(pairs, rowvar=False))
    values, vectors = linalg.eigh(cov)
    if values.max() <= 0.0:
        raise UndefinedStatisticError("PCA is undefined for rank-0 data")
    order = np.argsort(values)[::-1][:n_components]
    result = PcaResult(mean, vectors[:, order], values[order], (pairs - mean) @ vectors[:, order])

    if path is not None:
        header = "source," + ",".join(f"pc{i + 1}" for i in range(n_components))
        lines = [header] + [f"expert,{format_row(row)}" for row in result.projected]
        for source, rows in (extra or {}).items():
            lines += [f"{source},{format_row(row)}" for row in result.project(rows)]
        write_text_atomic(path, "\n".join(lines) + "\n")
    return result


def moving_average(values, window=5):
    """Trailing moving average; the first entries average over what is available."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    for i in range(values.size):
        out[i] = values[max(0, i - window + 1):i + 1].mean()
    return out


def min_max_normalize(values):
    """Maps values to [0, 1]; a constant series maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    span = values.max() - values.min()
    if span == 0.0:
        return np.zeros_like(values)
    return (values - values.min()) / span
