"""Autoencoder anomaly detector plus per-dimension baselines.

Training data defines a per-dimension min-max normalization; the detector
learns to reconstruct normalized normal records and flags a record when
its reconstruction MSE exceeds mean + 3 std of the training-set MSEs.
A PCA reconstruction-error scorer with the same preprocessing serves as
the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .neuralnet import (
    DenseNetwork,
    TrainConfig,
    forward_batch,
    init_network,
    reconstruction_mse_batch,
    sgd_train,
)

SIGMA_ZERO_SENTINEL = 1e9


@dataclass
class Normalizer:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        self.minimum = np.asarray(self.minimum, dtype=np.float64)
        self.maximum = np.asarray(self.maximum, dtype=np.float64)
        if self.minimum.shape != self.maximum.shape or self.minimum.ndim != 1:
            raise DataError("normalizer bounds must be matching 1-D vectors")
        if np.any(self.minimum > self.maximum):
            raise DataError("per-dimension min must not exceed max")

    @property
    def dim(self) -> int:
        return self.minimum.shape[0]

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """(x - min) / (max - min); constant dimensions map to 0.

        Values outside the training range are deliberately not clamped:
        out-of-range inputs should inflate the anomaly score.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DataError(f"expected {self.dim} dimensions, got {x.shape[-1]}")
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        out = (x - self.minimum) / safe
        return np.where(span > 0, out, 0.0)

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DataError(f"expected {self.dim} dimensions, got {x.shape[-1]}")
        return self.minimum + x * (self.maximum - self.minimum)


def fit_normalizer(train: np.ndarray) -> Normalizer:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise DataError("normalizer needs a non-empty 2-D training array")
    return Normalizer(train.min(axis=0), train.max(axis=0))


@dataclass
class AEDetector:
    net: DenseNetwork
    normalizer: Normalizer
    threshold: float
    train_mean: np.ndarray  # raw-domain per-dimension mean
    train_std: np.ndarray  # raw-domain per-dimension std
    mse_mean: float
    mse_std: float


def train_detector(
    train: np.ndarray,
    hidden_sizes: list[int],
    activations: list[str],
    cfg: TrainConfig,
    init_seed: int | None = None,
) -> AEDetector:
    """Fit normalizer, train the autoencoder, calibrate the threshold.

    The threshold is mean + 3 std of the reconstruction MSEs over the
    training set. Raw-domain per-dimension mean/std are captured for the
    outlier-degree baseline. ``init_seed`` defaults to ``cfg.seed``.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise DataError("training set must be a non-empty 2-D array")
    n = train.shape[1]
    if not hidden_sizes:
        raise DataError("need at least one hidden layer")
    if min(hidden_sizes) >= n:
        raise DataError("bottleneck layer must be strictly smaller than the input")
    sizes = [n, *hidden_sizes, n]
    if len(activations) != len(sizes) - 1:
        raise DataError("need one activation tag per weight layer")

    norm = fit_normalizer(train)
    normalized = norm.normalize(train)
    net = init_network(sizes, activations, cfg.seed if init_seed is None else init_seed)
    net = sgd_train(net, normalized, cfg)

    mses = reconstruction_mse_batch(net, normalized)
    mse_mean = float(mses.mean())
    mse_std = float(mses.std())
    return AEDetector(
        net=net,
        normalizer=norm,
        threshold=mse_mean + 3.0 * mse_std,
        train_mean=train.mean(axis=0),
        train_std=train.std(axis=0),
        mse_mean=mse_mean,
        mse_std=mse_std,
    )


def mse_score(det: AEDetector, x: np.ndarray) -> float:
    """Reconstruction MSE of one raw record (normalized internally)."""
    z = det.normalizer.normalize(np.asarray(x, dtype=np.float64))
    return float(reconstruction_mse_batch(det.net, z)[0])


def mse_score_batch(det: AEDetector, x: np.ndarray) -> np.ndarray:
    z = det.normalizer.normalize(np.asarray(x, dtype=np.float64))
    return reconstruction_mse_batch(det.net, z)


def is_anomalous(det: AEDetector, x: np.ndarray) -> tuple[bool, float]:
    """Strict exceedance: a score exactly at the threshold is normal."""
    score = mse_score(det, x)
    return score > det.threshold, score


def reconstruction_error_vector(det: AEDetector, x: np.ndarray) -> np.ndarray:
    """Signed per-dimension output-minus-input, in the normalized domain."""
    z = det.normalizer.normalize(np.asarray(x, dtype=np.float64))
    if z.ndim == 1:
        z = z[None, :]
    out = forward_batch(det.net, z)[-1]
    return (out - z)[0]


def outlier_degree(det: AEDetector, x: np.ndarray) -> np.ndarray:
    """Per-dimension z-score against raw training statistics.

    A zero-variance dimension scores 0 when the value sits at the training
    mean, otherwise a +-1e9 sentinel stands in for the infinite z-score.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != det.train_mean.shape[0]:
        raise DataError("dimension mismatch with training statistics")
    diff = x - det.train_mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / det.train_std
    degenerate = det.train_std == 0
    if np.any(degenerate):
        z = np.where(degenerate & (diff == 0), 0.0, z)
        z = np.where(degenerate & (diff > 0), SIGMA_ZERO_SENTINEL, z)
        z = np.where(degenerate & (diff < 0), -SIGMA_ZERO_SENTINEL, z)
    return z


@dataclass
class PCABaseline:
    normalizer: Normalizer
    mean: np.ndarray  # of the normalized training data
    components: np.ndarray  # (m, dim), orthonormal rows


def pca_fit(train: np.ndarray, m: int) -> PCABaseline:
    """Top-m principal directions of the normalized training data."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise DataError("PCA needs a non-empty 2-D training array")
    n = train.shape[1]
    if not 0 <= m <= n:
        raise DataError(f"component count must be in [0, {n}], got {m}")

    norm = fit_normalizer(train)
    z = norm.normalize(train)
    mean = z.mean(axis=0)
    centered = z - mean
    if train.shape[0] > 1:
        cov = (centered.T @ centered) / (train.shape[0] - 1)
    else:
        cov = np.zeros((n, n))
    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending order; take the top-m columns, largest first
    comps = eigvecs[:, ::-1][:, :m].T.copy()
    for row in comps:
        # fix the sign so serialized models are platform-stable
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PCABaseline(norm, mean, comps)


def pca_score(p: PCABaseline, x: np.ndarray) -> float:
    """MSE between the normalized record and its projection."""
    return float(pca_score_batch(p, x)[0])


def pca_score_batch(p: PCABaseline, x: np.ndarray) -> np.ndarray:
    z = p.normalizer.normalize(np.asarray(x, dtype=np.float64))
    if z.ndim == 1:
        z = z[None, :]
    centered = z - p.mean
    if p.components.shape[0]:
        proj = (centered @ p.components.T) @ p.components
    else:
        proj = np.zeros_like(centered)
    return np.mean((centered - proj) ** 2, axis=1)
