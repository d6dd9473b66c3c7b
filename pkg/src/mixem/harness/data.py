"""Datasets, synthetic blob generation, and the augmentation contract.

Labels ride along for evaluation only; nothing in training reads them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass
class Dataset:
    """Feature matrix with optional per-row class labels."""

    features: np.ndarray
    labels: np.ndarray | None = None
    class_count: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ContractError(f"features must be (N, d), got shape {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise ContractError("features must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if self.labels.size != self.features.shape[0]:
                raise ContractError("labels length must match feature rows")
            if self.labels.size and self.labels.min() < 0:
                raise ContractError("labels must be non-negative")
            if self.class_count is None:
                self.class_count = int(self.labels.max()) + 1
            elif self.labels.max() >= self.class_count:
                raise ContractError("labels exceed class_count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def without_labels(self) -> "Dataset":
        return Dataset(self.features.copy())


def generate_blobs(
    classes: int, per_class: int, dim: int, separation: float, seed: int
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs with labeled rows.

    Class means sit on scaled coordinate axes so every pair of means is
    exactly `separation` standard deviations apart, which needs
    dim >= classes.  Rows are shuffled; everything is deterministic in
    the seed.
    """
    if classes < 2:
        raise ContractError("need at least 2 classes")
    if per_class < 2:
        raise ContractError("need at least 2 points per class")
    if dim < 1:
        raise ContractError("dim must be >= 1")
    if separation < 0:
        raise ContractError("separation must be >= 0")
    if dim < classes:
        raise ContractError(f"axis-aligned means need dim >= classes ({dim} < {classes})")
    rng = np.random.default_rng(seed)
    means = np.zeros((classes, dim))
    for c in range(classes):
        means[c, c] = separation / np.sqrt(2.0)
    labels = np.repeat(np.arange(classes), per_class)
    features = means[labels] + rng.standard_normal((labels.size, dim))
    order = rng.permutation(labels.size)
    return Dataset(features[order], labels[order], class_count=classes)


@dataclass(frozen=True)
class AugmentSettings:
    """Additive Gaussian noise then random coordinate zero-masking."""

    noise_sigma: float = 0.5
    mask_prob: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        if not 0.0 <= self.mask_prob < 1.0:
            raise ContractError("mask_prob must be in [0, 1)")


def _one_view(x: np.ndarray, settings: AugmentSettings, rng: np.random.Generator) -> np.ndarray:
    # Always draw both noise and mask uniforms so rng consumption does
    # not depend on the settings.
    view = x + settings.noise_sigma * rng.standard_normal(x.shape)
    view[rng.random(x.shape) < settings.mask_prob] = 0.0
    return view


def augment_pair(
    x, settings: AugmentSettings, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Two independent augmentations of one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError("augment_pair expects a single feature vector")
    return _one_view(x.copy(), settings, rng), _one_view(x.copy(), settings, rng)


def augment_batch(
    features: np.ndarray, settings: AugmentSettings, rng: np.random.Generator
) -> np.ndarray:
    """Expand (N, d) features into (2N, d) paired views.

    Rows 2k and 2k+1 are the two views of source row k.  Vectorized
    drawing: one noise block, one mask block.
    """
    features = np.asarray(features, dtype=np.float64)
    n, d = features.shape
    views = np.repeat(features, 2, axis=0)
    views = views + settings.noise_sigma * rng.standard_normal((2 * n, d))
    views[rng.random((2 * n, d)) < settings.mask_prob] = 0.0
    return views
