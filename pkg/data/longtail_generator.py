"""
Gaussian long-tail datasets: a balanced source set and a disjoint target set
whose class proportions follow a SkewSpec.

All randomness comes from numpy's PCG64 generator seeded with `seed`, which is
portable across platforms.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.distance import pdist

from core.errors import InvalidInputError
from core.logger import get_logger

logger = get_logger("data")

MEAN_PLACEMENT_ATTEMPTS = 200


class Dataset(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    num_classes: int = 0
    label_mapping: Optional[Dict[str, int]] = None

    @field_validator("features", mode="before")
    @classmethod
    def _features(cls, value):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidInputError(f"features must be a non-empty 2-D matrix, got shape {arr.shape}")
        return arr

    @field_validator("labels", mode="before")
    @classmethod
    def _labels(cls, value):
        if value is None:
            return None
        arr = np.asarray(value)
        if arr.ndim != 1 or (arr.size and not np.issubdtype(arr.dtype, np.integer)):
            raise InvalidInputError("labels must be a 1-D integer vector")
        if arr.size and arr.min() < 0:
            raise InvalidInputError("class ids must start at 0")
        return arr.astype(np.int64)

    @model_validator(mode="after")
    def _consistent(self):
        if self.labels is not None:
            if self.labels.shape[0] != self.features.shape[0]:
                raise InvalidInputError(
                    f"{self.labels.shape[0]} labels for {self.features.shape[0]} rows"
                )
            present = int(self.labels.max()) + 1 if self.labels.size else 0
            if self.num_classes < present:
                self.num_classes = present
        return self

    @property
    def class_counts(self) -> List[int]:
        if self.labels is None:
            return []
        return np.bincount(self.labels, minlength=self.num_classes).tolist()

    def __len__(self) -> int:
        return self.features.shape[0]


class SkewSpec(BaseModel):
    """Named classes take fixed target fractions; the rest share the remainder uniformly."""

    num_classes: int = Field(ge=1)
    skew_classes: List[Tuple[int, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _feasible(self):
        ids = [c for c, _ in self.skew_classes]
        if len(set(ids)) != len(ids):
            raise InvalidInputError(f"skewed classes repeat: {ids}")
        for c, fraction in self.skew_classes:
            if not 0 <= c < self.num_classes:
                raise InvalidInputError(f"skewed class {c} outside [0, {self.num_classes})")
            if fraction <= 0:
                raise InvalidInputError(f"skew fraction for class {c} must be positive")
        total = sum(fraction for _, fraction in self.skew_classes)
        if total >= 1:
            raise InvalidInputError(f"skew fractions sum to {total}, must be below 1")
        if len(ids) == self.num_classes:
            raise InvalidInputError("every class is skewed, nothing receives the remaining mass")
        return self

    def fractions(self) -> np.ndarray:
        skewed = dict(self.skew_classes)
        rest = (1.0 - sum(skewed.values())) / (self.num_classes - len(skewed))
        return np.array([skewed.get(c, rest) for c in range(self.num_classes)])


def target_counts(fractions: np.ndarray, total: int) -> np.ndarray:
    """Floor every share, then hand the remainder to the largest fractional parts (lower class first)."""
    exact = np.asarray(fractions, dtype=np.float64) * total
    counts = np.floor(exact).astype(np.int64)
    remainder = int(total - counts.sum())
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def class_means(rng: np.random.Generator, num_classes: int, dim: int, cluster_sep: float) -> np.ndarray:
    """Rejection-sample class means in a growing box until all pairs are cluster_sep apart."""
    side = cluster_sep * max(2.0, num_classes ** (1.0 / dim) * 2.0)
    for attempt in range(MEAN_PLACEMENT_ATTEMPTS):
        means = rng.uniform(-side / 2, side / 2, size=(num_classes, dim))
        if num_classes == 1 or pdist(means).min() >= cluster_sep:
            return means
        if attempt % 20 == 19:
            side *= 1.5
    raise InvalidInputError(f"could not place {num_classes} means {cluster_sep} apart in {dim} dimensions")


def gen_gaussian_longtail(num_classes: int, dim: int, per_class_source: int, target_total: int,
                          skew: SkewSpec, cluster_sep: float = 10.0, seed: int = 0,
                          noise: float = 1.0) -> Tuple[Dataset, Dataset]:
    """
    Balanced source and skewed target drawn from the same isotropic Gaussian classes.

    Args:
        num_classes: number of Gaussian classes.
        dim: feature dimension.
        per_class_source: source samples per class.
        target_total: target samples in total, split by `skew`.
        skew: target class proportions.
        cluster_sep: minimum distance between class means.
        seed: PCG64 seed.
        noise: standard deviation of every class.
    """
    if min(num_classes, dim, per_class_source, target_total) < 1 or cluster_sep <= 0 or noise <= 0:
        raise InvalidInputError("generator parameters must be positive")
    if skew.num_classes != num_classes:
        raise InvalidInputError(f"skew covers {skew.num_classes} classes, expected {num_classes}")

    rng = np.random.default_rng(seed)
    means = class_means(rng, num_classes, dim, cluster_sep)
    counts = target_counts(skew.fractions(), target_total)

    source_x = [means[c] + noise * rng.standard_normal((per_class_source, dim)) for c in range(num_classes)]
    target_x = [means[c] + noise * rng.standard_normal((int(counts[c]), dim)) for c in range(num_classes)]
    source = Dataset(features=np.vstack(source_x),
                     labels=np.repeat(np.arange(num_classes), per_class_source),
                     num_classes=num_classes)
    target = Dataset(features=np.vstack(target_x),
                     labels=np.repeat(np.arange(num_classes), counts),
                     num_classes=num_classes)
    logger.debug("generated source %s and target %s", source.class_counts, target.class_counts)
    return source, target
