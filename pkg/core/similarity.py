from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from core.containers import Marginal, Metric, SimilarityMatrix
from core.errors import InvalidInputError

BetaMode = Union[str, float]


def _as_features(features, name: str) -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D feature matrix, got shape {arr.shape}")
    return arr


def pairwise_cost(features_source, features_target, metric: Metric) -> np.ndarray:
    """
    Cost matrix C for the distance-based metrics, raw scores for the others.

    neg_sq_euclidean and neg_l1 return distances; cosine returns cosine similarity
    in [-1, 1]; dot returns the raw inner products.
    """
    metric = Metric(metric)
    xs = _as_features(features_source, "features_source")
    xt = _as_features(features_target, "features_target")
    if xs.shape[1] != xt.shape[1]:
        raise InvalidInputError(
            f"dimension mismatch: source has {xs.shape[1]} columns, target has {xt.shape[1]}"
        )

    if metric is Metric.NEG_SQ_EUCLIDEAN:
        return cdist(xs, xt, metric="sqeuclidean")
    if metric is Metric.NEG_L1:
        return cdist(xs, xt, metric="cityblock")
    if metric is Metric.COSINE:
        for name, arr in (("source", xs), ("target", xt)):
            zero_rows = np.flatnonzero(np.linalg.norm(arr, axis=1) == 0)
            if zero_rows.size:
                raise InvalidInputError(f"cosine metric undefined for zero-norm {name} row {zero_rows[0]}")
        return np.clip(1.0 - cdist(xs, xt, metric="cosine"), -1.0, 1.0)
    if metric is Metric.DOT:
        return xs @ xt.T
    raise InvalidInputError("metric 'raw' takes a similarity matrix, not features")


def build_similarity(features_source, features_target, metric: Metric = Metric.NEG_SQ_EUCLIDEAN,
                     beta_mode: BetaMode = "auto") -> SimilarityMatrix:
    """
    Build the nonnegative similarity S from two feature matrices.

    Args:
        features_source: m x d source features.
        features_target: n x d target features.
        metric: how raw scores are obtained (see Metric).
        beta_mode: "auto" (beta = max cost + 1) or an explicit beta, used by the
            distance metrics only.

    Returns:
        SimilarityMatrix with S_ij = beta - C_ij for distance metrics, 1 + cos for
        cosine, and the dot product shifted by |min| + 1 when it has negative entries.
    """
    metric = Metric(metric)
    scores = pairwise_cost(features_source, features_target, metric)

    if metric in (Metric.NEG_SQ_EUCLIDEAN, Metric.NEG_L1):
        max_cost = float(scores.max())
        if beta_mode == "auto":
            beta = max_cost + 1.0
        else:
            beta = float(beta_mode)
            if beta <= max_cost:
                raise InvalidInputError(f"beta={beta} must exceed the maximum cost {max_cost}")
        return SimilarityMatrix(data=beta - scores, beta=beta, source_metric=metric)

    if metric is Metric.COSINE:
        return SimilarityMatrix(data=1.0 + scores, beta=1.0, source_metric=metric)

    min_entry = float(scores.min())
    beta = abs(min_entry) + 1.0 if min_entry < 0 else 0.0
    return SimilarityMatrix(data=scores + beta, beta=beta, source_metric=metric)


def uniform_marginal(size: int, total_mass: float = 1.0) -> Marginal:
    if size < 1:
        raise InvalidInputError(f"marginal size must be at least 1, got {size}")
    if total_mass <= 0:
        raise InvalidInputError(f"total mass must be positive, got {total_mass}")
    return Marginal(mass=np.full(size, total_mass / size))
