from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from core.containers import Metric
from core.errors import InvalidInputError
from core.similarity import pairwise_cost
from data.longtail_generator import Dataset
from selection.greedy_selector import Selection


class EvalReport(BaseModel):
    overall_accuracy: float
    per_class_accuracy: List[float]
    class_counts: List[int]
    minority_classes: List[int]
    minority_avg_accuracy: Optional[float]
    confusion: List[List[int]]
    prototype_class_histogram: List[int]

    def per_class_rows(self) -> List[dict]:
        """One record per class, for the CSV table."""
        minority = set(self.minority_classes)
        return [
            {"class": c, "target_count": self.class_counts[c], "accuracy": self.per_class_accuracy[c],
             "minority": c in minority, "prototypes": self.prototype_class_histogram[c]}
            for c in range(len(self.class_counts))
        ]


class WeightSkewReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    sorted_weights: List[float]
    std_dev: float
    max_over_min: Optional[float]
    min_is_zero: bool


def prototype_similarity(source: Dataset, prototypes: List[int], target: Dataset, metric: Metric) -> np.ndarray:
    """Similarity of every target point to every prototype, larger is nearer."""
    scores = pairwise_cost(target.features, source.features[prototypes], Metric(metric))
    if Metric(metric) in (Metric.NEG_SQ_EUCLIDEAN, Metric.NEG_L1):
        return -scores
    return scores


def assign_nearest(similarity: np.ndarray) -> np.ndarray:
    """Column of the most similar prototype per row; ties go to the first column."""
    return np.argmax(similarity, axis=1)


def nn_classify(source: Dataset, selection: Selection, target: Dataset,
                metric: Metric = Metric.NEG_SQ_EUCLIDEAN) -> EvalReport:
    """
    Label every target point with the class of its nearest prototype.

    Prototypes are ordered by source index, so distance ties go to the lowest
    index. Minority classes are those whose target share is below 1/num_classes;
    classes absent from the target are not counted as minority.
    """
    if source.labels is None or target.labels is None:
        raise InvalidInputError("nearest-prototype evaluation needs labelled source and target sets")
    prototypes = sorted(selection.indices)
    if not prototypes:
        raise InvalidInputError("selection is empty")
    if prototypes[-1] >= len(source):
        raise InvalidInputError(f"prototype index {prototypes[-1]} outside the source set")

    num_classes = max(source.num_classes, target.num_classes)
    proto_labels = source.labels[prototypes]
    predicted = proto_labels[assign_nearest(prototype_similarity(source, prototypes, target, metric))]

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (target.labels, predicted), 1)
    counts = confusion.sum(axis=1)
    correct = np.diag(confusion)
    per_class = np.divide(correct, counts, out=np.zeros(num_classes), where=counts > 0)

    shares = counts / counts.sum()
    minority = [c for c in range(num_classes) if 0 < shares[c] < 1.0 / num_classes]
    return EvalReport(
        overall_accuracy=float(correct.sum() / counts.sum()),
        per_class_accuracy=per_class.tolist(),
        class_counts=counts.tolist(),
        minority_classes=minority,
        minority_avg_accuracy=float(per_class[minority].mean()) if minority else None,
        confusion=confusion.tolist(),
        prototype_class_histogram=np.bincount(proto_labels, minlength=num_classes).tolist(),
    )


def weight_skew(selection: Selection) -> WeightSkewReport:
    if not selection.weights:
        raise InvalidInputError("selection carries no weights")
    weights = np.sort(np.asarray(selection.weights, dtype=np.float64))[::-1]
    smallest = float(weights[-1])
    return WeightSkewReport(
        sorted_weights=weights.tolist(),
        # np.std of equal floats can round to 1e-17
        std_dev=0.0 if np.all(weights == weights[0]) else float(np.std(weights)),
        max_over_min=float(weights[0] / smallest) if smallest > 0 else None,
        min_is_zero=smallest <= 0,
    )
