"""Fusion of per-frame classifier outputs and the loss/accuracy metrics.

A class distribution is a length-10 vector of non-negative probabilities
summing to one, over the driver-activity classes in `CLASS_NAMES` order.
Fusion combines N such vectors per frame: an unweighted mean (majority
voting) or a convex combination with learned weights normalized by their sum.
"""

from dataclasses import dataclass

import numpy as np

NUM_CLASSES = 10

CLASS_NAMES = (
    "safe_driving",
    "text_right",
    "phone_right",
    "text_left",
    "phone_left",
    "radio",
    "drinking",
    "reaching_behind",
    "hair_makeup",
    "talking_to_passenger",
)

NLL_FLOOR = 1e-15


@dataclass
class PredictionRecord:
    """One frame: identity, ground truth, and each classifier's distribution.

    ``outputs`` maps classifier name to a (10,) probability vector; its
    insertion order is the classifier order and must be shared by every
    record in a dataset.
    """

    frame_id: str
    session_id: str
    timestamp_s: float
    true_class: int
    outputs: dict


def check_distribution(probs, tol=1e-6):
    """Validate a single distribution (length 10, non-negative, sums to 1)."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (NUM_CLASSES,):
        raise ValueError(f"expected a length-{NUM_CLASSES} vector, got {probs.shape}")
    if (probs < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(probs.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    return probs


def majority_vote(outputs):
    """Unweighted mean of classifier distributions.

    ``outputs`` stacks the N classifier vectors along axis -2, i.e. (N, 10)
    for one frame or (n, N, 10) for a batch.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim < 2 or outputs.shape[-2] < 1:
        raise ValueError("need at least one classifier output")
    return outputs.mean(axis=-2)


def weighted_vote(outputs, weights):
    """Weighted mean of classifier distributions, normalized by sum(weights)."""
    outputs = np.asarray(outputs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if outputs.ndim < 2:
        raise ValueError("need at least one classifier output")
    if weights.shape != (outputs.shape[-2],):
        raise ValueError(
            f"got {weights.shape[0] if weights.ndim else 0} weights for "
            f"{outputs.shape[-2]} classifiers"
        )
    total = weights.sum()
    if total == 0:
        raise ValueError("weights must not all be zero")
    return np.tensordot(outputs, weights, axes=([-2], [0])) / total


def nll(predictions, truths):
    """Mean negative log likelihood of the true class.

    Probabilities are floored at 1e-15 so exact zeros stay finite.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths)
    if predictions.ndim != 2 or predictions.shape[0] != truths.shape[0]:
        raise ValueError("predictions and truths must have matching lengths")
    if predictions.shape[0] == 0:
        raise ValueError("need at least one prediction")
    p_true = predictions[np.arange(truths.shape[0]), truths]
    return float(-np.log(np.maximum(p_true, NLL_FLOOR)).mean())


def accuracy(predictions, truths):
    """Percentage of frames whose argmax matches the truth.

    Argmax ties resolve to the lowest class index.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths)
    if predictions.ndim != 2 or predictions.shape[0] != truths.shape[0]:
        raise ValueError("predictions and truths must have matching lengths")
    if predictions.shape[0] == 0:
        raise ValueError("need at least one prediction")
    return float(100.0 * (predictions.argmax(axis=1) == truths).mean())


def stack_outputs(records):
    """Stack a record list into ((n, N, 10) outputs, (n,) truths, names).

    Validates that every record carries the same classifier names in the
    same order.
    """
    if not records:
        raise ValueError("empty record list")
    names = tuple(records[0].outputs)
    tensor = np.empty((len(records), len(names), NUM_CLASSES), dtype=np.float64)
    truths = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        if tuple(rec.outputs) != names:
            raise ValueError(
                f"record {rec.frame_id!r} classifier names differ from {names}"
            )
        for j, name in enumerate(names):
            tensor[i, j] = rec.outputs[name]
        truths[i] = rec.true_class
    return tensor, truths, names
