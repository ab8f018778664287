"""Connected-component labeling of binary masks and small-blob removal."""

from dataclasses import dataclass

import numpy as np

from fusionkit import backend


@dataclass
class BlobLabeling:
    """8-connected component labeling of a binary mask.

    ``labels`` holds 0 for background and ids 1..K assigned in row-major
    order of each component's first pixel; ``sizes`` maps id to pixel count.
    """

    labels: np.ndarray
    sizes: dict


def label_components(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"expected a non-empty (h, w) mask, got shape {mask.shape}")
    labels, count = backend.label_components(mask.astype(np.uint8))
    counts = np.bincount(labels.ravel(), minlength=count + 1)
    sizes = {k: int(counts[k]) for k in range(1, count + 1)}
    return BlobLabeling(labels=labels, sizes=sizes)


def filter_small(labeling, min_area):
    """Binary mask keeping only components of at least ``min_area`` pixels."""
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    keep = np.zeros(max(labeling.sizes, default=0) + 1, dtype=bool)
    for k, size in labeling.sizes.items():
        keep[k] = size >= min_area
    return keep[labeling.labels]


def default_min_area(shape):
    """Default small-blob threshold: 0.1% of the image, at least one pixel."""
    h, w = shape[:2]
    return max(1, int(0.001 * h * w))
