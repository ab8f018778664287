"""Bootstrap of the spatial (v2) skin model from accepted v1 segmentations.

Humans cherry-pick good color-only segmentation masks; those pairs form a
curated set from which pixels are re-sampled (with their normalized
coordinates) to train the five-feature model.  The curation itself stays a
human step: this module only consumes an accepted list, never auto-accepts.
"""

from dataclasses import dataclass

import numpy as np

from fusionkit import images, skin

# Mixed into the pool-subsetting RNG stream so it never collides with a
# per-image stream.
POOL_STREAM = 0x9E3779B9


@dataclass
class CuratedMaskSet:
    """Accepted (image, mask) pairs plus the per-image sampling budget.

    ``entries`` holds ((h, w, 3) uint8 RGB image, (h, w) bool mask) pairs.
    """

    entries: list
    pixels_per_image: int = 100

    def __post_init__(self):
        if self.pixels_per_image < 1:
            raise ValueError("pixels_per_image must be >= 1")


def load_manifest(path, pixels_per_image=100):
    """Read a manifest of "<image.ppm> <mask.pgm>" lines into a curated set."""
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"manifest line needs two paths: {line!r}")
            image = images.read_ppm(parts[0])
            mask = images.read_pgm(parts[1]) > 127
            entries.append((image, mask))
    return CuratedMaskSet(entries=entries, pixels_per_image=pixels_per_image)


def harvest_pixels(mask_set, fraction=1.0, seed=0):
    """Sample labeled five-feature pixels from every curated image.

    Exactly ``pixels_per_image`` distinct pixels are drawn uniformly per
    image (labels from the mask, coordinates normalized to [0, 1]), pooled
    in image order with per-image pixel indices sorted, then thinned to a
    uniform ``floor(fraction * total)`` subset.  Per-image RNG streams are
    derived from (seed, image index), so results do not depend on how images
    might be partitioned across workers.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if not mask_set.entries:
        raise ValueError("curated set is empty")
    ppi = mask_set.pixels_per_image
    feats = []
    labels = []
    for idx, (image, mask) in enumerate(mask_set.entries):
        image = np.asarray(image)
        mask = np.asarray(mask).astype(bool)
        if image.ndim != 3 or image.shape[2] != 3 or image.shape[:2] != mask.shape:
            raise ValueError(
                f"entry {idx}: image shape {image.shape} does not match mask "
                f"shape {mask.shape}"
            )
        h, w = mask.shape
        if ppi > h * w:
            raise ValueError(
                f"entry {idx}: cannot draw {ppi} distinct pixels from {h * w}"
            )
        rng = np.random.default_rng([seed, idx])
        flat = np.sort(rng.choice(h * w, size=ppi, replace=False))
        ys, xs = np.divmod(flat, w)
        bgr = image[ys, xs, ::-1].astype(np.float64)
        x_norm = xs / (w - 1) if w > 1 else np.zeros(ppi)
        y_norm = ys / (h - 1) if h > 1 else np.zeros(ppi)
        feats.append(np.column_stack([bgr, x_norm, y_norm]))
        labels.append(mask[ys, xs])
    features = np.vstack(feats)
    labels = np.concatenate(labels)

    total = features.shape[0]
    keep = int(np.floor(fraction * total))
    if keep < total:
        rng = np.random.default_rng([seed, POOL_STREAM])
        chosen = np.sort(rng.choice(total, size=keep, replace=False))
        features = features[chosen]
        labels = labels[chosen]
    return features, labels


def bootstrap(v1_model, mask_set, fraction=1.0, seed=0):
    """Fit the five-feature (v2) model from curated v1 segmentations."""
    if v1_model.variant != "v1":
        raise ValueError(f"expected a v1 model, got variant {v1_model.variant!r}")
    features, labels = harvest_pixels(mask_set, fraction=fraction, seed=seed)
    return skin.fit(features, labels)
