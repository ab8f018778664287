"""Pixel-wise skin classifier: a two-class Gaussian model with equal priors.

Pixel feature vectors are (blue, green, red) in [0, 255] for the color-only
v1 variant, with normalized (x, y) coordinates in [0, 1] appended for the
spatially-aware v2 variant.  Class-conditional densities are Gaussians fitted
to labeled pixels; the skin posterior under equal priors reduces to
L_skin / (L_skin + L_non_skin), evaluated in log space for stability.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from fusionkit import backend
from fusionkit.errors import (
    DegeneratePointWarning,
    DimensionMismatchError,
    InsufficientDataError,
    SchemaError,
)

LOG_2PI = np.log(2.0 * np.pi)

VARIANT_DIMS = {"v1": 3, "v2": 5}


@dataclass
class GaussianClassConditional:
    """Mean/covariance of one class plus derived density evaluation terms.

    ``cov`` is stored after regularization and must be symmetric positive
    definite; ``prec`` (the precision matrix) and ``log_norm`` are derived
    from its Cholesky factor.
    """

    mean: np.ndarray
    cov: np.ndarray
    prec: np.ndarray = field(repr=False)
    log_norm: float = field(repr=False)

    @classmethod
    def from_moments(cls, mean, cov):
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(cov, dtype=np.float64)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatchError(
                f"covariance shape {cov.shape} does not match mean dimension {d}"
            )
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InsufficientDataError(
                "class covariance is singular even after regularization"
            ) from None
        chol_inv = np.linalg.inv(chol)
        prec = chol_inv.T @ chol_inv
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        log_norm = -0.5 * (d * LOG_2PI + log_det)
        return cls(mean=mean, cov=cov, prec=prec, log_norm=float(log_norm))

    @property
    def dimension(self):
        return self.mean.shape[0]

    def log_density(self, features):
        """Log density at each row of ``features`` ((n, d) array)."""
        return backend.mvn_log_density(features, self.mean, self.prec, self.log_norm)


@dataclass
class SkinModel:
    skin: GaussianClassConditional
    non_skin: GaussianClassConditional
    variant: str

    @property
    def dimension(self):
        return self.skin.dimension


def _as_feature_matrix(features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatchError(
            "samples must form an (n, d) matrix of uniform dimension"
        )
    return features


def _class_moments(feats, regularize=True):
    n, d = feats.shape
    mean = feats.mean(axis=0)
    diff = feats - mean
    cov = diff.T @ diff / (n - 1)
    if regularize:
        eps = 1e-6 * np.trace(cov) / d
        cov = cov + eps * np.eye(d)
    return mean, cov


def fit(features, labels):
    """Fit skin and non-skin Gaussians to labeled pixel feature vectors.

    Parameters
    ----------
    features : (n, d) array with d = 3 (v1) or 5 (v2)
        Rows are (blue, green, red[, x_norm, y_norm]) vectors.
    labels : (n,) array
        Nonzero/True marks skin pixels.

    Per class the mean is the sample mean and the covariance the unbiased
    (n-1 divisor) sample covariance plus ``1e-6 * trace/d`` on the diagonal,
    which keeps saturated color channels invertible.
    """
    features = _as_feature_matrix(features)
    labels = np.asarray(labels).astype(bool)
    if labels.shape != (features.shape[0],):
        raise DimensionMismatchError("labels must be one per sample")
    d = features.shape[1]
    variant = {3: "v1", 5: "v2"}.get(d)
    if variant is None:
        raise DimensionMismatchError(f"feature dimension must be 3 or 5, got {d}")
    color = features[:, :3]
    if color.min(initial=0.0) < 0.0 or color.max(initial=0.0) > 255.0:
        raise ValueError("color components must lie in [0, 255]")
    if d == 5:
        coords = features[:, 3:]
        if coords.min(initial=0.0) < 0.0 or coords.max(initial=0.0) > 1.0:
            raise ValueError("normalized coordinates must lie in [0, 1]")

    classes = {}
    for name, member in (("skin", labels), ("non-skin", ~labels)):
        feats = features[member]
        if feats.shape[0] < d + 1:
            raise InsufficientDataError(
                f"need at least {d + 1} {name} samples, got {feats.shape[0]}"
            )
        classes[name] = GaussianClassConditional.from_moments(*_class_moments(feats))
    return SkinModel(skin=classes["skin"], non_skin=classes["non-skin"], variant=variant)


def posterior_map(model, features):
    """Skin posterior for each row of ``features``, in [0, 1].

    Equal class priors cancel, so the posterior is the density ratio
    L_s / (L_s + L_n) computed stably from log densities.  Points where both
    log densities underflow to -inf get 0.5 and raise DegeneratePointWarning.
    """
    features = _as_feature_matrix(features)
    if features.shape[1] != model.dimension:
        raise DimensionMismatchError(
            f"feature dimension {features.shape[1]} does not match model "
            f"dimension {model.dimension}"
        )
    log_s = model.skin.log_density(features)
    log_n = model.non_skin.log_density(features)
    out = np.empty(features.shape[0], dtype=np.float64)

    degenerate = np.isneginf(log_s) & np.isneginf(log_n)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} point(s) with vanishing density in both "
            "classes; posterior set to 0.5",
            DegeneratePointWarning,
            stacklevel=2,
        )
    # delta <= 0: skin at least as likely; exp stays bounded on each branch.
    with np.errstate(invalid="ignore"):
        delta = log_n - log_s
    lo = ~degenerate & (delta <= 0)
    hi = ~degenerate & (delta > 0)
    out[lo] = 1.0 / (1.0 + np.exp(delta[lo]))
    e = np.exp(-delta[hi])
    out[hi] = e / (1.0 + e)
    out[degenerate] = 0.5
    return out


def posterior(model, x):
    """Skin posterior of a single feature vector."""
    return float(posterior_map(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def classify_map(model, features):
    """Boolean skin decision per row: skin iff posterior strictly above 0.5."""
    return posterior_map(model, features) > 0.5


def classify(model, x):
    return bool(classify_map(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def _pixel_features(image, variant):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionMismatchError(f"expected (h, w, 3) image, got {image.shape}")
    h, w = image.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("image has a zero dimension")
    bgr = image[:, :, ::-1].reshape(-1, 3).astype(np.float64)
    if variant == "v1":
        return bgr
    xs = np.arange(w, dtype=np.float64) / (w - 1) if w > 1 else np.zeros(w)
    ys = np.arange(h, dtype=np.float64) / (h - 1) if h > 1 else np.zeros(h)
    grid_x = np.broadcast_to(xs, (h, w)).reshape(-1)
    grid_y = np.broadcast_to(ys[:, None], (h, w)).reshape(-1)
    return np.column_stack([bgr, grid_x, grid_y])


def segment(model, image):
    """Per-pixel posterior heatmap and boolean skin mask of an RGB image.

    ``image`` is (h, w, 3) uint8 in RGB channel order (as read from a P6
    file); features are assembled in (blue, green, red) order.  For the v2
    variant, coordinates are normalized by (width-1, height-1).
    """
    feats = _pixel_features(image, model.variant)
    h, w = image.shape[:2]
    heat = posterior_map(model, feats).reshape(h, w)
    return heat, heat > 0.5


def heatmap_to_u8(heatmap):
    """Quantize a [0, 1] heatmap to uint8 as round(255 * p)."""
    return np.rint(np.clip(heatmap, 0.0, 1.0) * 255.0).astype(np.uint8)


def mask_to_u8(mask):
    return np.where(mask, np.uint8(255), np.uint8(0))


MODEL_MAGIC = "fusionkit-skin-model v1"


def save_model(model, path):
    lines = [MODEL_MAGIC, f"variant {model.variant}", f"dim {model.dimension}"]
    for name, g in (("skin", model.skin), ("nonskin", model.non_skin)):
        lines.append(f"{name}-mean " + " ".join(repr(float(v)) for v in g.mean))
        lines.append(f"{name}-cov " + " ".join(repr(float(v)) for v in g.cov.ravel()))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_model(path):
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != MODEL_MAGIC:
        raise SchemaError(f"not a skin model file: {path}")
    fields = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    try:
        variant = fields["variant"]
        d = int(fields["dim"])
        parts = {}
        for name in ("skin", "nonskin"):
            mean = np.array([float(v) for v in fields[f"{name}-mean"].split()])
            cov = np.array([float(v) for v in fields[f"{name}-cov"].split()]).reshape(d, d)
            parts[name] = GaussianClassConditional.from_moments(mean, cov)
    except KeyError as exc:
        raise SchemaError(f"missing field {exc} in model file {path}") from None
    if variant not in VARIANT_DIMS or VARIANT_DIMS[variant] != d:
        raise SchemaError(f"variant {variant!r} inconsistent with dim {d}")
    if parts["skin"].dimension != d:
        raise SchemaError("mean dimension inconsistent with declared dim")
    return SkinModel(skin=parts["skin"], non_skin=parts["nonskin"], variant=variant)


def load_pixel_file(path, variant="v1"):
    """Load a labeled pixel file into (features, labels).

    v1 lines are four tab-separated integers "B G R label"; v2 lines carry
    two extra normalized-coordinate columns before the label, "B G R X Y
    label".  Label 1 means skin and 2 means non-skin.
    """
    if variant not in VARIANT_DIMS:
        raise ValueError(f"unknown variant {variant!r}")
    d = VARIANT_DIMS[variant]
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != d + 1:
                raise SchemaError(
                    f"expected {d + 1} columns, got {len(parts)}", line=lineno
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise SchemaError(f"non-numeric value in {line!r}", line=lineno) from None
    if not rows:
        raise SchemaError(f"no samples in {path}")
    data = np.asarray(rows, dtype=np.float64)
    features = data[:, :d]
    raw_labels = data[:, d]
    if not np.isin(raw_labels, (1.0, 2.0)).all():
        raise SchemaError("labels must be 1 (skin) or 2 (non-skin)")
    return features, (raw_labels == 1.0)
