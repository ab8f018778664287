"""Pure NumPy implementations of the hot kernels.

Mirrors the surface of the compiled ``fusionkit._kernels`` extension; the
active implementation is chosen in :mod:`fusionkit.backend`.  Both versions
must produce identical results on identical inputs.
"""

import numpy as np


def mvn_log_density(features, mean, prec, log_norm):
    """Log density of a multivariate normal at each row of ``features``.

    Parameters
    ----------
    features : (n, d) float64 array
    mean : (d,) float64 array
    prec : (d, d) float64 array
        Precision matrix (inverse of the covariance).
    log_norm : float
        Log normalization constant, -0.5 * (d*log(2*pi) + logdet(cov)).

    Returns
    -------
    (n,) float64 array of log densities.
    """
    diff = np.asarray(features, dtype=np.float64) - mean
    quad = np.einsum("ni,ij,nj->n", diff, prec, diff)
    return log_norm - 0.5 * quad


def label_components(mask):
    """8-connectivity connected-component labeling of a binary raster.

    Two-pass union-find scan.  Component ids are contiguous 1..K assigned in
    row-major order of each component's first pixel; 0 is background.

    Returns (labels, count) where labels is an (h, w) int32 array.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    # parent[i] for provisional label i; label 0 unused
    parent = [0]

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    next_label = 1
    for y in range(h):
        row = mask[y]
        lab_row = labels[y]
        above = labels[y - 1] if y > 0 else None
        for x in range(w):
            if not row[x]:
                continue
            neighbors = []
            if x > 0 and lab_row[x - 1]:
                neighbors.append(lab_row[x - 1])
            if above is not None:
                if above[x]:
                    neighbors.append(above[x])
                if x > 0 and above[x - 1]:
                    neighbors.append(above[x - 1])
                if x < w - 1 and above[x + 1]:
                    neighbors.append(above[x + 1])
            if not neighbors:
                lab_row[x] = next_label
                parent.append(next_label)
                next_label += 1
            else:
                roots = [find(int(n)) for n in neighbors]
                smallest = min(roots)
                lab_row[x] = smallest
                for r in roots:
                    parent[r] = smallest

    # Resolve forwarding and compact ids in first-pixel row-major order.
    remap = np.zeros(next_label, dtype=np.int32)
    count = 0
    flat = labels.ravel()
    for i in range(flat.shape[0]):
        lab = flat[i]
        if lab == 0:
            continue
        root = find(int(lab))
        if remap[root] == 0:
            count += 1
            remap[root] = count
        flat[i] = remap[root]
    return labels, count


def conv2d_valid(x, weights, bias, stride):
    """Valid-padding 2D convolution (cross-correlation) over a HWC tensor.

    Parameters
    ----------
    x : (h, w, c_in) float64 array
    weights : (kh, kw, c_in, c_out) float64 array
    bias : (c_out,) float64 array
    stride : int

    Returns
    -------
    (oh, ow, c_out) float64 array with oh = (h - kh)//stride + 1.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    h, w, _ = x.shape
    kh, kw, _, c_out = weights.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.broadcast_to(np.asarray(bias, dtype=np.float64), (oh, ow, c_out)).copy()
    for ky in range(kh):
        for kx in range(kw):
            patch = x[ky : ky + oh * stride : stride, kx : kx + ow * stride : stride, :]
            out += np.tensordot(patch, weights[ky, kx], axes=([2], [0]))
    return out
