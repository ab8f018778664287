# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same surface as ``fusionkit._kernels_py``; selected in ``fusionkit.backend``
when the extension is importable.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def mvn_log_density(features, mean, prec, double log_norm):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] feats = np.ascontiguousarray(features, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu = np.ascontiguousarray(mean, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P = np.ascontiguousarray(prec, dtype=np.float64)
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t d = feats.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] diff = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t k, i, j
    cdef double quad, row

    for k in range(n):
        for i in range(d):
            diff[i] = feats[k, i] - mu[i]
        quad = 0.0
        for i in range(d):
            row = 0.0
            for j in range(d):
                row += P[i, j] * diff[j]
            quad += diff[i] * row
        out[k] = log_norm - 0.5 * quad
    return out


def label_components(mask):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] m = np.ascontiguousarray(
        np.asarray(mask) != 0, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] labels = np.zeros((h, w), dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent = np.zeros(h * w + 1, dtype=np.int32)
    cdef Py_ssize_t y, x
    cdef int next_label = 1
    cdef int lab, root, r, smallest
    cdef int n0, n1, n2, n3

    for y in range(h):
        for x in range(w):
            if m[y, x] == 0:
                continue
            n0 = labels[y, x - 1] if x > 0 else 0
            n1 = labels[y - 1, x] if y > 0 else 0
            n2 = labels[y - 1, x - 1] if (y > 0 and x > 0) else 0
            n3 = labels[y - 1, x + 1] if (y > 0 and x < w - 1) else 0
            if n0 == 0 and n1 == 0 and n2 == 0 and n3 == 0:
                labels[y, x] = next_label
                parent[next_label] = next_label
                next_label += 1
                continue
            smallest = 0
            if n0 != 0:
                n0 = _find(parent, n0)
                smallest = n0
            if n1 != 0:
                n1 = _find(parent, n1)
                if smallest == 0 or n1 < smallest:
                    smallest = n1
            if n2 != 0:
                n2 = _find(parent, n2)
                if smallest == 0 or n2 < smallest:
                    smallest = n2
            if n3 != 0:
                n3 = _find(parent, n3)
                if smallest == 0 or n3 < smallest:
                    smallest = n3
            labels[y, x] = smallest
            if n0 != 0:
                parent[n0] = smallest
            if n1 != 0:
                parent[n1] = smallest
            if n2 != 0:
                parent[n2] = smallest
            if n3 != 0:
                parent[n3] = smallest

    cdef cnp.ndarray[cnp.int32_t, ndim=1] remap = np.zeros(next_label, dtype=np.int32)
    cdef int count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            root = _find(parent, lab)
            if remap[root] == 0:
                count += 1
                remap[root] = count
            labels[y, x] = remap[root]
    return labels, count


cdef inline int _find(cnp.int32_t[:] parent, int i) noexcept:
    cdef int root = i
    cdef int nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


def conv2d_valid(x, weights, bias, int stride):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] xin = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(bias, dtype=np.float64)
    cdef Py_ssize_t h = xin.shape[0]
    cdef Py_ssize_t w = xin.shape[1]
    cdef Py_ssize_t c_in = xin.shape[2]
    cdef Py_ssize_t kh = wt.shape[0]
    cdef Py_ssize_t kw = wt.shape[1]
    cdef Py_ssize_t c_out = wt.shape[3]
    cdef Py_ssize_t oh = (h - kh) // stride + 1
    cdef Py_ssize_t ow = (w - kw) // stride + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((oh, ow, c_out), dtype=np.float64)
    cdef Py_ssize_t oy, ox, co, ky, kx, ci, iy, ix
    cdef double acc

    for oy in range(oh):
        for ox in range(ow):
            for co in range(c_out):
                acc = b[co]
                for ky in range(kh):
                    iy = oy * stride + ky
                    for kx in range(kw):
                        ix = ox * stride + kx
                        for ci in range(c_in):
                            acc += xin[iy, ix, ci] * wt[ky, kx, ci, co]
                out[oy, ox, co] = acc
    return out
