"""Temporal smoothing of per-frame class distributions and window analysis.

A frame's smoothed distribution is the mean of the fused distributions of
the same session whose timestamps fall in [t - M, t] (the frame itself
included).  Sweeping the window length M over a grid and fitting a Gaussian
curve to the resulting accuracies locates the best history length.
"""

from dataclasses import dataclass

import numpy as np

from fusionkit.ensemble import accuracy
from fusionkit.errors import FlatCurveError

# Absorbs float rounding at the trailing window edge so a frame exactly
# M seconds old stays included.
EDGE_TOL = 1e-9


@dataclass
class SmoothingConfig:
    window_s: float = 0.0
    fps: float = 30.0

    def __post_init__(self):
        if self.window_s < 0:
            raise ValueError("window_s must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")


@dataclass
class GaussianFit:
    amplitude: float
    mean: float
    sigma: float
    offset: float

    def __call__(self, m):
        m = np.asarray(m, dtype=np.float64)
        return self.amplitude * np.exp(
            -((m - self.mean) ** 2) / (2.0 * self.sigma**2)
        ) + self.offset


def smooth(records, fused, cfg):
    """Window-average fused distributions within each session.

    ``records`` and ``fused`` run in parallel; timestamps must be
    non-decreasing within every session.  Sessions never mix, and a window
    of zero (or one that holds only the current frame) returns the input.
    """
    fused = np.asarray(fused, dtype=np.float64)
    if fused.ndim != 2 or fused.shape[0] != len(records):
        raise ValueError("fused distributions must align with records")
    out = fused.copy()
    if cfg.window_s == 0:
        return out

    by_session = {}
    for i, rec in enumerate(records):
        by_session.setdefault(rec.session_id, []).append(i)
    for indices in by_session.values():
        ts = np.array([records[i].timestamp_s for i in indices])
        if (np.diff(ts) < 0).any():
            raise ValueError(
                f"timestamps not sorted within session "
                f"{records[indices[0]].session_id!r}"
            )
        rows = fused[indices]
        csum = np.vstack([np.zeros(rows.shape[1]), np.cumsum(rows, axis=0)])
        starts = np.searchsorted(ts, ts - cfg.window_s - EDGE_TOL, side="left")
        for k, i in enumerate(indices):
            lo = starts[k]
            out[i] = (csum[k + 1] - csum[lo]) / (k + 1 - lo)
    return out


def sweep(records, fused, m_grid, fps=30.0):
    """Accuracy of the smoothed argmax decision at each window length."""
    m_grid = list(m_grid)
    if not m_grid:
        raise ValueError("empty window grid")
    truths = np.array([rec.true_class for rec in records])
    results = []
    for m in m_grid:
        smoothed = smooth(records, fused, SmoothingConfig(window_s=m, fps=fps))
        results.append((m, accuracy(smoothed, truths)))
    return results


def _linear_terms(g, y):
    # Closed-form least squares for amplitude/offset given the shape vector g.
    n = g.shape[0]
    gs, ys = g.sum(), y.sum()
    det = n * (g @ g) - gs * gs
    if det == 0:
        return 0.0, ys / n
    a = (n * (g @ y) - gs * ys) / det
    c = (ys - a * gs) / n
    return a, c


def _sse(m, y, mu, sigma):
    g = np.exp(-((m - mu) ** 2) / (2.0 * sigma**2))
    a, c = _linear_terms(g, y)
    r = a * g + c - y
    return r @ r, a, c


def fit_gaussian(points):
    """Least-squares fit of a*exp(-(M-mu)^2/(2 sigma^2)) + c to (M, accuracy).

    A coarse (mu, sigma) grid with closed-form (a, c) per candidate is
    refined by zooming, then polished with damped Gauss-Newton steps.
    """
    points = sorted((float(m), float(v)) for m, v in points)
    if len(points) < 4:
        raise ValueError("need at least 4 points to fit a Gaussian curve")
    m = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    if np.ptp(y) == 0:
        raise FlatCurveError("all accuracies are equal; no curve to fit")

    span = max(m[-1] - m[0], 1e-12)
    mu_lo, mu_hi = m[0], m[-1]
    sig_lo, sig_hi = span / 100.0, span * 2.0
    best = (np.inf, 0.0, 1.0, 0.0, 0.0)  # sse, mu, sigma, a, c
    for _ in range(8):
        for mu in np.linspace(mu_lo, mu_hi, 31):
            for sigma in np.linspace(sig_lo, sig_hi, 31):
                sse, a, c = _sse(m, y, mu, sigma)
                if sse < best[0]:
                    best = (sse, mu, sigma, a, c)
        mu_step = (mu_hi - mu_lo) / 30.0
        sig_step = (sig_hi - sig_lo) / 30.0
        mu_lo, mu_hi = best[1] - 2 * mu_step, best[1] + 2 * mu_step
        sig_lo = max(best[2] - 2 * sig_step, span * 1e-6)
        sig_hi = best[2] + 2 * sig_step

    sse, mu, sigma, a, c = best
    params = np.array([a, mu, sigma, c])
    for _ in range(100):
        a, mu, sigma, c = params
        g = np.exp(-((m - mu) ** 2) / (2.0 * sigma**2))
        r = a * g + c - y
        jac = np.column_stack([
            g,
            a * g * (m - mu) / sigma**2,
            a * g * (m - mu) ** 2 / sigma**3,
            np.ones_like(m),
        ])
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        improved = False
        for _ in range(20):
            trial = params + scale * step
            if trial[2] != 0:
                trial_sse = float(np.sum((trial[0] * np.exp(
                    -((m - trial[1]) ** 2) / (2.0 * trial[2] ** 2)
                ) + trial[3] - y) ** 2))
                if trial_sse < sse:
                    params, sse, improved = trial, trial_sse, True
                    break
            scale /= 2.0
        if not improved or float(np.abs(step).max()) < 1e-14:
            break

    a, mu, sigma, c = params
    return GaussianFit(amplitude=float(a), mean=float(mu),
                       sigma=float(abs(sigma)), offset=float(c))
