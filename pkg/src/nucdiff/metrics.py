"""Evaluation metrics: KS statistic between ROI intensity distributions,
generalized contrast-to-noise ratio, ROI extraction, and the inter-frame
PSNR used as the motion measure.

The KS statistic is computed exactly over the merged order statistics;
the supremum of |F_a - F_b| is attained at a sample point, so no binning
is involved. gCNR uses shared histogram edges over the pooled range.
"""

import numpy as np

from .errors import ShapeError


class EmpiricalCdf:
    """Right-continuous step CDF of a sample."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("empty sample")
        self.sorted = np.sort(samples)

    def evaluate(self, z):
        """Fraction of samples <= z. Accepts scalars or arrays."""
        idx = np.searchsorted(self.sorted, z, side="right")
        return idx / self.sorted.size


def ks_statistic(a, b):
    """sup_z |F_a(z) - F_b(z)|, exact."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_statistic needs non-empty samples")
    z = np.concatenate([a, b])
    fa = np.searchsorted(np.sort(a), z, side="right") / a.size
    fb = np.searchsorted(np.sort(b), z, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def gcnr(a, b, bins=100, return_flag=False):
    """1 - histogram overlap of the two samples on shared bin edges.

    Edges span the pooled min..max. A degenerate pooled range (all values
    identical) yields 0; pass return_flag to also get that degeneracy
    indicator.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("gcnr needs non-empty samples")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return (0.0, True) if return_flag else 0.0
    edges = np.linspace(lo, hi, bins + 1)
    ha, _ = np.histogram(a, bins=edges)
    hb, _ = np.histogram(b, bins=edges)
    overlap = np.minimum(ha / a.size, hb / b.size).sum()
    val = float(1.0 - overlap)
    # guard against round-off poking out of [0, 1]
    val = min(max(val, 0.0), 1.0)
    return (val, False) if return_flag else val


def extract_roi(frame, mask):
    """Values of the frame at the mask's true positions, order preserved."""
    values = np.asarray(getattr(frame, "values", frame), dtype=float).ravel()
    m = np.asarray(getattr(mask, "mask", mask), dtype=bool).ravel()
    if values.size != m.size:
        raise ShapeError(
            f"frame has {values.size} pixels but mask has {m.size}")
    return values[m]


def motion_psnr(y_t, y_prev, peak=1.0):
    """10 log10(peak^2 / MSE) between consecutive frames, in dB.

    Identical frames return +inf (the no-motion sentinel).
    """
    if peak <= 0:
        raise ValueError("peak must be positive")
    a = np.asarray(getattr(y_t, "values", y_t), dtype=float)
    b = np.asarray(getattr(y_prev, "values", y_prev), dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))
