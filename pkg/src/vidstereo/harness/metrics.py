"""Disparity error metrics.

``bad_percentile`` defaults to the mean error over the worst ``p`` percent of
pixels; ``mode="value"`` gives the error at that upper percentile instead.
"""
from __future__ import annotations

import math

import numpy as np


def _errors(D, D_gt, mask) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    D_gt = np.asarray(D_gt, dtype=np.float64)
    if D.shape != D_gt.shape:
        raise ValueError(f"shape mismatch: {D.shape} vs {D_gt.shape}")
    mask = np.ones(D.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != D.shape:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        raise ValueError("empty evaluation mask")
    return np.abs(D[mask] - D_gt[mask])


def epe(D, D_gt, mask=None) -> float:
    """Mean absolute disparity error over the mask."""
    return float(np.mean(_errors(D, D_gt, mask)))


def d_thresh(D, D_gt, mask=None, tau: float = 1.0) -> float:
    """Percentage of pixels whose error is strictly greater than ``tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    err = _errors(D, D_gt, mask)
    return 100.0 * np.count_nonzero(err > tau) / err.size


def bad_percentile(D, D_gt, mask=None, p: float = 1.0, mode: str = "mean") -> float:
    if not 0 < p <= 100:
        raise ValueError("p must lie in (0, 100]")
    err = np.sort(_errors(D, D_gt, mask))[::-1]
    n = max(1, math.ceil(p / 100.0 * err.size))
    if mode == "mean":
        return float(np.mean(err[:n]))
    if mode == "value":
        return float(err[n - 1])
    raise ValueError(f"unknown bad-percentile mode {mode!r}")


def frame_metrics(D, D_gt, mask=None, bad_mode: str = "mean") -> dict:
    err = _errors(D, D_gt, mask)
    row = {"n": int(err.size), "epe": float(err.mean())}
    for tau in (1, 3, 5):
        row[f"d{tau}"] = 100.0 * np.count_nonzero(err > tau) / err.size
    for p in (1, 3, 5):
        row[f"bad{p}"] = bad_percentile(D, D_gt, mask, p, bad_mode)
    return row
