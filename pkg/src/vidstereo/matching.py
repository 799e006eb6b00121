"""Matching features, context features and windowed correlation lookup.

Features live at 1/4 of the image resolution. The reference extractor
block-averages the image down by 4, then builds a soft census descriptor
(``tanh`` of neighbour-minus-centre differences over a square window) plus
x/y gradient channels and L2-normalises every pixel. Block averaging by the
same factor keeps the descriptor equivariant to 4-pixel image shifts.

Correlation follows the rig convention in :mod:`vidstereo.geometry`: the left
pixel ``u`` with disparity ``d`` is compared against the right feature
sampled at ``u - d``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

FEATURE_SCALE = 4
SENTINEL = -np.inf
FMAP_MAGIC = b"FMAP"


@dataclass
class FeatureConfig:
    census_window: int = 5
    census_tau: float = 0.02
    gradient_gain: float = 8.0
    half_channels: bool = False
    normalize: bool = True
    sigma_edge: float = 0.1


@dataclass
class FeatureMap:
    """``(H, W, C)`` float32 per-pixel feature vectors."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class ContextMap:
    data: np.ndarray
    edge: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.edge.shape


@dataclass
class CostSlice:
    """Correlation samples around a disparity hypothesis.

    ``disparities`` and ``values`` are ``(H, W, K)``; out-of-range samples
    hold ``SENTINEL`` in ``values``.
    """

    disparities: np.ndarray
    values: np.ndarray
    step: float

    @property
    def k(self) -> int:
        return self.values.shape[-1]


def to_gray(image) -> np.ndarray:
    """Float grayscale in [0, 1]; uint8 is rescaled and RGB is luma-converted."""
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D or RGB image, got shape {img.shape}")
    return img


def downsample(image, factor: int = FEATURE_SCALE) -> np.ndarray:
    img = to_gray(image)
    h, w = img.shape[0] // factor, img.shape[1] // factor
    img = img[: h * factor, : w * factor]
    return img.reshape(h, factor, w, factor).mean(axis=(1, 3))


def _census_offsets(window: int, half: bool):
    r = window // 2
    offs = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if (dy, dx) != (0, 0)]
    if half:
        offs = offs[::2]
    return offs


def _check_size(small: np.ndarray, window: int):
    if small.shape[0] < window or small.shape[1] < window:
        raise ValueError(
            f"image too small: {small.shape} at feature resolution, census window {window}"
        )


def extract_features(image, config: FeatureConfig | None = None) -> FeatureMap:
    cfg = config or FeatureConfig()
    small = downsample(image)
    _check_size(small, cfg.census_window)
    r = cfg.census_window // 2
    padded = np.pad(small, r, mode="edge")
    h, w = small.shape

    chans = []
    for dy, dx in _census_offsets(cfg.census_window, cfg.half_channels):
        nb = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        chans.append(np.tanh((nb - small) / cfg.census_tau))
    gy, gx = np.gradient(small)
    chans.append(cfg.gradient_gain * gx)
    chans.append(cfg.gradient_gain * gy)
    feat = np.stack(chans, axis=-1)

    if cfg.normalize:
        norm = np.linalg.norm(feat, axis=-1, keepdims=True)
        feat = np.divide(feat, norm, out=np.zeros_like(feat), where=norm > 0)
    return FeatureMap(feat.astype(np.float32))


def extract_context(image, config: FeatureConfig | None = None) -> ContextMap:
    """Local mean/std context channels and an edge weight ``exp(-|grad I| / sigma)``."""
    cfg = config or FeatureConfig()
    small = downsample(image)
    _check_size(small, cfg.census_window)
    mean = ndimage.uniform_filter(small, 3, mode="nearest")
    sq = ndimage.uniform_filter(small * small, 3, mode="nearest")
    std = np.sqrt(np.maximum(sq - mean * mean, 0.0))
    gy, gx = np.gradient(small)
    edge = np.exp(-np.hypot(gx, gy) / cfg.sigma_edge)
    return ContextMap(np.stack([mean, std], axis=-1), edge)


def correlate_at(FL: FeatureMap, FR: FeatureMap, u: int, v: int, d: float) -> float:
    """Correlation of ``FL(u, v)`` with ``FR(u - d, v)``, bilinear in x."""
    x = u - d
    if x < 0 or x > FR.width - 1:
        return SENTINEL
    x0 = int(np.floor(x))
    fx = x - x0
    x1 = min(x0 + 1, FR.width - 1)
    left = FL.data[v, u].astype(np.float64)
    right = (1 - fx) * FR.data[v, x0].astype(np.float64) + fx * FR.data[v, x1].astype(np.float64)
    return float(left @ right)


def window_offsets(radius: float, step: float) -> np.ndarray:
    k = int(round(2 * radius / step))
    if k <= 0 or abs(k * step - 2 * radius) > 1e-9:
        raise ValueError(f"step {step} must divide radius {radius}")
    return -radius + step * np.arange(k + 1)


def sample_correlation(FL64: np.ndarray, FR64: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Correlation at per-pixel disparities ``disp`` (``(H, W)``) for float64 feature arrays."""
    h, w, c = FL64.shape
    cols = np.arange(w, dtype=np.float64)[None, :]
    x = cols - disp
    ok = (x >= 0) & (x <= w - 1)
    xc = np.clip(x, 0, w - 1)
    x0 = np.floor(xc).astype(np.int64)
    fx = xc - x0
    x1 = np.minimum(x0 + 1, w - 1)
    rows = np.arange(h)[:, None] * w
    flat = FR64.reshape(-1, c)
    c0 = np.einsum("hwc,hwc->hw", FL64, flat[rows + x0])
    c1 = np.einsum("hwc,hwc->hw", FL64, flat[rows + x1])
    out = (1 - fx) * c0 + fx * c1
    out[~ok] = SENTINEL
    return out


def lookup_window(FL: FeatureMap, FR: FeatureMap, D, radius: float = 4, step: float = 1) -> CostSlice:
    """Evaluate correlation at ``D + {-R, ..., +R}`` for every pixel, on the fly.

    ``D`` is a ``DisparityMap`` or ``(H, W)`` array at feature resolution.
    Sample disparities are clamped below at zero.
    """
    values = getattr(D, "values", D)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (FL.height, FL.width):
        raise ValueError(f"disparity shape {values.shape} != feature shape {FL.data.shape[:2]}")
    offs = window_offsets(radius, step)
    disps = np.maximum(values[..., None] + offs, 0.0)
    FL64 = FL.data.astype(np.float64)
    FR64 = FR.data.astype(np.float64)
    cost = np.empty_like(disps)
    for k in range(len(offs)):
        cost[..., k] = sample_correlation(FL64, FR64, disps[..., k])
    return CostSlice(disps, cost, float(step))


def correlation_sweep(FL: FeatureMap, FR: FeatureMap, max_disp: int) -> np.ndarray:
    """Integer-disparity correlation for ``d = 0 .. max_disp``; shape ``(H, W, max_disp + 1)``."""
    FL64 = FL.data.astype(np.float64)
    FR64 = FR.data.astype(np.float64)
    h, w, _ = FL64.shape
    vol = np.full((h, w, max_disp + 1), SENTINEL)
    for d in range(min(max_disp, w - 1) + 1):
        vol[:, d:, d] = np.einsum("hwc,hwc->hw", FL64[:, d:], FR64[:, : w - d])
    return vol


def save_features(path, fmap: FeatureMap) -> None:
    data = np.ascontiguousarray(fmap.data, dtype="<f4")
    h, w, c = data.shape
    with open(path, "wb") as f:
        f.write(FMAP_MAGIC)
        f.write(struct.pack("<III", h, w, c))
        f.write(data.tobytes())


def load_features(path, rig=None) -> FeatureMap:
    """Read a raw ``FMAP`` feature file.

    When ``rig`` is given the map must sit at its 1/4 resolution.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != FMAP_MAGIC:
        raise ValueError(f"{path}: not an FMAP file")
    h, w, c = struct.unpack("<III", raw[4:16])
    need = h * w * c * 4
    if len(raw) - 16 != need:
        raise ValueError(f"{path}: expected {need} payload bytes, found {len(raw) - 16}")
    if rig is not None and (h, w) != (rig.height // FEATURE_SCALE, rig.width // FEATURE_SCALE):
        raise ValueError(
            f"{path}: {h}x{w} does not match rig {rig.height}x{rig.width} at 1/{FEATURE_SCALE}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(h, w, c).astype(np.float32)
    return FeatureMap(data)
