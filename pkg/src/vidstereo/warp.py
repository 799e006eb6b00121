"""Forward warping of per-pixel maps with softmax splatting.

Each valid source pixel is pushed to its target location and spread over the
four bilinear neighbours. Collisions are resolved by weighting each
contribution with ``exp(beta * weight)``; with the transformed disparity as
weight, nearer surfaces win. Coverage is the winning surface's bilinear mass;
targets where it falls below ``HOLE_THRESHOLD`` are holes, zero-valued and
masked out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraRig, Pose, apply_transform, temporal_transform

DEFAULT_BETA = 10.0
HOLE_THRESHOLD = 1e-4
SNAP_TOLERANCE = 1e-9


@dataclass
class DisparityMap:
    """Per-pixel disparity in pixels plus a validity mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValueError("values and mask must be 2-D arrays of equal shape")

    @classmethod
    def full(cls, shape, value: float) -> "DisparityMap":
        return cls(np.full(shape, float(value)), np.ones(shape, dtype=bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "DisparityMap":
        return DisparityMap(self.values.copy(), self.mask.copy())


@dataclass
class WarpField:
    """Target coordinates for every source pixel; invalid entries are NaN."""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    valid: np.ndarray


def compute_warp_field(rig: CameraRig, rel: Pose, disp: DisparityMap) -> WarpField:
    """Move every valid pixel ``(u, v, d)`` of ``disp`` through the relative pose.

    ``rig`` must describe the resolution ``disp`` lives at (see
    ``CameraRig.scaled``).
    """
    if (disp.height, disp.width) != rig.shape:
        raise ValueError(
            f"disparity is {disp.height}x{disp.width}, rig is {rig.height}x{rig.width}"
        )
    T = temporal_transform(rig, rel)
    vv, uu = np.mgrid[0 : disp.height, 0 : disp.width].astype(np.float64)
    pts = np.stack([uu, vv, disp.values], axis=-1)
    out, valid = apply_transform(T, pts)
    valid &= disp.mask
    out[~valid] = np.nan
    return WarpField(out[..., 0], out[..., 1], out[..., 2], valid)


def _snap(x):
    # Round-off must not leak a sliver of a near surface onto the next pixel;
    # exp(beta * d') would let that sliver win the target.
    r = np.rint(x)
    return np.where(np.abs(x - r) < SNAP_TOLERANCE, r, x)


def _bilinear_targets(field: WarpField, shape):
    """Flat target indices and bilinear weights for the valid sources.

    Returns ``(src, tgt, bw)`` where ``src`` indexes the flattened source
    grid. Corners outside the image and zero-weight corners are dropped.
    """
    h, w = shape
    src_all = np.flatnonzero(field.valid.ravel())
    u = _snap(field.u.ravel()[src_all])
    v = _snap(field.v.ravel()[src_all])
    u0 = np.floor(u)
    v0 = np.floor(v)
    fu = u - u0
    fv = v - v0
    u0 = u0.astype(np.int64)
    v0 = v0.astype(np.int64)

    srcs, tgts, bws = [], [], []
    for du, dv, wgt in (
        (0, 0, (1 - fu) * (1 - fv)),
        (1, 0, fu * (1 - fv)),
        (0, 1, (1 - fu) * fv),
        (1, 1, fu * fv),
    ):
        uu = u0 + du
        vv = v0 + dv
        keep = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h) & (wgt > 0)
        srcs.append(src_all[keep])
        tgts.append(vv[keep] * w + uu[keep])
        bws.append(wgt[keep])
    return np.concatenate(srcs), np.concatenate(tgts), np.concatenate(bws)


def softmax_splat(src, field: WarpField, weight, beta: float = DEFAULT_BETA):
    """Softmax-splat ``src`` along ``field``.

    Args:
        src: ``(H, W)`` or ``(H, W, C)`` source values.
        field: target coordinates for each source pixel.
        weight: ``(H, W)`` splat importance, finite and non-negative where valid.
        beta: softmax sharpness; 0 gives a plain bilinear average.

    Returns:
        ``(warped, coverage)``: the splatted map with the shape of ``src`` and
        the accumulated weight mass per target. Each target's weights are
        scaled by ``exp(-beta * max weight landing there)``, so coverage is
        at most the number of bilinear contributions and never overflows.
    """
    src = np.asarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[..., None]
    h, w, c = src.shape
    n = h * w
    weight = np.asarray(weight, dtype=np.float64).ravel()

    s, t, bw = _bilinear_targets(field, (h, w))
    z = beta * weight[s]
    zmax = np.full(n, -np.inf)
    np.maximum.at(zmax, t, z)
    mass = bw * np.exp(z - zmax[t])

    coverage = np.bincount(t, weights=mass, minlength=n)
    flat = src.reshape(n, c)
    out = np.zeros((n, c))
    for k in range(c):
        out[:, k] = np.bincount(t, weights=mass * flat[s, k], minlength=n)
    hit = coverage > 0
    out[hit] /= coverage[hit, None]

    out = out.reshape(h, w, c)
    if squeeze:
        out = out[..., 0]
    return out, coverage.reshape(h, w)


def warp_state(state, rig: CameraRig, rel: Pose, beta: float = DEFAULT_BETA, with_coverage: bool = False):
    """Warp a frame state's disparity and hidden maps into the current camera.

    The disparity channel carries the transformed disparity ``d'``; hidden
    channels carry their source values. Both are splatted with weight ``d'``
    so the nearest surface takes priority. Holes come back zero and masked.

    Args:
        state: anything with ``disparity`` (a ``DisparityMap`` at the
            resolution of ``rig``) and ``hidden`` (``(H, W, C)``) attributes.
        rig: camera rig at the working resolution.
        rel: previous-to-current relative pose.
        with_coverage: also return the per-target coverage map.

    Returns:
        ``(warped_disparity, warped_hidden)``, plus ``coverage`` when asked.
    """
    field = compute_warp_field(rig, rel, state.disparity)
    hidden = np.asarray(state.hidden, dtype=np.float64)
    if hidden.ndim == 2:
        hidden = hidden[..., None]
    dprime = np.where(field.valid, field.d, 0.0)
    stacked = np.concatenate([dprime[..., None], hidden], axis=-1)
    warped, coverage = softmax_splat(stacked, field, dprime, beta)
    holes = coverage < HOLE_THRESHOLD
    warped[holes] = 0.0
    d_hat = DisparityMap(warped[..., 0], ~holes & (warped[..., 0] > 0))
    if with_coverage:
        return d_hat, warped[..., 1:], coverage
    return d_hat, warped[..., 1:]
