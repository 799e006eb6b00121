"""Disparity update operators run once per refinement iteration.

Two backends share one calling convention, ``(hidden, cost, context, D) ->
(hidden', delta)``:

* ``reference_update``: sub-sample parabola refinement on the cost slice,
  confidence from peak sharpness and match quality, then one edge-aware
  smoothing pass and a background-leaning fill for unreliable pixels. The
  hidden state is a single channel holding an exponential average of that
  confidence.
* ``gru_update``: a convolutional GRU cell plus a disparity head, evaluated
  with externally supplied weights (inference only).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .matching import ContextMap, CostSlice

GRUW_MAGIC = b"GRUW"
GRUW_VERSION = 1


def parabola_peak(cost: CostSlice):
    """Sub-sample peak of the cost slice.

    Returns ``(target, curvature, slope, peaked, best)`` per pixel: the
    refined peak disparity, the negated second difference at an interior
    maximum (0 elsewhere), the rise from the inner neighbour when the maximum
    sits on the window edge (0 elsewhere), whether an interior strict peak was
    found, and the best correlation value.
    """
    vals = cost.values
    K = vals.shape[-1]
    k = np.argmax(vals, axis=-1)[..., None]
    best = np.take_along_axis(vals, k, -1)[..., 0]
    cm = np.take_along_axis(vals, np.clip(k - 1, 0, K - 1), -1)[..., 0]
    cp = np.take_along_axis(vals, np.clip(k + 1, 0, K - 1), -1)[..., 0]
    k = k[..., 0]
    finite = np.isfinite(best)
    interior = finite & (k > 0) & (k < K - 1) & np.isfinite(cm) & np.isfinite(cp)
    cm0 = np.where(interior, cm, 0.0)
    cp0 = np.where(interior, cp, 0.0)
    best0 = np.where(finite, best, 0.0)
    denom = np.where(interior, cm0 - 2.0 * best0 + cp0, 0.0)
    peaked = interior & (denom < 0)

    safe = np.where(peaked, denom, -1.0)
    sub = np.where(peaked, (cm0 - cp0) / (2.0 * safe), 0.0)
    target = np.take_along_axis(cost.disparities, k[..., None], -1)[..., 0] + sub * cost.step
    curvature = np.where(peaked, -denom, 0.0)

    inner = np.where(k == 0, cp, cm)
    on_edge = finite & ~interior & (K > 1) & np.isfinite(inner) & ((k == 0) | (k == K - 1))
    slope = np.where(on_edge, best0 - np.where(on_edge, inner, 0.0), 0.0)
    slope = np.maximum(slope, 0.0)
    return target, curvature, slope, peaked, best


def neighbour_average(values: np.ndarray, edge: np.ndarray, support: np.ndarray | None = None):
    """Weighted 4-neighbour average.

    Neighbour ``q`` of pixel ``p`` counts with ``min(edge[p], edge[q]) *
    support[q]``. Returns the average (``values`` where nothing counts) and
    the total weight.
    """
    if support is None:
        support = np.ones_like(values)
    h, w = values.shape
    acc = np.zeros_like(values)
    wsum = np.zeros_like(values)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb_v = np.roll(values, shift, axis)
        wgt = np.minimum(edge, np.roll(edge, shift, axis)) * np.roll(support, shift, axis)
        # Drop the wrapped-around border row/column.
        if axis == 0:
            wgt[0 if shift == 1 else h - 1, :] = 0.0
        else:
            wgt[:, 0 if shift == 1 else w - 1] = 0.0
        acc += wgt * nb_v
        wsum += wgt
    avg = np.divide(acc, wsum, out=values.copy(), where=wsum > 0)
    return avg, wsum


def neighbour_min(values: np.ndarray) -> np.ndarray:
    """Minimum over the 4-neighbourhood (border pixels use the neighbours they have)."""
    padded = np.pad(values, 1, mode="edge")
    return np.minimum.reduce([
        padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:],
    ])


def match_confidence(curvature, slope, peaked, best, cfg):
    """Peak sharpness times match quality, in [0, 1]."""
    sharp = np.where(peaked, 1.0 - np.exp(-curvature / cfg.confidence_scale), 0.0)
    sharp = np.where(slope > 0, 1.0 - np.exp(-2.0 * slope / cfg.confidence_scale), sharp)
    best = np.where(np.isfinite(best), best, -1.0)
    quality = np.clip((best - cfg.quality_low) / (cfg.quality_high - cfg.quality_low), 0.0, 1.0)
    return sharp * quality


def reference_update(hidden: np.ndarray, cost: CostSlice, context: ContextMap, D: np.ndarray, cfg,
                     fill: bool = True, prior=None):
    """One reference refinement step.

    Moves each pixel towards its sub-sample correlation peak by a
    confidence-scaled amount, then blends it with an edge-aware average of
    its neighbours. Neighbours vote in proportion to their running
    confidence, and a pixel listens to them in proportion to its own lack of
    confidence, so poorly matched regions are refilled from well matched
    surroundings.

    Args:
        hidden: ``(H, W, 1)`` running confidence in [0, 1].
        cost: cost slice sampled around ``D``.
        context: context map supplying the edge weights.
        D: ``(H, W)`` current disparity.
        cfg: ``EngineConfig``.
        fill: run the background fill on this step.
        prior: optional ``(D0, h0)``, the frame's warm-start disparity and its
            carried confidence. When given, the data step and the confidence
            decay are shared out over ``cfg.iters`` so a warm frame absorbs
            the same amount of new evidence whatever its iteration budget,
            and later iterations are pulled back towards ``D0``.

    Returns:
        ``(hidden', delta)`` with ``|delta| <= cfg.max_step`` everywhere.
    """
    D = np.asarray(D, dtype=np.float64)
    target, curvature, slope, peaked, best = parabola_peak(cost)
    conf = match_confidence(curvature, slope, peaked, best, cfg)
    moving = peaked | (slope > 0)
    gain, decay = conf, cfg.hidden_decay
    if prior is not None:
        share = 1.0 / cfg.iters
        gain = 1.0 - (1.0 - conf) ** share
        decay = decay ** share
    delta = np.where(moving, (target - D) * gain, 0.0)
    delta = np.clip(delta, -cfg.max_step, cfg.max_step)

    h_new = decay * hidden[..., 0] + (1.0 - decay) * conf

    moved = D + delta
    if prior is not None:
        D0, h0 = prior
        moved = moved + cfg.prior_anchor * h0 * (D0 - D)
    avg, wsum = neighbour_average(moved, context.edge, h_new + cfg.support_floor)
    alpha = cfg.smoothing * (1.0 - h_new)
    blended = np.where(wsum > 0, (1.0 - alpha) * moved + alpha * avg, moved)

    # Unreliable pixels lean towards the farthest neighbour: occluded and
    # unmatched regions belong to the background, and this undoes the
    # foreground growth that near-priority warping introduces.
    if fill and cfg.fill_threshold > 0:
        lost = np.clip(1.0 - np.maximum(conf, h_new) / cfg.fill_threshold, 0.0, 1.0)
        floor = np.minimum(blended, neighbour_min(moved))
        blended = blended - lost * (blended - floor)

    delta = np.clip(blended - D, -cfg.max_step, cfg.max_step)
    delta = np.maximum(delta, cfg.min_disparity - D)
    return h_new[..., None], delta


@dataclass
class GruWeights:
    """Conv-GRU weights, ``(out, in, k, k)`` kernels in cross-correlation form."""

    wz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    br: np.ndarray
    wq: np.ndarray
    bq: np.ndarray
    wd: np.ndarray
    bd: np.ndarray

    @property
    def hidden_channels(self) -> int:
        return self.wz.shape[0]

    @property
    def input_channels(self) -> int:
        return self.wz.shape[1] - self.hidden_channels

    @property
    def kernel_size(self) -> int:
        return self.wz.shape[2]

    def check(self):
        ch, cx, k = self.hidden_channels, self.input_channels, self.kernel_size
        gate = (ch, ch + cx, k, k)
        expect = {
            "wz": gate, "wr": gate, "wq": gate,
            "bz": (ch,), "br": (ch,), "bq": (ch,),
            "wd": (1, ch, k, k), "bd": (1,),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"GRU weight {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"GRU weight {name} has non-finite values")
        if k % 2 != 1:
            raise ValueError("kernel size must be odd")

    @classmethod
    def zeros(cls, hidden: int, inputs: int, k: int = 3) -> "GruWeights":
        g = (hidden, hidden + inputs, k, k)
        return cls(np.zeros(g), np.zeros(hidden), np.zeros(g), np.zeros(hidden),
                   np.zeros(g), np.zeros(hidden), np.zeros((1, hidden, k, k)), np.zeros(1))

    @classmethod
    def random(cls, hidden: int, inputs: int, seed: int = 0, scale: float = 0.1, k: int = 3):
        rng = np.random.default_rng(seed)
        w = cls.zeros(hidden, inputs, k)
        return cls(*(rng.normal(0, scale, getattr(w, n).shape) for n in _ORDER))


_ORDER = ("wz", "bz", "wr", "br", "wq", "bq", "wd", "bd")


def save_gru_weights(path, weights: GruWeights) -> None:
    """``GRUW`` magic, u32 version, hidden/input channels, kernel size, then f32 arrays."""
    weights.check()
    with open(path, "wb") as f:
        f.write(GRUW_MAGIC)
        f.write(struct.pack("<IIII", GRUW_VERSION, weights.hidden_channels,
                            weights.input_channels, weights.kernel_size))
        for name in _ORDER:
            f.write(np.ascontiguousarray(getattr(weights, name), dtype="<f4").tobytes())


def load_gru_weights(path) -> GruWeights:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != GRUW_MAGIC:
        raise ValueError(f"{path}: not a GRUW file")
    version, ch, cx, k = struct.unpack("<IIII", raw[4:20])
    if version != GRUW_VERSION:
        raise ValueError(f"{path}: unsupported GRUW version {version}")
    shapes = GruWeights.zeros(ch, cx, k)
    arrays = []
    offset = 20
    for name in _ORDER:
        shape = getattr(shapes, name).shape
        n = int(np.prod(shape))
        if offset + 4 * n > len(raw):
            raise ValueError(f"{path}: truncated at {name}")
        arrays.append(np.frombuffer(raw, "<f4", n, offset).reshape(shape).astype(np.float64))
        offset += 4 * n
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    w = GruWeights(*arrays)
    w.check()
    return w


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-size zero-padded 2-D cross-correlation; ``x`` is ``(H, W, Cin)``."""
    h, w, cin = x.shape
    cout, cin_w, k, _ = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv input has {cin} channels, kernel expects {cin_w}")
    r = k // 2
    xp = np.pad(x, ((r, r), (r, r), (0, 0)))
    cols = np.empty((h, w, k, k, cin))
    for dy in range(k):
        for dx in range(k):
            cols[:, :, dy, dx, :] = xp[dy : dy + h, dx : dx + w, :]
    kern = weight.transpose(2, 3, 1, 0).reshape(k * k * cin, cout)
    return (cols.reshape(h * w, k * k * cin) @ kern).reshape(h, w, cout) + bias


def conv_gru_cell(h: np.ndarray, x: np.ndarray, weights: GruWeights, check: bool = __debug__):
    """``h' = (1 - z) h + z tanh(conv([r h, x]))`` with sigmoid gates ``z, r``."""
    hx = np.concatenate([h, x], axis=-1)
    z = expit(conv2d(hx, weights.wz, weights.bz))
    r = expit(conv2d(hx, weights.wr, weights.br))
    q = np.tanh(conv2d(np.concatenate([r * h, x], axis=-1), weights.wq, weights.bq))
    if check:
        assert np.all((z >= 0) & (z <= 1)) and np.all((r >= 0) & (r <= 1)), "gate out of range"
        assert np.all(np.abs(q) <= 1), "candidate out of range"
    return (1.0 - z) * h + z * q


def gru_inputs(cost: CostSlice, context: ContextMap, D: np.ndarray) -> np.ndarray:
    """Stack ``[cost samples, context channels, edge weight, disparity]``.

    Out-of-range cost samples enter as -1, the lowest correlation.
    """
    cost_vals = np.where(np.isfinite(cost.values), cost.values, -1.0)
    return np.concatenate(
        [cost_vals, context.data, context.edge[..., None], np.asarray(D, float)[..., None]], axis=-1
    )


def gru_input_channels(k_samples: int, context_channels: int = 2) -> int:
    return k_samples + context_channels + 2


def gru_update(hidden: np.ndarray, cost: CostSlice, context: ContextMap, D: np.ndarray,
               weights: GruWeights, cfg=None):
    """One conv-GRU step followed by the disparity head.

    When ``cfg`` is given the step is clamped to ``cfg.max_step`` and kept
    above ``cfg.min_disparity``.
    """
    x = gru_inputs(cost, context, D)
    if hidden.shape[-1] != weights.hidden_channels or x.shape[-1] != weights.input_channels:
        raise ValueError(
            f"GRU expects {weights.hidden_channels} hidden / {weights.input_channels} input "
            f"channels, got {hidden.shape[-1]} / {x.shape[-1]}"
        )
    h_new = conv_gru_cell(hidden, x, weights)
    delta = conv2d(h_new, weights.wd, weights.bd)[..., 0]
    if cfg is not None:
        delta = np.clip(delta, -cfg.max_step, cfg.max_step)
        delta = np.maximum(delta, cfg.min_disparity - np.asarray(D, float))
    return h_new, delta
