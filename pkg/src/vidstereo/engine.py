"""Temporal stereo engine: warm-started iterative refinement across frames.

Per frame: extract features, bring the previous state into the current view
(warp in ``full`` mode, reuse as-is in ``fast`` mode, re-initialise in
``cold`` mode), run ``iters`` lookup + update iterations at 1/4 resolution,
then upsample the disparity to the image resolution.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .config import EngineConfig
from .geometry import CameraRig, Pose, relative_pose
from .matching import (FEATURE_SCALE, ContextMap, FeatureConfig, FeatureMap, correlation_sweep,
                       extract_context, extract_features, lookup_window, window_offsets)
from .update import GruWeights, gru_input_channels, gru_update, load_gru_weights, reference_update
from .warp import DisparityMap, warp_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameState:
    """What one frame hands to the next, all at feature resolution."""

    disparity: DisparityMap
    hidden: np.ndarray
    pose: Pose | None
    frame_index: int


class FrameOutput(NamedTuple):
    disparity: DisparityMap
    state: FrameState
    timing: dict


def feature_config(cfg: EngineConfig) -> FeatureConfig:
    return FeatureConfig(
        census_window=cfg.census_window,
        census_tau=cfg.census_tau,
        gradient_gain=cfg.gradient_gain,
        half_channels=cfg.mode == "fast",
        sigma_edge=cfg.sigma_edge,
    )


def blockmatch_init(FL: FeatureMap, FR: FeatureMap, max_disp: int, block: int = 2) -> np.ndarray:
    """Integer disparity per ``block x block`` feature tile (8x8 image pixels)."""
    vol = correlation_sweep(FL, FR, max_disp)
    vol = np.where(np.isfinite(vol), vol, -1.0)
    h, w, k = vol.shape
    hb, wb = -(-h // block), -(-w // block)
    padded = np.pad(vol, ((0, hb * block - h), (0, wb * block - w), (0, 0)), mode="edge")
    agg = padded.reshape(hb, block, wb, block, k).mean(axis=(1, 3))
    best = np.argmax(agg, axis=-1).astype(np.float64)
    return np.repeat(np.repeat(best, block, 0), block, 1)[:h, :w]


def init_state(context: ContextMap, pose: Pose | None, cfg: EngineConfig, hidden_channels: int = 1,
               features: tuple[FeatureMap, FeatureMap] | None = None, frame_index: int = 0) -> FrameState:
    """Fresh state: zero hidden, constant or block-matched disparity.

    The previous pose is taken to be the current one.
    """
    shape = context.shape
    if cfg.init == "blockmatch":
        if features is None:
            raise ValueError("block-match initialisation needs the feature pair")
        values = blockmatch_init(features[0], features[1], cfg.blockmatch_max_disparity)
        values = np.maximum(values, cfg.min_disparity)
    else:
        values = np.full(shape, float(cfg.init_disparity))
    hidden = np.zeros(shape + (hidden_channels,))
    return FrameState(DisparityMap(values, np.ones(shape, dtype=bool)), hidden, pose, frame_index)


def fill_holes(disp: DisparityMap) -> np.ndarray:
    """Copy the nearest valid disparity into every masked-out pixel."""
    if disp.mask.all():
        return disp.values.copy()
    idx = ndimage.distance_transform_edt(~disp.mask, return_distances=False, return_indices=True)
    return disp.values[idx[0], idx[1]]


def drop_slivers(disp: DisparityMap, coverage: np.ndarray, threshold: float) -> DisparityMap:
    """Replace warped pixels that the winning surface only grazes.

    Near-priority splatting lets the bilinear fringe of a near surface take a
    target the far surface covers almost fully, so each warp grows the
    foreground by up to a pixel. Targets whose coverage is below
    ``threshold`` take the smallest disparity among their well-covered
    3x3 neighbours, or become holes when there are none.
    """
    sliver = disp.mask & (coverage < threshold)
    if not sliver.any():
        return disp
    solid = disp.mask & ~sliver
    lowest = ndimage.minimum_filter(np.where(solid, disp.values, np.inf), size=3, mode="nearest")
    refill = sliver & np.isfinite(lowest)
    values = np.where(refill, lowest, disp.values)
    return DisparityMap(np.where(solid | refill, values, 0.0), solid | refill)


def _axis_weights(n_out: int, n_in: int, factor: int):
    # Output pixel i sits at feature coordinate (i - (factor - 1) / 2) / factor,
    # clamped to the feature grid.
    x = np.clip((np.arange(n_out) - (factor - 1) / 2.0) / factor, 0, n_in - 1)
    x0 = np.floor(x).astype(np.int64)
    x1 = np.minimum(x0 + 1, n_in - 1)
    return x0, x1, x - x0, np.rint(x).astype(np.int64)


def upsample_disparity(disp: DisparityMap, shape: tuple[int, int], factor: int = FEATURE_SCALE) -> DisparityMap:
    """Bilinear upsampling to image resolution; values are rescaled to image pixels.

    The mask is upsampled by nearest neighbour.
    """
    h, w = shape
    y0, y1, wy, yn = _axis_weights(h, disp.values.shape[0], factor)
    x0, x1, wx, xn = _axis_weights(w, disp.values.shape[1], factor)
    rows = disp.values[y0] * (1 - wy)[:, None] + disp.values[y1] * wy[:, None]
    values = (rows[:, x0] * (1 - wx) + rows[:, x1] * wx) * factor
    mask = disp.mask[yn][:, xn]
    return DisparityMap(np.where(mask, values, 0.0), mask)


class StereoEngine:
    """Frame processor for one rig and configuration.

    The engine holds no per-sequence state; ``process_frame`` takes the
    previous ``FrameState`` and returns a new one.
    """

    def __init__(self, rig: CameraRig, cfg: EngineConfig | None = None, gru_weights: GruWeights | None = None):
        self.rig = rig
        self.cfg = cfg or EngineConfig()
        self.feature_rig = rig.scaled(FEATURE_SCALE)
        self.fcfg = feature_config(self.cfg)
        self.weights = None
        if self.cfg.backend == "gru":
            self.weights = gru_weights or load_gru_weights(self.cfg.gru_weights)
            self.weights.check()
            want = gru_input_channels(len(window_offsets(self.cfg.radius, self.cfg.step)))
            if self.weights.input_channels != want:
                raise ValueError(f"GRU weights take {self.weights.input_channels} input channels, "
                                 f"the lookup window gives {want}")
        self.hidden_channels = 1 if self.weights is None else self.weights.hidden_channels

    def _update(self, hidden, cost, context, D, fill, prior=None):
        if self.weights is None:
            return reference_update(hidden, cost, context, D, self.cfg, fill=fill, prior=prior)
        return gru_update(hidden, cost, context, D, self.weights, self.cfg)

    def _init(self, context, pose, FL, FR, index):
        return init_state(context, pose, self.cfg, self.hidden_channels, (FL, FR), index)

    def process_frame(self, state: FrameState | None, left, right, pose: Pose | None) -> FrameOutput:
        cfg = self.cfg
        for name, img in (("left", left), ("right", right)):
            if np.asarray(img).shape[:2] != self.rig.shape:
                raise ValueError(
                    f"{name} image is {np.asarray(img).shape[:2]}, rig expects {self.rig.shape}"
                )
        if cfg.mode == "full" and pose is None:
            raise ValueError("full mode needs a pose for every frame")
        timing = {}
        t0 = time.perf_counter()
        FL = extract_features(left, self.fcfg)
        FR = extract_features(right, self.fcfg)
        context = extract_context(left, self.fcfg)
        t1 = time.perf_counter()
        timing["features"] = t1 - t0

        index = 0 if state is None else state.frame_index + 1
        warped = False
        if state is None or cfg.mode == "cold":
            start = self._init(context, pose, FL, FR, index)
            D, hidden = start.disparity.values.copy(), start.hidden.copy()
        elif cfg.mode == "full":
            rel = relative_pose(state.pose, pose)
            D_hat, hidden, coverage = warp_state(state, self.feature_rig, rel, cfg.beta, with_coverage=True)
            if cfg.sliver_coverage > 0:
                D_hat = drop_slivers(D_hat, coverage, cfg.sliver_coverage)
            if not D_hat.mask.any():
                log.warning("frame %d: warp left no valid pixels, re-initialising", index)
                start = self._init(context, pose, FL, FR, index)
                D, hidden = start.disparity.values.copy(), start.hidden.copy()
            else:
                D = np.maximum(fill_holes(D_hat), cfg.min_disparity)
                warped = True
        else:
            D, hidden = state.disparity.values.copy(), state.hidden.copy()
        t2 = time.perf_counter()
        timing["warp"] = t2 - t1

        per_iter = []
        carried = warped or (cfg.mode == "fast" and state is not None)
        prior = (D.copy(), hidden[..., 0].copy()) if carried else None
        for i in range(cfg.iters):
            ti = time.perf_counter()
            cost = lookup_window(FL, FR, D, cfg.radius, cfg.step)
            # the background fill only undoes what near-priority warping adds
            hidden, delta = self._update(hidden, cost, context, D, warped and i == 0, prior)
            D = D + delta
            per_iter.append(time.perf_counter() - ti)
        t3 = time.perf_counter()
        timing["iterations"] = t3 - t2
        timing["per_iteration"] = float(np.mean(per_iter))

        feat_disp = DisparityMap(D, np.ones(D.shape, dtype=bool))
        out = upsample_disparity(feat_disp, self.rig.shape)
        carried = feat_disp
        if self.weights is None and cfg.carry_threshold > 0:
            # Only confident pixels are handed on; the rest are refilled
            # from their neighbours after the next warp.
            keep = hidden[..., 0] >= cfg.carry_threshold
            if keep.any():
                carried = DisparityMap(D, keep)
        t4 = time.perf_counter()
        timing["upsample"] = t4 - t3
        timing["total"] = t4 - t0
        new_state = FrameState(carried, hidden, pose, index)
        return FrameOutput(out, new_state, timing)

    def run(self, manifest, on_frame=None):
        """Stream every frame of ``manifest`` through ``process_frame``.

        Yields ``FrameOutput`` per frame. ``on_frame(i, output)`` is called
        before each yield when given.
        """
        if self.cfg.mode == "full" and not manifest.has_poses:
            missing = [i for i, fr in enumerate(manifest.frames) if fr.pose is None]
            raise ValueError(f"full mode needs poses; frames without one: {missing[:10]}")
        if (manifest.rig.height, manifest.rig.width) != self.rig.shape:
            raise ValueError("manifest rig does not match the engine rig")
        state = None
        for i in range(len(manifest)):
            out = self.process_frame(state, manifest.left(i), manifest.right(i), manifest.frames[i].pose)
            state = out.state
            if on_frame is not None:
                on_frame(i, out)
            yield out


def process_frame(state, left, right, pose, rig: CameraRig, cfg: EngineConfig) -> FrameOutput:
    return StereoEngine(rig, cfg).process_frame(state, left, right, pose)


def run_sequence(manifest, cfg: EngineConfig) -> list[FrameOutput]:
    return list(StereoEngine(manifest.rig, cfg).run(manifest))
