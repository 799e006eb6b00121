"""Raycast stereo renderer with analytic disparity ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CameraRig, Pose
from .scene import Scene


@dataclass
class StereoFrame:
    """Rendered pair in [0, 1], GT disparity (0 where no surface) and occlusion mask.

    ``occluded`` marks left pixels with a surface that the right camera cannot
    see, either because another surface is in the way or because the match
    falls outside the right image.
    """

    left: np.ndarray
    right: np.ndarray
    disparity: np.ndarray
    occluded: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.disparity > 0


def pixel_rays(rig: CameraRig, pose: Pose):
    """World-frame ray origin and per-pixel directions whose camera z-component is 1."""
    vv, uu = np.mgrid[0 : rig.height, 0 : rig.width].astype(np.float64)
    cam = np.stack([(uu - rig.cx) / rig.f, (vv - rig.cy) / rig.f, np.ones_like(uu)], axis=-1)
    dirs = cam.reshape(-1, 3) @ pose.rotation  # R^T applied row-wise
    return pose.center, dirs


def raycast(scene: Scene, origin, dirs):
    """Nearest hit parameter and primitive index per ray (``inf`` / -1 for misses)."""
    best = np.full(len(dirs), np.inf)
    idx = np.full(len(dirs), -1)
    for i, prim in enumerate(scene.primitives):
        t = prim.intersect(origin, dirs)
        closer = t < best
        best[closer] = t[closer]
        idx[closer] = i
    return best, idx


def shade(scene: Scene, origin, dirs, t, idx) -> np.ndarray:
    light = scene.light_dir / np.linalg.norm(scene.light_dir)
    out = np.full(len(dirs), float(scene.background))
    for i, prim in enumerate(scene.primitives):
        sel = np.flatnonzero(idx == i)
        if sel.size == 0:
            continue
        pts = origin + t[sel, None] * dirs[sel]
        s, tt, normals = prim.shade_inputs(pts)
        lambert = np.abs(normals @ light)
        out[sel] = prim.texture(s, tt) * (scene.ambient + (1 - scene.ambient) * lambert)
    return out


def render_view(scene: Scene, rig: CameraRig, pose: Pose):
    origin, dirs = pixel_rays(rig, pose)
    t, idx = raycast(scene, origin, dirs)
    img = shade(scene, origin, dirs, t, idx)
    return img.reshape(rig.shape), t.reshape(rig.shape), origin, dirs


def right_pose(rig: CameraRig, left: Pose) -> Pose:
    """World-to-camera pose of the right camera, ``b`` metres along the left x-axis."""
    return Pose(left.rotation, left.translation - np.array([rig.b, 0.0, 0.0]))


def render_frame(scene: Scene, rig: CameraRig, pose: Pose) -> StereoFrame:
    """Render a rectified pair from the left-camera pose ``pose``."""
    left, depth, origin, dirs = render_view(scene, rig, pose)
    right, _, _, _ = render_view(scene, rig, right_pose(rig, pose))

    hit = np.isfinite(depth)
    disparity = np.zeros(rig.shape)
    disparity[hit] = rig.f * rig.b / depth[hit]

    # Second raycast from the right camera centre towards each left surface point.
    occluded = np.zeros(rig.shape, dtype=bool)
    flat_hit = np.flatnonzero(hit.ravel())
    if flat_hit.size:
        pts = origin + depth.ravel()[flat_hit, None] * dirs[flat_hit]
        rc = right_pose(rig, pose).center
        to_pt = pts - rc
        t_r, _ = raycast(scene, rc, to_pt)
        blocked = t_r < 1.0 - 1e-6
        u = np.arange(rig.width)[None, :].repeat(rig.height, 0).ravel()[flat_hit]
        xr = u - disparity.ravel()[flat_hit]
        outside = (xr < 0) | (xr > rig.width - 1)
        occ = occluded.ravel()
        occ[flat_hit] = blocked | outside
        occluded = occ.reshape(rig.shape)
    return StereoFrame(left, right, disparity, occluded)
