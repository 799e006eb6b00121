"""Sequence manifests, synthetic sequence generation and ablation corruptions.

Manifest text format::

    # vidstereo manifest v1
    rig f=256.0 cx=160.0 cy=120.0 b=0.1 width=320 height=240
    poses poses.txt
    left/000000.pgm right/000000.pgm gt/000000.pfm occ/000000.pgm
    ...

One frame per line, paths relative to the manifest's directory, ``-`` for a
missing ground truth or occlusion mask. The ``poses`` line is optional; when
present the pose file must hold one pose per frame, in order.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..geometry import CameraRig, Pose, rotation_about_axis
from .formats import FormatError, read_image, read_pfm, read_poses, write_image, write_pfm, write_poses
from .render import render_frame
from .scene import SceneSpec, generate_scene
from .trajectory import TrajectoryParams, generate_trajectory

MANIFEST_HEADER = "# vidstereo manifest v1"
RIG_FIELDS = ("f", "cx", "cy", "b", "width", "height")


@dataclass(frozen=True)
class FrameRecord:
    """One stereo frame. Image fields hold either a path (relative to the
    manifest root) or an in-memory array."""

    left: Any
    right: Any
    gt: Any = None
    occluded: Any = None
    pose: Pose | None = None
    timestamp: float = 0.0


@dataclass
class SequenceManifest:
    rig: CameraRig
    frames: list
    root: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.frames)

    @property
    def has_poses(self) -> bool:
        return all(fr.pose is not None for fr in self.frames)

    def _load(self, i: int, item, kind: str, reader):
        if item is None:
            return None
        if isinstance(item, np.ndarray):
            return item
        path = self.root / item
        if not path.exists():
            raise FileNotFoundError(f"frame {i}: missing {kind} file {path}")
        return reader(path)

    def left(self, i: int):
        return self._load(i, self.frames[i].left, "left image", read_image)

    def right(self, i: int):
        return self._load(i, self.frames[i].right, "right image", read_image)

    def gt(self, i: int):
        return self._load(i, self.frames[i].gt, "ground-truth", read_pfm)

    def occluded(self, i: int):
        occ = self._load(i, self.frames[i].occluded, "occlusion", read_image)
        return None if occ is None else np.asarray(occ) > 0


def default_rig(width: int = 320, height: int = 240, baseline: float = 0.1) -> CameraRig:
    return CameraRig(f=0.8 * width, cx=width / 2.0, cy=height / 2.0, b=baseline,
                     width=width, height=height)


def quantize(image) -> np.ndarray:
    return np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def generate_sequence(seed: int, n_frames: int = 30, rig: CameraRig | None = None,
                      scene_spec: SceneSpec | None = None,
                      traj_params: TrajectoryParams | None = None,
                      noise_sigma: float = 0.004) -> SequenceManifest:
    """Render an in-memory sequence: 8-bit images, GT disparity, occlusion, poses."""
    rig = rig or default_rig()
    scene = generate_scene(seed, scene_spec)
    traj = generate_trajectory(seed + 1, n_frames, traj_params)
    rng = np.random.default_rng(seed + 2)
    frames = []
    for ts, pose in zip(traj.timestamps, traj.poses):
        fr = render_frame(scene, rig, pose)
        left = fr.left + rng.normal(0, noise_sigma, fr.left.shape) if noise_sigma else fr.left
        right = fr.right + rng.normal(0, noise_sigma, fr.right.shape) if noise_sigma else fr.right
        frames.append(FrameRecord(quantize(left), quantize(right),
                                  fr.disparity.astype(np.float32), fr.occluded,
                                  pose, float(ts)))
    return SequenceManifest(rig, frames)


def standard_sequence(seed: int = 42, n_frames: int = 30, width: int = 320, height: int = 240,
                      **kwargs) -> SequenceManifest:
    """The default benchmark sequence: procedural clutter in front of a backdrop."""
    return generate_sequence(seed, n_frames, default_rig(width, height), **kwargs)


def frame_skip(manifest: SequenceManifest, k: int) -> SequenceManifest:
    """Keep frames ``0, k, 2k, ...``."""
    if k < 1:
        raise ValueError("skip factor must be >= 1")
    return dataclasses.replace(manifest, frames=list(manifest.frames[::k]))


def perturb_pose(pose: Pose, level: int, rng: np.random.Generator) -> Pose:
    """Rotate about a uniform random axis by ``U[0, 0.3*level]`` degrees and shift
    each translation component by ``U[-1, 1] * level`` millimetres."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0.0, 0.3 * level))
    dt = rng.uniform(-0.001 * level, 0.001 * level, size=3)
    R = rotation_about_axis(axis, angle)
    return Pose(R @ pose.rotation, pose.translation + dt)


def pose_noise(manifest: SequenceManifest, level: int, seed: int) -> SequenceManifest:
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return dataclasses.replace(manifest, frames=list(manifest.frames))
    rng = np.random.default_rng(seed)
    frames = []
    for fr in manifest.frames:
        if fr.pose is None:
            raise ValueError("pose noise needs a pose on every frame")
        frames.append(dataclasses.replace(fr, pose=perturb_pose(fr.pose, level, rng)))
    return dataclasses.replace(manifest, frames=frames)


def _rig_line(rig: CameraRig) -> str:
    return "rig " + " ".join(f"{k}={getattr(rig, k)!r}" for k in RIG_FIELDS)


def write_manifest(path, manifest: SequenceManifest, pose_file: str = "poses.txt") -> None:
    """Write the manifest text (and its pose file). All frame fields must be paths."""
    path = Path(path)
    lines = [MANIFEST_HEADER, _rig_line(manifest.rig)]
    if manifest.has_poses:
        write_poses(path.parent / pose_file, [fr.timestamp for fr in manifest.frames],
                    [fr.pose for fr in manifest.frames])
        lines.append(f"poses {pose_file}")
    for fr in manifest.frames:
        cols = [fr.left, fr.right, fr.gt or "-", fr.occluded or "-"]
        lines.append(" ".join(str(c) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path, check_files: bool = True) -> SequenceManifest:
    path = Path(path)
    root = path.parent
    rig = None
    pose_file = None
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "rig":
            try:
                kv = dict(p.split("=", 1) for p in parts[1:])
                rig = CameraRig(*(float(kv[k]) for k in RIG_FIELDS[:4]),
                                int(kv["width"]), int(kv["height"]))
            except (KeyError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: bad rig line: {exc}") from exc
        elif parts[0] == "poses":
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 'poses <file>'")
            pose_file = parts[1]
        else:
            if len(parts) not in (2, 3, 4):
                raise FormatError(f"{path}: line {lineno}: expected 2-4 paths, got {len(parts)}")
            parts = parts + ["-"] * (4 - len(parts))
            rows.append([None if p == "-" else p for p in parts])
    if rig is None:
        raise FormatError(f"{path}: no rig line")

    poses = [None] * len(rows)
    stamps = [float(i) for i in range(len(rows))]
    if pose_file is not None:
        ts, plist = read_poses(root / pose_file)
        if len(plist) != len(rows):
            raise FormatError(f"{path}: {len(rows)} frames but {len(plist)} poses")
        poses, stamps = plist, [float(t) for t in ts]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise FormatError(f"{path}: pose timestamps are not strictly increasing")

    frames = [FrameRecord(l, r, g, o, p, t) for (l, r, g, o), p, t in zip(rows, poses, stamps)]
    manifest = SequenceManifest(rig, frames, root)
    if check_files:
        missing = [
            f"frame {i}: {p}"
            for i, fr in enumerate(frames)
            for p in (fr.left, fr.right, fr.gt, fr.occluded)
            if p is not None and not (root / p).exists()
        ]
        if missing:
            raise FileNotFoundError("missing files: " + "; ".join(missing))
    return manifest


def write_dataset(manifest: SequenceManifest, out_dir, image_ext: str = ".pgm") -> Path:
    """Write an in-memory sequence to ``out_dir`` and return the manifest path."""
    out = Path(out_dir)
    for sub in ("left", "right", "gt", "occ"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    frames = []
    for i in range(len(manifest)):
        name = f"{i:06d}"
        left = f"left/{name}{image_ext}"
        right = f"right/{name}{image_ext}"
        write_image(out / left, manifest.left(i))
        write_image(out / right, manifest.right(i))
        gt = occ = None
        g = manifest.gt(i)
        if g is not None:
            gt = f"gt/{name}.pfm"
            write_pfm(out / gt, g)
        o = manifest.occluded(i)
        if o is not None:
            occ = f"occ/{name}{image_ext}"
            write_image(out / occ, o.astype(np.uint8) * 255)
        fr = manifest.frames[i]
        frames.append(FrameRecord(left, right, gt, occ, fr.pose, fr.timestamp))
    path = out / "manifest.txt"
    write_manifest(path, SequenceManifest(manifest.rig, frames, out))
    return path
