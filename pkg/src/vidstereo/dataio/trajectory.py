"""HMD-like camera trajectories: smoothed, bounded 6-DoF random walks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry import Pose


@dataclass
class TrajectoryParams:
    max_translation: float = 0.03  # metres per frame
    max_rotation_deg: float = 2.0  # degrees per frame
    drive: float = 1.0  # random-walk excitation, as a multiple of the bounds
    smoothing: float = 0.85
    reversion: float = 0.04
    rate_hz: float = 30.0


@dataclass
class Trajectory:
    timestamps: np.ndarray
    poses: list

    def __len__(self):
        return len(self.poses)


def _clip_norm(x: np.ndarray, bound: float) -> np.ndarray:
    n = np.linalg.norm(x)
    return x * (bound / n) if n > bound else x


def generate_trajectory(seed: int, n_frames: int, params: TrajectoryParams | None = None) -> Trajectory:
    """World-to-camera poses starting at the identity.

    The camera centre and orientation follow a low-pass filtered random walk
    with a weak pull back towards the start, so the camera keeps looking at
    the scene. Per-frame translation and rotation never exceed the bounds in
    ``params``.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    p = params or TrajectoryParams()
    rng = np.random.default_rng(seed)
    max_rot = np.deg2rad(p.max_rotation_deg)

    center = np.zeros(3)
    orient = Rotation.identity()  # camera-to-world
    vel = np.zeros(3)
    omega = np.zeros(3)
    poses = []
    for _ in range(n_frames):
        R_wc = orient.as_matrix().T
        poses.append(Pose(R_wc, -R_wc @ center))

        vel = p.smoothing * vel + (1 - p.smoothing) * rng.normal(size=3) * p.max_translation * p.drive
        vel = _clip_norm(vel - p.reversion * center, p.max_translation)
        omega = p.smoothing * omega + (1 - p.smoothing) * rng.normal(size=3) * max_rot * p.drive
        omega = _clip_norm(omega - p.reversion * orient.as_rotvec(), max_rot)
        center = center + vel
        orient = Rotation.from_rotvec(omega) * orient
    ts = np.arange(n_frames) / p.rate_hz
    return Trajectory(ts, poses)
