"""Rectified-stereo coordinate algebra.

Stereo coordinates are ``(u, v, d)``: pixel column, pixel row and disparity
in pixels. The right camera sits ``+b`` metres along the left camera's x-axis,
so a left pixel ``u`` is seen by the right camera at ``u - d``.

Poses are world-to-camera: ``x_cam = R @ x_world + t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Transformed points with d' at or below this are treated as being at infinity.
MIN_DISPARITY = 1e-6


@dataclass(frozen=True)
class CameraRig:
    """Rectified stereo rig with shared intrinsics."""

    f: float
    cx: float
    cy: float
    b: float
    width: int
    height: int

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not self.b > 0:
            raise ValueError(f"baseline must be positive, got {self.b}")
        if not 0 < self.cx < self.width:
            raise ValueError(f"cx={self.cx} outside (0, {self.width})")
        if not 0 < self.cy < self.height:
            raise ValueError(f"cy={self.cy} outside (0, {self.height})")

    def scaled(self, factor: int) -> "CameraRig":
        """Rig seen at ``1/factor`` resolution with block-averaged pixels.

        Pixel ``i`` at the coarse level covers fine pixels ``factor*i ..
        factor*i + factor - 1``, so pixel centres map as
        ``u_fine = factor*u + (factor - 1)/2``.
        """
        off = (factor - 1) / 2.0
        return CameraRig(
            f=self.f / factor,
            cx=(self.cx - off) / factor,
            cy=(self.cy - off) / factor,
            b=self.b,
            width=self.width // factor,
            height=self.height // factor,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class Pose:
    """Rigid world-to-camera transform."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform ``(..., 3)`` points."""
        return points @ self.rotation.T + self.translation

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation


def q_matrix(rig: CameraRig) -> np.ndarray:
    """4x4 map from homogeneous stereo ``(u, v, d, 1)`` to camera ``(X, Y, Z, W)``."""
    return np.array(
        [
            [1.0, 0.0, 0.0, -rig.cx],
            [0.0, 1.0, 0.0, -rig.cy],
            [0.0, 0.0, 0.0, rig.f],
            [0.0, 0.0, 1.0 / rig.b, 0.0],
        ]
    )


def q_inverse(rig: CameraRig) -> np.ndarray:
    # Closed form: u = X + cx*Z/f, v = Y + cy*Z/f, d = b*W, 1 = Z/f.
    return np.array(
        [
            [1.0, 0.0, rig.cx / rig.f, 0.0],
            [0.0, 1.0, rig.cy / rig.f, 0.0],
            [0.0, 0.0, 0.0, rig.b],
            [0.0, 0.0, 1.0 / rig.f, 0.0],
        ]
    )


def relative_pose(prev: Pose, cur: Pose) -> Pose:
    """Transform taking previous-camera coordinates to current-camera coordinates."""
    return cur @ prev.inverse()


def temporal_transform(rig: CameraRig, rel: Pose) -> np.ndarray:
    """Stereo-to-stereo transform for a relative camera motion.

    ``q_matrix`` lifts stereo points into the previous camera frame, the rigid
    motion moves them into the current camera frame and ``q_inverse``
    projects them back to stereo coordinates.
    """
    return q_inverse(rig) @ rel.matrix() @ q_matrix(rig)


def apply_transform(T: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply a stereo transform to ``(..., 3)`` points ``(u, v, d)``.

    Returns the transformed points and a boolean validity array. Points that
    land behind the camera or at infinity (``d' <= MIN_DISPARITY``) are
    flagged invalid; their coordinates are NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    h = points @ T[:, :3].T + T[:, 3]
    w = h[..., 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = h[..., :3] / w[..., None]
    valid = (w > 0) & (out[..., 2] > MIN_DISPARITY) & np.isfinite(out).all(axis=-1)
    valid &= points[..., 2] > 0
    out[~valid] = np.nan
    return out, valid


def apply_transform_point(T: np.ndarray, u: float, v: float, d: float):
    """Scalar convenience wrapper; returns ``(u', v', d')`` or ``None`` if invalid."""
    out, valid = apply_transform(T, np.array([u, v, d], dtype=np.float64))
    if not valid:
        return None
    return tuple(float(x) for x in out)


def depth_from_disparity(rig: CameraRig, d):
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("disparity must be positive")
    z = rig.f * rig.b / d
    return float(z) if z.ndim == 0 else z


def disparity_from_depth(rig: CameraRig, z):
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth must be positive")
    d = rig.f * rig.b / z
    return float(d) if d.ndim == 0 else d


def unproject(rig: CameraRig, points: np.ndarray) -> np.ndarray:
    """Stereo ``(..., 3)`` points to camera-frame 3-D points."""
    points = np.asarray(points, dtype=np.float64)
    u, v, d = points[..., 0], points[..., 1], points[..., 2]
    z = rig.f * rig.b / d
    return np.stack([(u - rig.cx) * z / rig.f, (v - rig.cy) * z / rig.f, z], axis=-1)


def project(rig: CameraRig, xyz: np.ndarray) -> np.ndarray:
    """Camera-frame 3-D points to stereo ``(u, v, d)``."""
    xyz = np.asarray(xyz, dtype=np.float64)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    return np.stack(
        [rig.f * x / z + rig.cx, rig.f * y / z + rig.cy, rig.f * rig.b / z], axis=-1
    )


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle_rad) * K + (1 - np.cos(angle_rad)) * (K @ K)
