"""File formats: PFM disparity, pose text, PGM/PNG images.

Pose files hold one frame per line, ``timestamp tx ty tz qx qy qz qw``, as
world-to-camera transforms with a scalar-last unit quaternion. Lines starting
with ``#`` are comments.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry import Pose

POSE_HEADER = "# timestamp tx ty tz qx qy qz qw (world-to-camera, scalar-last quaternion)"
QUAT_NORM_TOL = 1e-3


class FormatError(ValueError):
    """A file exists but its contents are malformed."""


def write_pfm(path, disparity) -> None:
    """Little-endian grayscale PFM, rows stored bottom to top. NaN/negative become 0."""
    data = np.asarray(disparity, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("PFM writer expects a 2-D array")
    data = np.where(np.isfinite(data) & (data > 0), data, 0.0).astype("<f4")
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"Pf":
            raise FormatError(f"{path}: line 1: expected 'Pf', got {magic!r}")
        dims = f.readline().split()
        try:
            w, h = int(dims[0]), int(dims[1])
            scale = float(f.readline().strip())
        except (IndexError, ValueError) as exc:
            raise FormatError(f"{path}: malformed PFM header") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        raw = f.read()
    if len(raw) != w * h * 4:
        raise FormatError(f"{path}: expected {w * h * 4} data bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype=dtype).reshape(h, w)[::-1]
    return data.astype(np.float32)


def write_poses(path, timestamps, poses) -> None:
    lines = [POSE_HEADER]
    for ts, pose in zip(timestamps, poses):
        q = Rotation.from_matrix(pose.rotation).as_quat()  # x, y, z, w
        t = pose.translation
        vals = [repr(float(ts))] + [repr(float(x)) for x in t] + [repr(float(x)) for x in q]
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_pose_line(line: str, lineno: int = 1, source: str = "<pose>"):
    parts = line.split()
    if len(parts) != 8:
        raise FormatError(f"{source}: line {lineno}: expected 8 fields, got {len(parts)}")
    try:
        vals = [float(x) for x in parts]
    except ValueError as exc:
        raise FormatError(f"{source}: line {lineno}: non-numeric field") from exc
    q = np.array(vals[4:])
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise FormatError(f"{source}: line {lineno}: quaternion norm {norm:.6f} is not 1")
    R = Rotation.from_quat(q / norm).as_matrix()
    return vals[0], Pose(R, vals[1:4])


def read_poses(path):
    """Returns ``(timestamps, poses)``."""
    stamps, poses = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        ts, pose = parse_pose_line(line, lineno, str(path))
        stamps.append(ts)
        poses.append(pose)
    return np.array(stamps), poses


def write_image(path, image) -> None:
    """8-bit grayscale PGM (binary) or PNG depending on the suffix."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(img, mode="L").save(path)
        return
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


_PGM_HEADER = re.compile(rb"P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


def read_image(path) -> np.ndarray:
    """Read an 8-bit grayscale image as uint8; RGB PNGs are luma-converted."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        with Image.open(path) as im:
            return np.array(im.convert("L"))
    raw = path.read_bytes()
    m = _PGM_HEADER.match(raw)
    if not m:
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in m.groups())
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    data = raw[m.end() : m.end() + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: truncated PGM")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()
