"""Procedural scenes made of textured rectangles and spheres."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import rotation_about_axis


@dataclass(frozen=True)
class Texture:
    """Checkerboard blended with band-limited value noise.

    Frequencies are in cycles per metre of surface; ``octaves`` bounds the
    highest frequency at ``noise_freq * 2**(octaves-1)``.
    """

    checker_period: float = 0.1
    checker_amp: float = 0.3
    noise_freq: float = 8.0
    octaves: int = 3
    albedo: tuple[float, float] = (0.15, 0.9)
    seed: int = 0

    def _perm(self):
        rng = np.random.default_rng(self.seed)
        return rng.permutation(256), rng.random(256)

    def value_noise(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        perm, vals = self._perm()

        def lattice(ix, iy):
            return vals[perm[(perm[ix & 255] + iy) & 255]]

        total = np.zeros_like(s)
        norm = 0.0
        for o in range(self.octaves):
            freq = self.noise_freq * 2.0**o
            amp = 0.5**o
            x = s * freq + 17.3 * o
            y = t * freq + 31.7 * o
            x0 = np.floor(x)
            y0 = np.floor(y)
            fx = x - x0
            fy = y - y0
            fx = fx * fx * (3 - 2 * fx)
            fy = fy * fy * (3 - 2 * fy)
            ix = x0.astype(np.int64)
            iy = y0.astype(np.int64)
            a = lattice(ix, iy)
            b = lattice(ix + 1, iy)
            c = lattice(ix, iy + 1)
            d = lattice(ix + 1, iy + 1)
            total += amp * ((a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy)
            norm += amp
        return total / norm

    def __call__(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        value = self.value_noise(s, t) if self.octaves > 0 else np.full_like(s, 0.5)
        if self.checker_amp > 0 and self.checker_period > 0:
            chk = (np.floor(s / self.checker_period) + np.floor(t / self.checker_period)) % 2
            value = (1 - self.checker_amp) * value + self.checker_amp * chk
        lo, hi = self.albedo
        return lo + (hi - lo) * value


@dataclass(frozen=True)
class Plane:
    """Rectangle centred at ``center``; rotation columns are (s-axis, t-axis, normal)."""

    center: np.ndarray
    rotation: np.ndarray
    half_extent: tuple[float, float]
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origin, dirs):
        n = self.rotation[:, 2]
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((self.center - origin) @ n) / denom
        t = np.where(np.abs(denom) > 1e-12, t, np.inf)
        hit = origin + t[:, None] * dirs
        local = (hit - self.center) @ self.rotation[:, :2]
        inside = (np.abs(local[:, 0]) <= self.half_extent[0]) & (np.abs(local[:, 1]) <= self.half_extent[1])
        return np.where(inside & (t > 0), t, np.inf)

    def shade_inputs(self, points):
        local = (points - self.center) @ self.rotation[:, :2]
        normals = np.broadcast_to(self.rotation[:, 2], points.shape)
        return local[:, 0], local[:, 1], normals


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origin, dirs):
        oc = origin - self.center
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * dirs @ oc
        c = oc @ oc - self.radius**2
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - sq) / (2 * a)
        t1 = (-b + sq) / (2 * a)
        t = np.where(t0 > 0, t0, t1)
        return np.where((disc >= 0) & (t > 0), t, np.inf)

    def shade_inputs(self, points):
        rel = points - self.center
        normals = rel / self.radius
        lon = np.arctan2(rel[:, 0], rel[:, 2])
        lat = np.arcsin(np.clip(rel[:, 1] / self.radius, -1, 1))
        return self.radius * lon, self.radius * lat, normals


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    light_dir: np.ndarray = field(default_factory=lambda: np.array([0.3, -0.6, -0.75]))
    ambient: float = 0.45
    background: float = 0.0


@dataclass
class SceneSpec:
    """Bounds for procedural scenes.

    ``fronto`` lists explicit fronto-parallel rectangles as
    ``(z, x, y, half_w, half_h)`` in the initial camera frame. When it is
    non-empty no random primitives or backdrop are added.
    """

    n_planes: int = 4
    n_spheres: int = 3
    depth_range: tuple[float, float] = (0.6, 1.3)
    extent_range: tuple[float, float] = (0.08, 0.25)
    radius_range: tuple[float, float] = (0.06, 0.15)
    max_tilt_deg: float = 35.0
    backdrop_z: float | None = 1.5
    lateral_fraction: float = 0.4
    fronto: tuple = ()
    checker_period_range: tuple[float, float] = (0.04, 0.08)
    checker_amp: float = 0.15
    noise_freq_range: tuple[float, float] = (10.0, 20.0)
    octaves: int = 3
    albedo_range: tuple[float, float] = (0.1, 0.9)


def _random_texture(rng, spec: SceneSpec) -> Texture:
    lo, hi = spec.albedo_range
    a = rng.uniform(lo, lo + 0.25 * (hi - lo))
    b = rng.uniform(hi - 0.25 * (hi - lo), hi)
    return Texture(
        checker_period=float(rng.uniform(*spec.checker_period_range)),
        checker_amp=spec.checker_amp,
        noise_freq=float(rng.uniform(*spec.noise_freq_range)),
        octaves=spec.octaves,
        albedo=(float(a), float(b)),
        seed=int(rng.integers(0, 2**31 - 1)),
    )


def generate_scene(seed: int, spec: SceneSpec | None = None) -> Scene:
    """Deterministic scene from ``seed``; coordinates are the initial camera frame."""
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    prims = []
    if spec.fronto:
        for z, x, y, hw, hh in spec.fronto:
            prims.append(Plane(np.array([x, y, z], float), np.eye(3), (hw, hh),
                               _random_texture(rng, spec)))
        return Scene(tuple(prims))

    if spec.backdrop_z is not None:
        z = spec.backdrop_z
        prims.append(Plane(np.array([0.0, 0.0, z]), np.eye(3), (4.0 * z, 3.0 * z),
                           _random_texture(rng, spec)))
    for _ in range(spec.n_planes):
        z = rng.uniform(*spec.depth_range)
        x, y = rng.uniform(-1, 1, 2) * spec.lateral_fraction * z
        axis = rng.normal(size=3)
        axis[2] = 0.0
        tilt = np.deg2rad(rng.uniform(-spec.max_tilt_deg, spec.max_tilt_deg))
        R = rotation_about_axis(axis, tilt) @ rotation_about_axis([0, 0, 1], rng.uniform(0, np.pi))
        hw, hh = rng.uniform(*spec.extent_range, 2)
        prims.append(Plane(np.array([x, y, z]), R, (hw, hh), _random_texture(rng, spec)))
    for _ in range(spec.n_spheres):
        z = rng.uniform(*spec.depth_range)
        x, y = rng.uniform(-1, 1, 2) * spec.lateral_fraction * z
        r = rng.uniform(*spec.radius_range)
        prims.append(Sphere(np.array([x, y, max(z, r + 0.25)]), float(r), _random_texture(rng, spec)))
    return Scene(tuple(prims))


def two_plane_spec(near_z: float = 0.9, far_z: float = 1.5) -> SceneSpec:
    """A near rectangle covering the left part of the view over a large far wall."""
    return SceneSpec(fronto=((far_z, 0.0, 0.0, 4.0 * far_z, 3.0 * far_z),
                             (near_z, -0.25 * near_z, 0.0, 0.3 * near_z, 0.6 * near_z)))
