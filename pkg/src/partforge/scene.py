"""Analytic ray-cast renderer for synthetic test scenes.

The mock backends are all views of one ground-truth scene made of spheres and
boxes. Rendering is exact ray-primitive intersection with flat per-primitive
colors and nearest-hit compositing; no lighting, no antialiasing by default
(optional 2x2 supersampling), so renders are bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cameras import CameraPose, Cube, ray_grid
from .errors import BadRange
from .images import ImageArtifact

_EPS = 1e-9


@dataclass(frozen=True)
class Primitive:
    """A sphere (size = radius) or axis-aligned box (size = full extents).

    ``color2`` optionally splits the primitive into two flat colors by the
    sign of (hit - center) . split_axis, which gives the tests a two-tone
    surface with known geometry.
    """

    shape: str
    center: tuple[float, float, float]
    size: float | tuple[float, float, float]
    color: tuple[int, int, int]
    part_id: str
    color2: tuple[int, int, int] | None = None
    split_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise BadRange(f"unknown primitive shape {self.shape!r}")
        if self.shape == "sphere":
            if not np.isscalar(self.size) or self.size <= 0:
                raise BadRange("sphere size must be a positive radius")
        else:
            ext = np.asarray(self.size, dtype=float)
            if ext.shape != (3,) or np.any(ext <= 0):
                raise BadRange("box size must be three positive extents")

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        if self.shape == "sphere":
            half = np.full(3, float(self.size))
        else:
            half = np.asarray(self.size, dtype=float) / 2.0
        return c - half, c + half

    def to_dict(self) -> dict:
        d = {
            "shape": self.shape,
            "center": list(self.center),
            "size": self.size if np.isscalar(self.size) else list(self.size),
            "color": list(self.color),
            "part_id": self.part_id,
        }
        if self.color2 is not None:
            d["color2"] = list(self.color2)
            d["split_axis"] = list(self.split_axis)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        size = d["size"]
        return cls(
            shape=str(d["shape"]),
            center=tuple(float(x) for x in d["center"]),
            size=float(size) if np.isscalar(size) else tuple(float(x) for x in size),
            color=tuple(int(x) for x in d["color"]),
            part_id=str(d["part_id"]),
            color2=tuple(int(x) for x in d["color2"]) if d.get("color2") else None,
            split_axis=tuple(float(x) for x in d.get("split_axis", (0, 0, 1))),
        )


@dataclass(frozen=True)
class SyntheticScene:
    primitives: tuple[Primitive, ...]
    background: tuple[int, int, int, int] = (0, 0, 0, 0)

    @property
    def part_ids(self) -> list[str]:
        seen: list[str] = []
        for p in self.primitives:
            if p.part_id not in seen:
                seen.append(p.part_id)
        return seen

    def restrict(self, part_id: str) -> "SyntheticScene":
        kept = tuple(p for p in self.primitives if p.part_id == part_id)
        if not kept:
            raise BadRange(f"scene has no part {part_id!r}")
        return replace(self, primitives=kept)

    def fits_in(self, bounds: Cube) -> bool:
        for p in self.primitives:
            lo, hi = p.aabb()
            if np.any(lo < bounds.lo) or np.any(hi > bounds.hi):
                return False
        return True

    def validate(self, bounds: Cube) -> None:
        """Ground-truth scenes for the mocks: non-empty and inside the bounds."""
        if not self.primitives:
            raise BadRange("a ground-truth scene needs at least one primitive")
        if not self.fits_in(bounds):
            raise BadRange("scene primitives must fit inside the reconstruction bounds")

    def to_dict(self) -> dict:
        return {
            "primitives": [p.to_dict() for p in self.primitives],
            "background": list(self.background),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScene":
        return cls(
            primitives=tuple(Primitive.from_dict(p) for p in d["primitives"]),
            background=tuple(int(x) for x in d.get("background", (0, 0, 0, 0))),
        )


def demo_scene() -> SyntheticScene:
    """Two-part scene used by the CLI demo: a ball resting on a slab."""
    return SyntheticScene(
        primitives=(
            Primitive("sphere", (0.0, 0.0, 0.55), 0.45, (220, 60, 40), "ball"),
            Primitive("box", (0.0, 0.0, -0.25), (1.1, 1.1, 0.7), (50, 110, 210), "base"),
        )
    )


def _sphere_hits(origin, dirs, prim) -> np.ndarray:
    """Nearest positive hit distance per ray, inf where missed."""
    oc = origin - np.asarray(prim.center)
    b = dirs @ oc
    c = oc @ oc - float(prim.size) ** 2
    disc = b * b - c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t_near = -b - sq
    t_far = -b + sq
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where(hit & (t > _EPS), t, np.inf)


def _box_hits(origin, dirs, prim) -> np.ndarray:
    lo, hi = prim.aabb()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    # rays parallel to a slab: inside -> (-inf, +inf), outside -> no overlap
    t1 = np.where(np.isnan(t1), np.where(origin >= lo, -np.inf, np.inf), t1)
    t2 = np.where(np.isnan(t2), np.where(origin <= hi, np.inf, -np.inf), t2)
    t_near = np.max(np.minimum(t1, t2), axis=-1)
    t_far = np.min(np.maximum(t1, t2), axis=-1)
    hit = (t_near <= t_far) & (t_far > _EPS)
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where(hit & (t > _EPS), t, np.inf)


def _shade(scene: SyntheticScene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Flat RGBA colors for a (..., 3) bundle of unit rays from one origin."""
    flat = dirs.reshape(-1, 3)
    best_t = np.full(len(flat), np.inf)
    best_idx = np.full(len(flat), -1, dtype=np.int64)
    for k, prim in enumerate(scene.primitives):
        t = _sphere_hits(origin, flat, prim) if prim.shape == "sphere" else _box_hits(origin, flat, prim)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_idx = np.where(closer, k, best_idx)
    out = np.empty((len(flat), 4), np.float64)
    out[:] = scene.background
    for k, prim in enumerate(scene.primitives):
        sel = best_idx == k
        if not np.any(sel):
            continue
        out[sel, :3] = prim.color
        out[sel, 3] = 255
        if prim.color2 is not None:
            hits = origin + flat[sel] * best_t[sel, None]
            side = (hits - np.asarray(prim.center)) @ np.asarray(prim.split_axis)
            two = np.flatnonzero(sel)[side < 0]
            out[two, :3] = prim.color2
    return out.reshape(dirs.shape[:-1] + (4,))


def render_scene(
    scene: SyntheticScene,
    pose: CameraPose,
    image_size: int | None = None,
    supersample: int = 1,
) -> ImageArtifact:
    """Render the scene from a pose; alpha is 255 exactly where a ray hits.

    ``supersample`` = s averages an s x s subpixel grid (s=1 means pixel
    centers only, the default; averaging blends colors at edges).
    """
    if image_size is not None and image_size != pose.image_size:
        pose = replace(pose, image_size=image_size)
    if supersample < 1:
        raise BadRange("supersample must be >= 1")
    if supersample == 1:
        rgba = _shade(scene, pose.position, ray_grid(pose))
        return ImageArtifact.from_array(np.round(rgba).astype(np.uint8))
    n, s = pose.image_size, supersample
    fine = replace(pose, image_size=n * s)
    rgba = _shade(scene, fine.position, ray_grid(fine))
    rgba = rgba.reshape(n, s, n, s, 4).mean(axis=(1, 3))
    return ImageArtifact.from_array(np.round(rgba).astype(np.uint8))


def render_views(scene: SyntheticScene, poses, supersample: int = 1) -> list[ImageArtifact]:
    return [render_scene(scene, p, supersample=supersample) for p in poses]
