"""Fixed six-viewpoint camera rig, pinhole projection, and ray generation.

Coordinate convention (used everywhere in this package):
  * world frame is right-handed with +z up,
  * every camera looks at the world origin,
  * camera frame axes are (right, down, forward); depth is the forward
    component, so depth > 0 means "in front of the camera",
  * image coordinates are continuous pixels with the origin at the top-left
    corner; pixel (ix, iy) covers [ix, ix+1) x [iy, iy+1) and its center is
    (ix + 0.5, iy + 0.5); u grows to the right, v grows downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadRange, BehindCamera, OutOfBounds
from .tiles import TilingLayout

RIG_AZIMUTHS = (30.0, 90.0, 150.0, 210.0, 270.0, 330.0)
RIG_ELEVATIONS = (30.0, -20.0, 30.0, -20.0, 30.0, -20.0)


@dataclass(frozen=True)
class CameraPose:
    """A look-at-origin pinhole camera on a sphere around the scene."""

    azimuth: float      # degrees around +z, measured from +x
    elevation: float    # degrees above the xy-plane
    radius: float       # distance from the world origin
    fov_y: float        # vertical field of view, degrees
    image_size: int     # square images only

    def __post_init__(self):
        if self.radius <= 0:
            raise BadRange("camera radius must be > 0")
        if not 0 < self.fov_y < 180:
            raise BadRange("fov_y must be in (0, 180) degrees")
        if self.image_size < 1:
            raise BadRange("image_size must be >= 1")

    @cached_property
    def position(self) -> np.ndarray:
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return self.radius * np.array(
            [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)]
        )

    @cached_property
    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are (right, down, forward)."""
        forward = -self.position / np.linalg.norm(self.position)
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
        n = np.linalg.norm(right)
        if n < 1e-12:  # looking straight down/up the z axis
            right = np.array([0.0, 1.0, 0.0])
        else:
            right = right / n
        down = np.cross(forward, right)
        return np.stack([right, down, forward])

    @cached_property
    def focal_px(self) -> float:
        return (self.image_size / 2.0) / math.tan(math.radians(self.fov_y) / 2.0)

    @property
    def center_px(self) -> float:
        return self.image_size / 2.0

    def to_dict(self) -> dict:
        return {
            "azimuth": self.azimuth,
            "elevation": self.elevation,
            "radius": self.radius,
            "fov_y": self.fov_y,
            "image_size": self.image_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(
            azimuth=float(d["azimuth"]),
            elevation=float(d["elevation"]),
            radius=float(d["radius"]),
            fov_y=float(d["fov_y"]),
            image_size=int(d["image_size"]),
        )


def project(pose: CameraPose, point) -> tuple[float, float, float]:
    """Project one world point; returns (u, v, depth) or raises BehindCamera."""
    p = np.asarray(point, dtype=float)
    q = p - pose.position
    r = pose.rotation
    x = r[0, 0] * q[0] + r[0, 1] * q[1] + r[0, 2] * q[2]
    y = r[1, 0] * q[0] + r[1, 1] * q[1] + r[1, 2] * q[2]
    z = r[2, 0] * q[0] + r[2, 1] * q[1] + r[2, 2] * q[2]
    if z <= 1e-12:
        raise BehindCamera(f"point {point} has depth {z}")
    u = pose.center_px + pose.focal_px * x / z
    v = pose.center_px + pose.focal_px * y / z
    return float(u), float(v), float(z)


def project_points(pose: CameraPose, points: np.ndarray):
    """Vectorized projection of an (M, 3) array.

    Returns (u, v, depth) arrays; no behind-camera check (callers filter on
    depth). The per-element arithmetic is the exact expression used by
    :func:`project` so scalar and vectorized paths agree bitwise.
    """
    pts = np.asarray(points, dtype=np.float64)
    c = pose.position
    r = pose.rotation
    qx = pts[:, 0] - c[0]
    qy = pts[:, 1] - c[1]
    qz = pts[:, 2] - c[2]
    x = r[0, 0] * qx + r[0, 1] * qy + r[0, 2] * qz
    y = r[1, 0] * qx + r[1, 1] * qy + r[1, 2] * qz
    z = r[2, 0] * qx + r[2, 1] * qy + r[2, 2] * qz
    with np.errstate(divide="ignore", invalid="ignore"):
        u = pose.center_px + pose.focal_px * x / z
        v = pose.center_px + pose.focal_px * y / z
    return u, v, z


def unproject(pose: CameraPose, u: float, v: float, depth: float) -> np.ndarray:
    """Inverse of :func:`project` for a given camera-frame depth."""
    if depth <= 0:
        raise BadRange("depth must be > 0")
    x = (u - pose.center_px) / pose.focal_px * depth
    y = (v - pose.center_px) / pose.focal_px * depth
    r = pose.rotation
    return pose.position + x * r[0] + y * r[1] + depth * r[2]


def pixel_ray(pose: CameraPose, ix: int, iy: int) -> tuple[np.ndarray, np.ndarray]:
    """Ray through the center of pixel (ix, iy): (origin, unit direction)."""
    if not (0 <= ix < pose.image_size and 0 <= iy < pose.image_size):
        raise OutOfBounds(f"pixel ({ix}, {iy}) outside {pose.image_size}x{pose.image_size}")
    target = unproject(pose, ix + 0.5, iy + 0.5, 1.0)
    d = target - pose.position
    return pose.position, d / np.linalg.norm(d)


def ray_grid(pose: CameraPose):
    """Unit ray directions for every pixel center as an (N, N, 3) array."""
    n = pose.image_size
    px = (np.arange(n) + 0.5 - pose.center_px) / pose.focal_px
    xs, ys = np.meshgrid(px, px, indexing="xy")
    r = pose.rotation
    d = (
        xs[..., None] * r[0]
        + ys[..., None] * r[1]
        + np.ones_like(xs)[..., None] * r[2]
    )
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube (the reconstruction bounds)."""

    half: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.half <= 0:
            raise BadRange("cube half extent must be > 0")
        c = np.abs(np.asarray(self.center))
        if np.any(c >= self.half):
            raise BadRange("bounds cube must contain the origin")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float) - self.half

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float) + self.half

    def to_dict(self) -> dict:
        return {"half": self.half, "center": list(self.center)}

    @classmethod
    def from_dict(cls, d: dict) -> "Cube":
        return cls(half=float(d["half"]), center=tuple(float(x) for x in d.get("center", (0, 0, 0))))


@dataclass(frozen=True)
class RigConfig:
    """Six fixed poses plus the tiling and reconstruction bounds they share."""

    poses: tuple[CameraPose, ...]
    bounds: Cube
    tile_rows: int = 3
    tile_cols: int = 2

    def __post_init__(self):
        if len(self.poses) != self.tile_rows * self.tile_cols:
            raise BadRange("rows x cols must equal the number of rig views")
        sizes = {p.image_size for p in self.poses}
        if len(sizes) != 1:
            raise BadRange("all rig views must share one image size")

    @property
    def image_size(self) -> int:
        return self.poses[0].image_size

    @property
    def layout(self) -> TilingLayout:
        return TilingLayout(
            rows=self.tile_rows,
            cols=self.tile_cols,
            cell_width=self.image_size,
            cell_height=self.image_size,
        )

    def to_dict(self) -> dict:
        return {
            "poses": [p.to_dict() for p in self.poses],
            "bounds": self.bounds.to_dict(),
            "tile_rows": self.tile_rows,
            "tile_cols": self.tile_cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RigConfig":
        return cls(
            poses=tuple(CameraPose.from_dict(p) for p in d["poses"]),
            bounds=Cube.from_dict(d["bounds"]),
            tile_rows=int(d.get("tile_rows", 3)),
            tile_cols=int(d.get("tile_cols", 2)),
        )


def default_rig(
    radius: float = 2.5,
    fov_y: float = 49.1,
    image_size: int = 320,
    bounds_half: float = 1.0,
) -> RigConfig:
    """Six poses at azimuths 30..330 step 60, elevations alternating +30/-20.

    The default bounds cube (half extent 1.0) pokes out of individual frusta
    near its corners; carving treats a voxel that falls outside a view's
    frame as unconstrained by that view, so bounds much larger than the
    subject inflate the hull with shadow regions no camera can veto.  Half
    extents up to ~0.61 keep every voxel inside all six frames.
    """
    poses = tuple(
        CameraPose(az, el, radius, fov_y, image_size)
        for az, el in zip(RIG_AZIMUTHS, RIG_ELEVATIONS)
    )
    return RigConfig(poses=poses, bounds=Cube(half=bounds_half))
