"""Triangle-mesh rasterization: image-space silhouettes and solid voxelization.

Both are sampling rules, not renderers: a pixel belongs to the silhouette
when its center lies inside some projected triangle; a voxel belongs to the
solid when its center lies inside the watertight surface (z-column parity).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .cameras import CameraPose, project_points
from .errors import BadRange

_DEPTH_EPS = 1e-12


@njit(cache=True)
def _raster_mask(u, v, tris, size):
    mask = np.zeros((size, size), np.bool_)
    for k in range(tris.shape[0]):
        a, b, c = tris[k, 0], tris[k, 1], tris[k, 2]
        ua, ub, uc = u[a], u[b], u[c]
        va, vb, vc = v[a], v[b], v[c]
        area2 = (ub - ua) * (vc - va) - (vb - va) * (uc - ua)
        if area2 == 0.0:
            continue
        lo_c = int(math.floor(min(ua, ub, uc) - 0.5))
        hi_c = int(math.ceil(max(ua, ub, uc) - 0.5))
        lo_r = int(math.floor(min(va, vb, vc) - 0.5))
        hi_r = int(math.ceil(max(va, vb, vc) - 0.5))
        if lo_c < 0:
            lo_c = 0
        if lo_r < 0:
            lo_r = 0
        if hi_c > size - 1:
            hi_c = size - 1
        if hi_r > size - 1:
            hi_r = size - 1
        for r in range(lo_r, hi_r + 1):
            py = r + 0.5
            for col in range(lo_c, hi_c + 1):
                px = col + 0.5
                e0 = (ub - ua) * (py - va) - (vb - va) * (px - ua)
                e1 = (uc - ub) * (py - vb) - (vc - vb) * (px - ub)
                e2 = (ua - uc) * (py - vc) - (va - vc) * (px - uc)
                if (e0 >= 0.0 and e1 >= 0.0 and e2 >= 0.0) or (
                    e0 <= 0.0 and e1 <= 0.0 and e2 <= 0.0
                ):
                    mask[r, col] = True
    return mask


def mesh_silhouette(
    vertices: np.ndarray,
    triangles: np.ndarray,
    pose: CameraPose,
    scale: float = 1.0,
    translation=(0.0, 0.0, 0.0),
) -> np.ndarray:
    """Boolean (H, W) silhouette of ``scale * vertices + translation``.

    Triangles with any vertex at or behind the camera plane are dropped;
    the subject is assumed to sit in front of the camera.
    """
    if scale <= 0:
        raise BadRange("scale must be positive")
    pts = np.asarray(vertices, np.float64) * scale + np.asarray(translation, np.float64)
    u, v, z = project_points(pose, pts)
    tris = np.asarray(triangles, np.int64)
    front = (z[tris] > _DEPTH_EPS).all(axis=1)
    return _raster_mask(u, v, np.ascontiguousarray(tris[front]), pose.image_size)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


@njit(cache=True)
def _voxelize_parity(verts, tris, lo, cell, n):
    occ = np.zeros((n, n, n), np.bool_)
    max_hits = 64
    hits = np.zeros((n, n, max_hits), np.float64)
    counts = np.zeros((n, n), np.int64)
    for k in range(tris.shape[0]):
        a, b, c = tris[k, 0], tris[k, 1], tris[k, 2]
        ax, ay, az = verts[a, 0], verts[a, 1], verts[a, 2]
        bx, by, bz = verts[b, 0], verts[b, 1], verts[b, 2]
        cx, cy, cz = verts[c, 0], verts[c, 1], verts[c, 2]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area2 == 0.0:  # wall parallel to the casting axis: never crossed
            continue
        ix_lo = int(math.floor((min(ax, bx, cx) - lo[0]) / cell[0] - 0.5))
        ix_hi = int(math.ceil((max(ax, bx, cx) - lo[0]) / cell[0] - 0.5))
        iy_lo = int(math.floor((min(ay, by, cy) - lo[1]) / cell[1] - 0.5))
        iy_hi = int(math.ceil((max(ay, by, cy) - lo[1]) / cell[1] - 0.5))
        if ix_lo < 0:
            ix_lo = 0
        if iy_lo < 0:
            iy_lo = 0
        if ix_hi > n - 1:
            ix_hi = n - 1
        if iy_hi > n - 1:
            iy_hi = n - 1
        for ix in range(ix_lo, ix_hi + 1):
            # sampling points sit a hair off the lattice so no column passes
            # exactly through a projected edge or vertex (parity would break)
            px = lo[0] + (ix + 0.5 + 1.9073486e-6) * cell[0]
            for iy in range(iy_lo, iy_hi + 1):
                py = lo[1] + (iy + 0.5 + 3.8146973e-6) * cell[1]
                w0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                w1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                w2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                if area2 > 0.0:
                    inside = w0 > 0.0 and w1 > 0.0 and w2 > 0.0
                else:
                    inside = w0 < 0.0 and w1 < 0.0 and w2 < 0.0
                if not inside:
                    continue
                zhit = (az * w1 + bz * w2 + cz * w0) / area2
                cnt = counts[ix, iy]
                if cnt < max_hits:
                    hits[ix, iy, cnt] = zhit
                    counts[ix, iy] = cnt + 1
    for ix in range(n):
        for iy in range(n):
            cnt = counts[ix, iy]
            if cnt < 2:
                continue
            col = hits[ix, iy, :cnt]
            col.sort()
            for pair in range(0, cnt - 1, 2):
                z0, z1 = col[pair], col[pair + 1]
                iz_lo = int(math.ceil((z0 - lo[2]) / cell[2] - 0.5))
                iz_hi = int(math.floor((z1 - lo[2]) / cell[2] - 0.5))
                if iz_lo < 0:
                    iz_lo = 0
                if iz_hi > n - 1:
                    iz_hi = n - 1
                for iz in range(iz_lo, iz_hi + 1):
                    occ[ix, iy, iz] = True
    return occ


def voxelize_solid(
    vertices: np.ndarray,
    triangles: np.ndarray,
    lo,
    cell,
    resolution: int,
    scale: float = 1.0,
    translation=(0.0, 0.0, 0.0),
) -> np.ndarray:
    """Occupancy of the transformed mesh on an axis-aligned grid.

    ``lo`` is the grid corner, ``cell`` the per-axis voxel size.  Requires a
    watertight surface; interior is filled by counting surface crossings
    along each z column.
    """
    if scale <= 0:
        raise BadRange("scale must be positive")
    if resolution < 1:
        raise BadRange("resolution must be >= 1")
    pts = np.asarray(vertices, np.float64) * scale + np.asarray(translation, np.float64)
    return _voxelize_parity(
        np.ascontiguousarray(pts),
        np.ascontiguousarray(np.asarray(triangles, np.int64)),
        np.asarray(lo, np.float64),
        np.asarray(cell, np.float64),
        resolution,
    )
