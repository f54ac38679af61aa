"""Image-anchored assembly: place reconstructed part meshes back into the
frame of the original photograph.

Each part arrives in its own reconstruction frame with no notion of where it
sat in the source image. The anchor view (the input camera plus a per-part
foreground mask) is the only shared evidence, so placement is solved as a
silhouette-matching problem:

  1. ``align_part`` finds a similarity transform (uniform scale + translation)
     whose rendered silhouette best overlaps the part's mask in the anchor
     view, by coarse grid scan then coordinate descent on IoU.
  2. ``resolve_depths`` removes inter-part interpenetration by sliding parts
     along their viewing rays. Scaling a part by lam about the camera center
     leaves its silhouette pixel-identical, so depth can be searched without
     disturbing the image-plane fit.
  3. ``compose_scene`` bakes the transforms into world-frame meshes plus a
     JSON-ready manifest.

Silhouette IoU is a plateau-ridden objective (masks are binary), so the
optimizers here are derivative-free by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cameras import CameraPose, unproject
from .errors import (
    BadRange,
    DimensionMismatch,
    EmptyMask,
    MissingTransform,
    NoOverlap,
    SchemaViolation,
)
from .images import ImageArtifact
from .meshes import PartMesh, transform_mesh
from .rasterize import mask_iou, mesh_silhouette, voxelize_solid
from .reconstruct import SilhouetteMask, extract_silhouette

_MIN_ALIGN_IOU = 0.05
_DESCENT_TOL = 1e-4
_IOU_PRESERVE_TOL = 0.02
_DEPTH_ITERS = 40
_DEPTH_RANGE = (0.6, 1.8)
_INTERSECT_RES = 32


@dataclass(frozen=True)
class PartTransform:
    """Similarity placement of one part: world = scale * local + translation."""

    part_id: str
    scale: float
    translation: tuple[float, float, float]
    image_iou: float

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise BadRange(f"scale must be finite and > 0, got {self.scale}")
        t = tuple(float(v) for v in self.translation)
        if len(t) != 3 or not all(math.isfinite(v) for v in t):
            raise BadRange(f"translation must be 3 finite floats, got {self.translation}")
        if not (math.isfinite(self.image_iou) and 0.0 <= self.image_iou <= 1.0):
            raise BadRange(f"image_iou must be in [0, 1], got {self.image_iou}")
        object.__setattr__(self, "translation", t)

    def to_dict(self) -> dict:
        return {
            "part_id": self.part_id,
            "scale": self.scale,
            "translation": list(self.translation),
            "image_iou": self.image_iou,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartTransform":
        try:
            return cls(
                part_id=data["part_id"],
                scale=float(data["scale"]),
                translation=tuple(float(v) for v in data["translation"]),
                image_iou=float(data["image_iou"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"part transform: {exc}") from exc


@dataclass(frozen=True)
class AnchorView:
    """The input photograph's camera plus one foreground mask per part."""

    camera: CameraPose
    part_masks: dict[str, SilhouetteMask]

    def __post_init__(self):
        n = self.camera.image_size
        for pid, mask in self.part_masks.items():
            if (mask.width, mask.height) != (n, n):
                raise DimensionMismatch(
                    f"mask for {pid!r} is {mask.width}x{mask.height}, camera expects {n}x{n}"
                )


def part_mask_from_isolation(original: ImageArtifact, isolated: ImageArtifact) -> SilhouetteMask:
    """Foreground mask of an isolated part, checked against the source frame.

    The isolation backend must return the part on transparency at the input
    image's exact dimensions; anything else cannot anchor to the photo.
    """
    if (isolated.width, isolated.height) != (original.width, original.height):
        raise DimensionMismatch(
            f"isolated image {isolated.width}x{isolated.height}"
            f" != original {original.width}x{original.height}"
        )
    return extract_silhouette(isolated)


def _mask_stats(bits: np.ndarray) -> tuple[float, float, float]:
    """Centroid (u, v) in pixel coordinates and bbox extent in pixels."""
    rows, cols = np.nonzero(bits)
    cu = float(cols.mean()) + 0.5
    cv = float(rows.mean()) + 0.5
    extent = float(max(cols.max() - cols.min() + 1, rows.max() - rows.min() + 1))
    return cu, cv, extent


def align_part(mesh: PartMesh, anchor: AnchorView, part_id: str) -> PartTransform:
    """Scale and translate ``mesh`` so its silhouette matches the anchor mask.

    Search: 17 log-spaced scales in [0.25, 4] crossed with a 9x9 grid of
    image-plane offsets spanning +/-25% of the mask extent, then coordinate
    descent (multiplicative on scale, additive on the two in-plane offsets)
    with step halving until an IoU sweep gains less than 1e-4.
    """
    if part_id not in anchor.part_masks:
        raise EmptyMask(f"anchor has no mask for part {part_id!r}")
    bits = anchor.part_masks[part_id].bits
    if not bits.any():
        raise EmptyMask(f"mask for part {part_id!r} has no foreground pixels")

    cam = anchor.camera
    verts = mesh.vertices
    tris = mesh.triangles
    centroid = verts.mean(axis=0)
    # Anchor the part at the camera's focus distance: the rig looks at the
    # origin, so depth = radius puts it where the subject was photographed.
    depth = cam.radius
    cu, cv, extent_px = _mask_stats(bits)
    target = unproject(cam, cu, cv, depth)
    extent_world = extent_px * depth / cam.focal_px
    right, down = cam.rotation[0], cam.rotation[1]

    def evaluate(s: float, du: float, dv: float) -> float:
        t = target + du * right + dv * down - s * centroid
        return mask_iou(mesh_silhouette(verts, tris, cam, scale=s, translation=t), bits)

    best_iou = -1.0
    best = (1.0, 0.0, 0.0)
    offsets = np.linspace(-0.25, 0.25, 9) * extent_world
    for s in np.geomspace(0.25, 4.0, 17):
        for du in offsets:
            for dv in offsets:
                iou = evaluate(s, du, dv)
                if iou > best_iou:
                    best_iou, best = iou, (float(s), float(du), float(dv))

    s, du, dv = best
    log_step = math.log(4.0 / 0.25) / 16.0
    move_step = float(offsets[1] - offsets[0])
    while log_step > 1e-6:
        gained = 0.0
        for axis in range(3):
            for sign in (1.0, -1.0):
                if axis == 0:
                    cand = (s * math.exp(sign * log_step), du, dv)
                elif axis == 1:
                    cand = (s, du + sign * move_step, dv)
                else:
                    cand = (s, du, dv + sign * move_step)
                iou = evaluate(*cand)
                if iou > best_iou:
                    gained += iou - best_iou
                    best_iou, (s, du, dv) = iou, cand
                    break
        if gained < _DESCENT_TOL:
            log_step *= 0.5
            move_step *= 0.5

    if best_iou < _MIN_ALIGN_IOU:
        raise NoOverlap(f"part {part_id!r}: best silhouette IoU {best_iou:.4f} < {_MIN_ALIGN_IOU}")
    t = target + du * right + dv * down - s * centroid
    return PartTransform(part_id=part_id, scale=s, translation=tuple(t), image_iou=best_iou)


def _world_aabb(mesh: PartMesh, scale: float, translation: np.ndarray):
    pts = mesh.vertices * scale + translation
    return pts.min(axis=0), pts.max(axis=0)


def _intersection_volume(
    mesh_a: PartMesh,
    xf_a: tuple[float, np.ndarray],
    mesh_b: PartMesh,
    xf_b: tuple[float, np.ndarray],
) -> float:
    """Overlap volume of two placed meshes, voxel-sampled on their shared AABB."""
    lo_a, hi_a = _world_aabb(mesh_a, *xf_a)
    lo_b, hi_b = _world_aabb(mesh_b, *xf_b)
    lo = np.maximum(lo_a, lo_b)
    hi = np.minimum(hi_a, hi_b)
    if (hi <= lo).any():
        return 0.0
    cell = (hi - lo) / _INTERSECT_RES
    occ_a = voxelize_solid(
        mesh_a.vertices, mesh_a.triangles, lo, cell, _INTERSECT_RES, xf_a[0], xf_a[1]
    )
    occ_b = voxelize_solid(
        mesh_b.vertices, mesh_b.triangles, lo, cell, _INTERSECT_RES, xf_b[0], xf_b[1]
    )
    return float((occ_a & occ_b).sum()) * float(cell.prod())


def _golden_min(fn, lo: float, hi: float, iters: int) -> tuple[float, float]:
    """Golden-section scan returning the best (x, fn(x)) actually evaluated."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
            if fd < best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def resolve_depths(
    transforms: list[PartTransform],
    meshes: dict[str, PartMesh],
    anchor: AnchorView,
) -> list[PartTransform]:
    """Separate interpenetrating parts by depth without moving their silhouettes.

    Scaling a placed part by lam about the camera center C maps
    world = s * local + t to lam * s * local + (lam * t + (1 - lam) * C),
    which projects to the exact same pixels. Parts are processed in
    descending mask-area order (the dominant part stays put); each later
    part's lam minimizes its total voxel-sampled overlap against the already
    placed ones via golden-section search. Parts that do not intersect
    anything keep lam = 1 exactly.
    """
    for tr in transforms:
        if tr.part_id not in meshes:
            raise MissingTransform(f"no mesh supplied for part {tr.part_id!r}")
        if tr.part_id not in anchor.part_masks:
            raise EmptyMask(f"anchor has no mask for part {tr.part_id!r}")
    cam_center = anchor.camera.position
    order = sorted(
        range(len(transforms)),
        key=lambda i: anchor.part_masks[transforms[i].part_id].area,
        reverse=True,
    )

    placed: list[tuple[PartMesh, tuple[float, np.ndarray]]] = []
    resolved: dict[int, PartTransform] = {}
    for rank, idx in enumerate(order):
        tr = transforms[idx]
        mesh = meshes[tr.part_id]
        t0 = np.asarray(tr.translation, dtype=np.float64)

        def placement(lam: float) -> tuple[float, np.ndarray]:
            return lam * tr.scale, lam * t0 + (1.0 - lam) * cam_center

        def overlap(lam: float) -> float:
            xf = placement(lam)
            return sum(_intersection_volume(mesh, xf, m, x) for m, x in placed)

        lam = 1.0
        if rank > 0 and overlap(1.0) > 0.0:
            lam, _ = _golden_min(overlap, *_DEPTH_RANGE, iters=_DEPTH_ITERS)
        scale, translation = placement(lam)
        placed.append((mesh, (scale, translation)))
        resolved[idx] = PartTransform(
            part_id=tr.part_id,
            scale=scale,
            translation=tuple(translation),
            image_iou=tr.image_iou,
        )
    return [resolved[i] for i in range(len(transforms))]


def compose_scene(
    meshes: dict[str, PartMesh],
    transforms: list[PartTransform],
) -> tuple[list[PartMesh], dict]:
    """Bake transforms into world-frame meshes and build the scene manifest.

    Every mesh must have exactly one transform; the manifest lists parts in
    transform order so the record of the solve is reproducible.
    """
    seen = [tr.part_id for tr in transforms]
    if sorted(seen) != sorted(meshes) or len(set(seen)) != len(seen):
        raise MissingTransform(
            f"transforms cover {sorted(seen)} but meshes are {sorted(meshes)}"
        )
    world = [
        transform_mesh(meshes[tr.part_id], tr.scale, tr.translation) for tr in transforms
    ]
    manifest = {"v": 1, "parts": [tr.to_dict() for tr in transforms]}
    return world, manifest
