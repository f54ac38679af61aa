"""Image-anchored placement: silhouette alignment, depth separation, composition."""

import numpy as np
import pytest

from meshutil import uv_sphere
from partforge.assemble import (
    AnchorView,
    PartTransform,
    align_part,
    compose_scene,
    part_mask_from_isolation,
    resolve_depths,
)
from partforge.cameras import CameraPose, project_points
from partforge.errors import (
    BadRange,
    DimensionMismatch,
    EmptyMask,
    MissingTransform,
    NoOverlap,
    SchemaViolation,
)
from partforge.images import ImageArtifact, solid
from partforge.rasterize import mask_iou, mesh_silhouette, voxelize_solid
from partforge.reconstruct import SilhouetteMask

CAM = CameraPose(azimuth=20.0, elevation=25.0, radius=2.5, fov_y=49.1, image_size=128)
PX_WORLD = CAM.radius / CAM.focal_px  # world units per pixel at the focus distance


def ground_truth_anchor(placements):
    """Render anchor masks for {part_id: (mesh, scale, translation)}."""
    masks = {}
    for pid, (mesh, s, t) in placements.items():
        bits = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, scale=s, translation=t)
        masks[pid] = SilhouetteMask(width=CAM.image_size, height=CAM.image_size, bits=bits)
    return AnchorView(camera=CAM, part_masks=masks)


def projected_centroid(mesh, s, t):
    u, v, _ = project_points(CAM, mesh.vertices * s + t)
    return np.array([u.mean(), v.mean()])


def test_align_recovers_identity_placement():
    mesh = uv_sphere(radius=0.35, n_lat=24, n_lon=48)
    anchor = ground_truth_anchor({"ball": (mesh, 1.0, np.zeros(3))})
    got = align_part(mesh, anchor, "ball")
    assert got.part_id == "ball"
    assert got.scale == pytest.approx(1.0, rel=0.02)
    assert np.linalg.norm(got.translation) < 2.0 * PX_WORLD
    assert got.image_iou > 0.98


def test_align_recovers_offset_and_scale():
    mesh = uv_sphere(radius=0.3, n_lat=24, n_lon=48)
    s_true = 1.4
    right, down = CAM.rotation[0], CAM.rotation[1]
    t_true = 0.12 * right - 0.08 * down
    anchor = ground_truth_anchor({"ball": (mesh, s_true, t_true)})
    got = align_part(mesh, anchor, "ball")
    assert got.scale == pytest.approx(s_true, rel=0.02)
    drift = projected_centroid(mesh, got.scale, np.array(got.translation)) - projected_centroid(
        mesh, s_true, t_true
    )
    assert np.linalg.norm(drift) < 1.0  # within a pixel in the anchor image
    assert got.image_iou > 0.95


def test_align_result_rerenders_to_reported_iou():
    mesh = uv_sphere(radius=0.3, n_lat=24, n_lon=48)
    anchor = ground_truth_anchor({"ball": (mesh, 0.8, np.array([0.1, 0.0, -0.05]))})
    got = align_part(mesh, anchor, "ball")
    sil = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, got.scale, got.translation)
    assert mask_iou(sil, anchor.part_masks["ball"].bits) == pytest.approx(got.image_iou)


def test_align_missing_or_blank_mask():
    mesh = uv_sphere(radius=0.3, n_lat=12, n_lon=24)
    blank = SilhouetteMask(
        width=CAM.image_size,
        height=CAM.image_size,
        bits=np.zeros((CAM.image_size, CAM.image_size), bool),
    )
    anchor = AnchorView(camera=CAM, part_masks={"ball": blank})
    with pytest.raises(EmptyMask):
        align_part(mesh, anchor, "ball")
    with pytest.raises(EmptyMask):
        align_part(mesh, anchor, "ghost")


def test_align_reports_no_overlap_for_unmatchable_mask():
    # 2x2 dots scattered on a 16px lattice: any silhouette, clipped or not,
    # covers gaps alongside dots, capping IoU near the 1.6% dot density
    mesh = uv_sphere(radius=0.3, n_lat=12, n_lon=24)
    n = CAM.image_size
    bits = np.zeros((n, n), bool)
    for r in range(0, n, 16):
        for c in range(0, n, 16):
            bits[r : r + 2, c : c + 2] = True
    anchor = AnchorView(
        camera=CAM, part_masks={"dots": SilhouetteMask(width=n, height=n, bits=bits)}
    )
    with pytest.raises(NoOverlap):
        align_part(mesh, anchor, "dots")


def test_part_mask_from_isolation_extracts_alpha():
    rgba = np.zeros((64, 64, 4), np.uint8)
    rgba[10:30, 20:50] = (255, 0, 0, 255)
    original = solid(64, 64, (10, 10, 10, 255))
    isolated = ImageArtifact.from_array(rgba)
    mask = part_mask_from_isolation(original, isolated)
    assert mask.area == 20 * 30
    assert mask.bits[15, 25] and not mask.bits[0, 0]


def test_part_mask_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        part_mask_from_isolation(solid(64, 64, (0, 0, 0, 255)), solid(32, 64, (0, 0, 0, 0)))


def test_anchor_view_rejects_foreign_mask_size():
    bits = np.zeros((64, 64), bool)
    with pytest.raises(DimensionMismatch):
        AnchorView(camera=CAM, part_masks={"p": SilhouetteMask(width=64, height=64, bits=bits)})


def depth_fixture():
    big = uv_sphere(radius=0.3, n_lat=16, n_lon=32, part_id="big")
    small = uv_sphere(radius=0.2, n_lat=16, n_lon=32, part_id="small")
    meshes = {"big": big, "small": small}
    transforms = [
        PartTransform("small", 1.0, (0.0, 0.0, 0.0), 0.97),
        PartTransform("big", 1.0, (0.0, 0.0, 0.0), 0.99),
    ]
    anchor = ground_truth_anchor(
        {pid: (meshes[pid], 1.0, np.zeros(3)) for pid in meshes}
    )
    return meshes, transforms, anchor


def intersection_fraction(mesh_a, xf_a, mesh_b, xf_b, res=48):
    pts_a = mesh_a.vertices * xf_a[0] + xf_a[1]
    pts_b = mesh_b.vertices * xf_b[0] + xf_b[1]
    lo = np.maximum(pts_a.min(axis=0), pts_b.min(axis=0))
    hi = np.minimum(pts_a.max(axis=0), pts_b.max(axis=0))
    if (hi <= lo).any():
        return 0.0
    cell = (hi - lo) / res
    occ_a = voxelize_solid(mesh_a.vertices, mesh_a.triangles, lo, cell, res, *xf_a)
    occ_b = voxelize_solid(mesh_b.vertices, mesh_b.triangles, lo, cell, res, *xf_b)
    inter = float((occ_a & occ_b).sum()) * float(cell.prod())
    smaller = min(
        float(voxelize_solid(m.vertices, m.triangles, p.min(axis=0), (p.max(axis=0) - p.min(axis=0)) / res, res, *xf).sum())
        * float(((p.max(axis=0) - p.min(axis=0)) / res).prod())
        for m, xf, p in ((mesh_a, xf_a, pts_a), (mesh_b, xf_b, pts_b))
    )
    return inter / smaller


def test_depth_resolution_separates_nested_parts():
    meshes, transforms, anchor = depth_fixture()
    before = {tr.part_id: tr for tr in transforms}
    out = resolve_depths(transforms, meshes, anchor)
    assert [tr.part_id for tr in out] == ["small", "big"]  # input order kept
    after = {tr.part_id: tr for tr in out}
    # the dominant (larger-mask) part is the fixed reference
    assert after["big"] == before["big"]
    assert after["small"] != before["small"]
    frac = intersection_fraction(
        meshes["big"],
        (after["big"].scale, np.asarray(after["big"].translation)),
        meshes["small"],
        (after["small"].scale, np.asarray(after["small"].translation)),
    )
    assert frac < 0.01


def test_depth_resolution_preserves_silhouettes_bitwise():
    meshes, transforms, anchor = depth_fixture()
    out = resolve_depths(transforms, meshes, anchor)
    for tr_in, tr_out in zip(transforms, out):
        mesh = meshes[tr_in.part_id]
        a = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, tr_in.scale, tr_in.translation)
        b = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, tr_out.scale, tr_out.translation)
        assert np.array_equal(a, b)
        assert tr_out.image_iou == tr_in.image_iou


def test_depth_resolution_is_a_noop_for_disjoint_parts():
    meshes, _, _ = depth_fixture()
    right = CAM.rotation[0]
    transforms = [
        PartTransform("small", 1.0, tuple(0.6 * right), 0.97),
        PartTransform("big", 1.0, tuple(-0.4 * right), 0.99),
    ]
    anchor = ground_truth_anchor(
        {
            "small": (meshes["small"], 1.0, 0.6 * right),
            "big": (meshes["big"], 1.0, -0.4 * right),
        }
    )
    assert resolve_depths(transforms, meshes, anchor) == transforms


def test_depth_resolution_requires_meshes_and_masks():
    meshes, transforms, anchor = depth_fixture()
    with pytest.raises(MissingTransform):
        resolve_depths(transforms, {"big": meshes["big"]}, anchor)
    bare = AnchorView(camera=CAM, part_masks={})
    with pytest.raises(EmptyMask):
        resolve_depths(transforms, meshes, bare)


def test_compose_scene_bakes_transforms_and_manifest():
    meshes, transforms, _ = depth_fixture()
    world, manifest = compose_scene(meshes, transforms)
    assert [m.part_id for m in world] == ["small", "big"]
    np.testing.assert_allclose(
        world[0].vertices, meshes["small"].vertices * 1.0 + np.zeros(3)
    )
    assert manifest["v"] == 1
    assert manifest["parts"] == [tr.to_dict() for tr in transforms]
    assert [PartTransform.from_dict(p) for p in manifest["parts"]] == transforms


def test_compose_scene_demands_exact_coverage():
    meshes, transforms, _ = depth_fixture()
    with pytest.raises(MissingTransform):
        compose_scene(meshes, transforms[:1])
    with pytest.raises(MissingTransform):
        compose_scene({"big": meshes["big"]}, transforms)
    with pytest.raises(MissingTransform):
        compose_scene(meshes, [transforms[0], transforms[0]])


def test_part_transform_validation():
    with pytest.raises(BadRange):
        PartTransform("p", 0.0, (0.0, 0.0, 0.0), 0.5)
    with pytest.raises(BadRange):
        PartTransform("p", 1.0, (0.0, 0.0), 0.5)
    with pytest.raises(BadRange):
        PartTransform("p", 1.0, (0.0, 0.0, float("nan")), 0.5)
    with pytest.raises(BadRange):
        PartTransform("p", 1.0, (0.0, 0.0, 0.0), 1.5)
    with pytest.raises(SchemaViolation):
        PartTransform.from_dict({"part_id": "p", "scale": 1.0})
