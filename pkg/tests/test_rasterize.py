"""Mesh silhouettes and solid voxelization against analytic geometry."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from meshutil import box_mesh, uv_sphere
from oracles import (
    analytic_box_voxelization,
    analytic_sphere_voxelization,
    solid_voxelize_zcolumns,
)
from partforge.cameras import CameraPose, Cube, project_points
from partforge.errors import BadRange
from partforge.meshes import signed_volume
from partforge.rasterize import mask_iou, mesh_silhouette, voxelize_solid

CAM = CameraPose(azimuth=12.0, elevation=23.0, radius=2.7, fov_y=47.3, image_size=160)


def test_test_meshes_have_outward_winding():
    assert signed_volume(box_mesh(half=(0.3, 0.4, 0.5))) > 0
    sphere = uv_sphere(radius=0.5, n_lat=24, n_lon=48)
    vol = signed_volume(sphere)
    assert 0 < vol < 4.0 / 3.0 * np.pi * 0.5**3  # inscribed polyhedron


def test_sphere_silhouette_is_the_projected_disk():
    pose = CameraPose(azimuth=0.0, elevation=0.0, radius=3.0, fov_y=50.0, image_size=256)
    mesh = uv_sphere(radius=0.5, n_lat=64, n_lon=128)
    mask = mesh_silhouette(mesh.vertices, mesh.triangles, pose)
    r_px = pose.focal_px * np.tan(np.arcsin(0.5 / 3.0))
    assert mask.sum() == pytest.approx(np.pi * r_px**2, rel=0.02)
    rows, cols = np.nonzero(mask)
    assert cols.mean() + 0.5 == pytest.approx(pose.center_px, abs=0.7)
    assert rows.mean() + 0.5 == pytest.approx(pose.center_px, abs=0.7)


def test_box_silhouette_bbox_matches_projected_corners():
    mesh = box_mesh(center=(0.05, -0.1, 0.08), half=(0.3, 0.25, 0.35))
    pose = CameraPose(azimuth=18.0, elevation=28.0, radius=3.2, fov_y=45.0, image_size=192)
    mask = mesh_silhouette(mesh.vertices, mesh.triangles, pose)
    u, v, z = project_points(pose, mesh.vertices)
    assert (z > 0).all()
    rows, cols = np.nonzero(mask)
    # convex solid: silhouette bbox == bbox of the projected corners
    assert cols.min() == pytest.approx(u.min(), abs=1.5)
    assert cols.max() + 1 == pytest.approx(u.max(), abs=1.5)
    assert rows.min() == pytest.approx(v.min(), abs=1.5)
    assert rows.max() + 1 == pytest.approx(v.max(), abs=1.5)
    # and it is filled, not an outline
    assert mask[int(v.mean()), int(u.mean())]


def test_silhouette_transform_args_equal_pretransformed_vertices():
    mesh = uv_sphere(radius=0.4, n_lat=24, n_lon=48)
    s, t = 0.65, np.array([0.2, -0.15, 0.1])
    a = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, scale=s, translation=t)
    b = mesh_silhouette(mesh.vertices * s + t, mesh.triangles, CAM)
    assert np.array_equal(a, b)


def test_silhouette_invariant_under_scaling_about_camera_center():
    # The depth-resolution move: scale lam about the camera center changes
    # (scale, translation) but projects to the same pixels.
    mesh = uv_sphere(radius=0.4, n_lat=24, n_lon=48)
    s, t = 0.8, np.array([0.1, -0.05, 0.2])
    base = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, scale=s, translation=t)
    assert base.any()
    for lam in (0.7, 1.33):
        moved = mesh_silhouette(
            mesh.vertices,
            mesh.triangles,
            CAM,
            scale=lam * s,
            translation=lam * t + (1.0 - lam) * CAM.position,
        )
        assert np.array_equal(moved, base)


def test_scaling_mesh_commutes_with_inverse_scaling_camera():
    # Uniform scale s about the origin looks identical to pulling the camera
    # in by 1/s. Float paths differ, so allow a 1 px band: each silhouette
    # must lie inside the other's one-pixel dilation.
    from dataclasses import replace

    from scipy.ndimage import binary_dilation

    mesh = uv_sphere(radius=0.4, n_lat=24, n_lon=48)
    for s in (0.6, 1.7):
        scaled_mesh = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, scale=s)
        closer_cam = replace(CAM, radius=CAM.radius / s)
        scaled_cam = mesh_silhouette(mesh.vertices, mesh.triangles, closer_cam)
        assert scaled_mesh.any() and scaled_cam.any()
        box = np.ones((3, 3), dtype=bool)
        assert not (scaled_mesh & ~binary_dilation(scaled_cam, box)).any()
        assert not (scaled_cam & ~binary_dilation(scaled_mesh, box)).any()


def test_silhouette_behind_camera_is_empty():
    mesh = uv_sphere(radius=0.3, n_lat=12, n_lon=24)
    behind = 2.0 * CAM.position  # past the camera, opposite the subject
    mask = mesh_silhouette(mesh.vertices, mesh.triangles, CAM, translation=behind)
    assert not mask.any()


def test_silhouette_rejects_bad_scale():
    mesh = box_mesh()
    with pytest.raises(BadRange):
        mesh_silhouette(mesh.vertices, mesh.triangles, CAM, scale=0.0)


def test_box_voxelization_bitwise_matches_center_in_box():
    bounds = Cube(half=1.0)
    n = 32
    center, extents = (0.11, -0.07, 0.19), (1.1, 0.9, 0.7)
    mesh = box_mesh(center=center, half=tuple(e / 2 for e in extents))
    cell = np.full(3, 2.0 * bounds.half / n)
    got = voxelize_solid(mesh.vertices, mesh.triangles, bounds.lo, cell, n)
    want = analytic_box_voxelization(bounds, n, center, extents)
    assert np.array_equal(got, want)


def test_sphere_voxelization_matches_ball_up_to_facets():
    bounds = Cube(half=1.0)
    n = 32
    center, radius = np.array([0.03, -0.11, 0.07]), 0.43
    mesh = uv_sphere(center=center, radius=radius, n_lat=64, n_lon=128)
    cell = np.full(3, 2.0 * bounds.half / n)
    got = voxelize_solid(mesh.vertices, mesh.triangles, bounds.lo, cell, n)
    want = analytic_sphere_voxelization(bounds, n, radius, center=center)
    wrong = np.argwhere(got != want)
    assert len(wrong) <= 10  # only voxels whose center grazes the facet band
    if len(wrong):
        centers = bounds.lo + (wrong + 0.5) * cell
        dist = np.linalg.norm(centers - center, axis=1)
        assert (np.abs(dist - radius) < 1e-3).all()


def test_voxelization_bitwise_matches_independent_column_oracle():
    bounds = Cube(half=0.8)
    n = 24
    mesh = uv_sphere(center=(0.03, -0.11, 0.07), radius=0.43, n_lat=24, n_lon=48)
    cell = np.full(3, 2.0 * bounds.half / n)
    got = voxelize_solid(mesh.vertices, mesh.triangles, bounds.lo, cell, n)
    want = solid_voxelize_zcolumns(mesh.vertices, mesh.triangles, bounds.lo, bounds.hi, n)
    assert want.any()
    assert np.array_equal(got, want)


def test_voxelization_transform_args_equal_pretransformed_vertices():
    bounds = Cube(half=1.0)
    n = 20
    mesh = uv_sphere(radius=0.5, n_lat=16, n_lon=32)
    s, t = 0.7, np.array([0.15, -0.2, 0.1])
    cell = np.full(3, 2.0 * bounds.half / n)
    a = voxelize_solid(mesh.vertices, mesh.triangles, bounds.lo, cell, n, scale=s, translation=t)
    b = voxelize_solid(mesh.vertices * s + t, mesh.triangles, bounds.lo, cell, n)
    assert a.any()
    assert np.array_equal(a, b)


def test_voxelization_rejects_bad_args():
    mesh = box_mesh()
    cell = np.full(3, 0.1)
    with pytest.raises(BadRange):
        voxelize_solid(mesh.vertices, mesh.triangles, np.zeros(3), cell, 0)
    with pytest.raises(BadRange):
        voxelize_solid(mesh.vertices, mesh.triangles, np.zeros(3), cell, 16, scale=-1.0)


def test_mask_iou_known_values():
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[:2] = True
    b[1:3] = True
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, ~a) == 0.0
    assert mask_iou(a, b) == pytest.approx(1.0 / 3.0)
    assert mask_iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool)) == 0.0


@given(
    hnp.arrays(bool, (8, 8), elements=st.booleans()),
    hnp.arrays(bool, (8, 8), elements=st.booleans()),
)
def test_mask_iou_symmetric_and_bounded(a, b):
    assert mask_iou(a, b) == mask_iou(b, a)
    assert 0.0 <= mask_iou(a, b) <= 1.0
