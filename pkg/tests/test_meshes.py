import math
import struct

import numpy as np
import pytest

from oracles import analytic_sphere_voxelization
from partforge.cameras import Cube
from partforge.errors import BadRange, EmptyGrid, UnsupportedFormat
from partforge.meshes import (
    PartMesh,
    euler_characteristic,
    export_mesh,
    import_obj,
    is_watertight,
    marching_cubes,
    signed_volume,
    surface_area,
    transform_mesh,
)
from partforge.reconstruct import VoxelGrid

CUBE_VERTS = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=float,
)
CUBE_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # bottom (-z)
        [4, 5, 6], [4, 6, 7],  # top (+z)
        [0, 1, 5], [0, 5, 4],  # front (-y)
        [2, 3, 7], [2, 7, 6],  # back (+y)
        [0, 4, 7], [0, 7, 3],  # left (-x)
        [1, 2, 6], [1, 6, 5],  # right (+x)
    ]
)


def cube_mesh(part_id="cube"):
    colors = np.full((8, 3), 200, np.uint8)
    return PartMesh(part_id=part_id, vertices=CUBE_VERTS, triangles=CUBE_FACES, vertex_colors=colors)


def sphere_grid(resolution, radius=1.0):
    bounds = Cube(half=1.3)
    occ = analytic_sphere_voxelization(bounds, resolution, radius)
    empty = VoxelGrid.empty(resolution, bounds)
    return VoxelGrid(resolution, bounds, occ, empty.color_sum, empty.color_count)


def test_cube_mesh_invariants():
    m = cube_mesh()
    assert is_watertight(m)
    assert euler_characteristic(m) == 2
    assert abs(signed_volume(m) - 1.0) < 1e-12
    assert abs(surface_area(m) - 6.0) < 1e-12


def test_mesh_validation():
    with pytest.raises(BadRange):
        PartMesh("x", CUBE_VERTS, np.array([[0, 1, 99]]), np.full((8, 3), 0, np.uint8))
    with pytest.raises(BadRange):
        PartMesh("x", CUBE_VERTS, CUBE_FACES, np.full((7, 3), 0, np.uint8))


def test_empty_grid_refused():
    with pytest.raises(EmptyGrid):
        marching_cubes(VoxelGrid.empty(8, Cube(half=1.0)))


def test_single_voxel_meshes_to_closed_octahedron():
    g = VoxelGrid.empty(8, Cube(half=1.0))
    occ = g.occupancy.copy()
    occ[4, 4, 4] = True
    mesh = marching_cubes(VoxelGrid(8, g.bounds, occ, g.color_sum, g.color_count))
    assert mesh.n_vertices == 6
    assert mesh.n_triangles == 8
    assert is_watertight(mesh)
    assert euler_characteristic(mesh) == 2
    assert signed_volume(mesh) > 0
    # vertices straddle the voxel center at half-cell offsets
    center = g.bounds.lo + (np.array([4, 4, 4]) + 0.5) * g.cell
    assert np.allclose(mesh.centroid(), center, atol=1e-9)


def test_sphere_mesh_is_watertight_with_sphere_topology():
    mesh = marching_cubes(sphere_grid(32), part_id="ball")
    assert mesh.part_id == "ball"
    assert is_watertight(mesh)
    assert euler_characteristic(mesh) == 2
    assert signed_volume(mesh) > 0


def test_bounds_touching_grid_still_closes():
    g = VoxelGrid.empty(8, Cube(half=1.0))
    occ = np.ones((8, 8, 8), bool)
    mesh = marching_cubes(VoxelGrid(8, g.bounds, occ, g.color_sum, g.color_count))
    assert is_watertight(mesh)
    assert signed_volume(mesh) > 0


def test_mesh_vertices_hug_the_occupancy_boundary():
    # every vertex within half a voxel diagonal of an occupied-empty face
    grid = sphere_grid(24, radius=0.9)
    mesh = marching_cubes(grid)
    half_diag = 0.5 * math.sqrt(3) * grid.cell
    centers = np.argwhere(grid.occupancy) * grid.cell + grid.bounds.lo + 0.5 * grid.cell
    from scipy.spatial import cKDTree

    d, _ = cKDTree(centers).query(mesh.vertices)
    assert d.max() <= half_diag + 1e-9


def test_vertex_colors_come_from_nearest_colored_voxel():
    g = VoxelGrid.empty(8, Cube(half=1.0))
    occ = g.occupancy.copy()
    occ[2:4, 4, 4] = True
    color_sum = g.color_sum.copy()
    color_count = g.color_count.copy()
    color_sum[2, 4, 4] = (255.0, 0.0, 0.0)
    color_count[2, 4, 4] = 1
    color_sum[3, 4, 4] = (0.0, 0.0, 255.0)
    color_count[3, 4, 4] = 1
    mesh = marching_cubes(VoxelGrid(8, g.bounds, occ, color_sum, color_count))
    reds = (mesh.vertex_colors == (255, 0, 0)).all(axis=1).sum()
    blues = (mesh.vertex_colors == (0, 0, 255)).all(axis=1).sum()
    assert reds + blues == mesh.n_vertices
    assert reds > 0 and blues > 0


def test_uncolored_grid_gets_gray():
    mesh = marching_cubes(sphere_grid(12))
    assert np.all(mesh.vertex_colors == 128)


def test_obj_export_shape_and_determinism():
    m = cube_mesh()
    data = export_mesh(m, "obj")
    assert data == export_mesh(m, "obj")
    lines = data.decode().splitlines()
    assert len([l for l in lines if l.startswith("v ")]) == 8
    assert len([l for l in lines if l.startswith("f ")]) == 12
    assert lines[0] == "mtllib cube.mtl"
    v0 = [l for l in lines if l.startswith("v ")][0].split()
    assert len(v0) == 7  # x y z r g b


def test_mtl_export_lists_face_materials():
    m = cube_mesh()
    mtl = export_mesh(m, "mtl").decode()
    assert mtl.count("newmtl") == 1  # single flat color
    assert "Kd" in mtl
    used = {l.split()[1] for l in export_mesh(m, "obj").decode().splitlines() if l.startswith("usemtl")}
    assert used == {l.split()[1] for l in mtl.splitlines() if l.startswith("newmtl")}


def test_stl_export_binary_layout():
    m = cube_mesh()
    data = export_mesh(m, "stl")
    assert len(data) == 84 + 50 * 12
    (count,) = struct.unpack_from("<I", data, 80)
    assert count == 12
    assert data == export_mesh(m, "stl")


def test_unknown_format_rejected():
    with pytest.raises(UnsupportedFormat):
        export_mesh(cube_mesh(), "fbx")


def test_obj_import_round_trips_export():
    m = cube_mesh()
    back = import_obj(export_mesh(m, "obj"))
    assert back.part_id == "cube"
    np.testing.assert_allclose(back.vertices, m.vertices, atol=1e-6)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.vertex_colors, m.vertex_colors)  # 4dp survives 1/255 steps


def test_obj_import_foreign_variants():
    text = "\n".join(
        [
            "# comment",
            "o thing",
            "v 0 0 0",
            "v 1 0 0",
            "v 1 1 0",
            "v 0 1 0",
            "vn 0 0 1",
            "f 1/1/1 2/2/1 3/3/1 4/4/1",  # quad with texture/normal refs
            "f -4 -1 -2",  # negative indices
        ]
    ).encode()
    m = import_obj(text)
    assert m.part_id == "thing"
    assert m.n_vertices == 4
    assert [tuple(f) for f in m.triangles] == [(0, 1, 2), (0, 2, 3), (0, 3, 2)]
    assert (m.vertex_colors == 180).all()  # no colors in file -> neutral gray
    assert import_obj(text, part_id="renamed").part_id == "renamed"


def test_obj_import_rejects_garbage():
    with pytest.raises(UnsupportedFormat):
        import_obj(b"\xff\xfe not text")
    with pytest.raises(UnsupportedFormat):
        import_obj(b"o empty\n")
    with pytest.raises(UnsupportedFormat):
        import_obj(b"v 1 2\n")
    with pytest.raises(UnsupportedFormat):
        import_obj(b"v a b c\n")


def test_transform_scales_bbox():
    m = cube_mesh()
    t = transform_mesh(m, 2.0, (1.0, 0.0, -1.0))
    lo, hi = t.bbox()
    assert np.allclose(lo, [1.0, 0.0, -1.0])
    assert np.allclose(hi, [3.0, 2.0, 1.0])
    with pytest.raises(BadRange):
        transform_mesh(m, 0.0, (0, 0, 0))
