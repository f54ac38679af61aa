"""Triangle meshes: isosurface extraction, validation, and export.

Mesh extraction runs standard 256-case marching cubes (via scikit-image's
Lewiner implementation) over the 0/1 occupancy field at iso 0.5, so vertices
land on cell-edge midpoints. Faces are reoriented so outward normals give
positive signed volume. One caveat inherent to binary fields: two occupied
voxels touching only along an edge produce a non-manifold "pinch" edge shared
by four faces; the blob-like grids the pipeline carves do not hit this, and
the watertightness validator reports it when something does.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure

from .errors import BadRange, EmptyGrid, UnsupportedFormat
from .reconstruct import VoxelGrid

_DEGENERATE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class PartMesh:
    part_id: str
    vertices: np.ndarray       # (V, 3) float64, world units
    triangles: np.ndarray      # (F, 3) int64, CCW seen from outside
    vertex_colors: np.ndarray  # (V, 3) uint8

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        c = np.asarray(self.vertex_colors, dtype=np.uint8).reshape(-1, 3)
        if len(c) != len(v):
            raise BadRange("one color per vertex required")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise BadRange("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "vertex_colors", c)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def triangle_areas(mesh: PartMesh) -> np.ndarray:
    tri = mesh.vertices[mesh.triangles]
    return 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
    )


def surface_area(mesh: PartMesh) -> float:
    return float(triangle_areas(mesh).sum())


def signed_volume(mesh: PartMesh) -> float:
    """Positive when faces wind CCW seen from outside (outward normals)."""
    tri = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def _undirected_edges(mesh: PartMesh) -> np.ndarray:
    e = np.concatenate(
        [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]
    )
    return np.sort(e, axis=1)


def is_watertight(mesh: PartMesh) -> bool:
    """Closed orientable surface: every undirected edge is shared by exactly
    two faces, traversed once in each direction."""
    if mesh.n_triangles == 0:
        return False
    directed = np.concatenate(
        [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]
    )
    _, counts = np.unique(_undirected_edges(mesh), axis=0, return_counts=True)
    if not np.all(counts == 2):
        return False
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    return bool(np.all(dcounts == 1))


def euler_characteristic(mesh: PartMesh) -> int:
    if mesh.n_triangles == 0:
        return 0
    n_v = len(np.unique(mesh.triangles))
    n_e = len(np.unique(_undirected_edges(mesh), axis=0))
    return n_v - n_e + mesh.n_triangles


def transform_mesh(mesh: PartMesh, scale: float, translation) -> PartMesh:
    if scale <= 0:
        raise BadRange("scale must be > 0")
    t = np.asarray(translation, dtype=np.float64)
    return PartMesh(
        part_id=mesh.part_id,
        vertices=mesh.vertices * scale + t,
        triangles=mesh.triangles,
        vertex_colors=mesh.vertex_colors,
    )


def marching_cubes(grid: VoxelGrid, iso: float = 0.5, part_id: str = "part") -> PartMesh:
    """Extract the iso-surface of the occupancy field as a colored mesh.

    The grid is padded with one empty layer so occupied sets touching the
    bounds still close (capped at the boundary). Vertex colors come from the
    nearest colored voxel; uncolored grids get flat gray.
    """
    if not grid.occupancy.any():
        raise EmptyGrid("no occupied voxels to mesh")
    vol = np.pad(grid.occupancy, 1).astype(np.float32)
    verts, faces, _, _ = measure.marching_cubes(vol, level=iso)
    faces = faces[:, ::-1].astype(np.int64)  # reorient: outward normals
    world = grid.bounds.lo + (verts - 0.5) * grid.cell

    # drop degenerate faces, then unreferenced vertices
    tri = world[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    faces = faces[areas > _DEGENERATE_AREA]
    used = np.unique(faces)
    remap = np.full(len(world), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    world = world[used]
    faces = remap[faces]

    colored = np.argwhere(grid.color_count > 0)
    if len(colored):
        centers = grid.bounds.lo + (colored + 0.5) * grid.cell
        sums = grid.color_sum[colored[:, 0], colored[:, 1], colored[:, 2]]
        counts = grid.color_count[colored[:, 0], colored[:, 1], colored[:, 2]]
        palette = np.clip(np.round(sums / counts[:, None]), 0, 255).astype(np.uint8)
        _, nearest = cKDTree(centers).query(world)
        colors = palette[nearest]
    else:
        colors = np.full((len(world), 3), 128, np.uint8)
    return PartMesh(part_id=part_id, vertices=world, triangles=faces, vertex_colors=colors)


def import_obj(data: bytes, part_id: str | None = None) -> PartMesh:
    """Parse OBJ text back into a mesh.

    Covers what export_mesh writes (v lines with optional vertex colors,
    triangle f lines) plus the common variants external reconstructors emit:
    `f a/b/c` index triplets (only the vertex index is used), negative
    indices, and polygon faces (fan-triangulated). Vertices without colors
    get a neutral gray.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UnsupportedFormat("mesh is not OBJ text") from exc
    verts: list[list[float]] = []
    colors: list[list[int]] = []
    faces: list[tuple[int, int, int]] = []
    name = None
    try:
        for line in text.splitlines():
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            tag = fields[0]
            if tag == "o" and len(fields) > 1 and name is None:
                name = fields[1]
            elif tag == "v":
                if len(fields) < 4:
                    raise UnsupportedFormat(f"short vertex line: {line!r}")
                verts.append([float(x) for x in fields[1:4]])
                if len(fields) >= 7:
                    colors.append([int(round(float(c) * 255)) for c in fields[4:7]])
                else:
                    colors.append([180, 180, 180])
            elif tag == "f":
                idx = []
                for tok in fields[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise UnsupportedFormat(f"face with < 3 vertices: {line!r}")
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    except ValueError as exc:
        raise UnsupportedFormat(f"malformed OBJ: {exc}") from exc
    if not verts:
        raise UnsupportedFormat("OBJ contains no vertices")
    return PartMesh(
        part_id=part_id or name or "part",
        vertices=np.asarray(verts, np.float64),
        triangles=np.asarray(faces, np.int64).reshape(-1, 3),
        vertex_colors=np.clip(np.asarray(colors), 0, 255).astype(np.uint8),
    )


def _face_material(mesh: PartMesh, face: np.ndarray) -> str:
    rgb = mesh.vertex_colors[face].mean(axis=0)
    q = (np.clip(rgb, 0, 255).astype(np.uint8) >> 4).astype(np.uint8)
    return f"m{q[0]:x}{q[1]:x}{q[2]:x}"


def export_mesh(mesh: PartMesh, fmt: str) -> bytes:
    """Serialize byte-deterministically.

    obj: v lines carry x y z r g b (colors 0..1); faces reference a per-face
         material from the companion mtl (colors quantized to 16 levels per
         channel) for viewers that ignore vertex colors.
    mtl: the companion material library.
    stl: binary little-endian.
    """
    if fmt == "obj":
        lines = [f"mtllib {mesh.part_id}.mtl", f"o {mesh.part_id}"]
        for v, c in zip(mesh.vertices, mesh.vertex_colors):
            lines.append(
                f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f} "
                f"{c[0] / 255:.4f} {c[1] / 255:.4f} {c[2] / 255:.4f}"
            )
        current = None
        for face in mesh.triangles:
            mat = _face_material(mesh, face)
            if mat != current:
                lines.append(f"usemtl {mat}")
                current = mat
            lines.append(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}")
        return ("\n".join(lines) + "\n").encode()
    if fmt == "mtl":
        mats = sorted({_face_material(mesh, f) for f in mesh.triangles})
        lines = []
        for m in mats:
            q = [int(ch, 16) for ch in m[1:]]
            kd = [(x * 16 + 8) / 255 for x in q]
            lines += [f"newmtl {m}", f"Kd {kd[0]:.4f} {kd[1]:.4f} {kd[2]:.4f}"]
        return ("\n".join(lines) + "\n").encode() if lines else b""
    if fmt == "stl":
        tri = mesh.vertices[mesh.triangles]
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.divide(normals, norms, out=np.zeros_like(normals), where=norms > 0)
        out = [struct.pack("<80sI", f"partforge {mesh.part_id}".encode()[:80], len(tri))]
        for n, t in zip(normals.astype(np.float32), tri.astype(np.float32)):
            out.append(struct.pack("<12fH", *n, *t[0], *t[1], *t[2], 0))
        return b"".join(out)
    raise UnsupportedFormat(f"format {fmt!r} not supported (obj, mtl, stl)")
