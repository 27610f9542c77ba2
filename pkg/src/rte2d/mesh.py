"""Conforming triangular meshes of a rectangular domain.

A mesh is stored as flat numpy arrays (struct-of-arrays): vertex
coordinates, triangle->vertex connectivity (counterclockwise), and an edge
table with adjacency and outward normals. Local edge `s` of a triangle
connects its local vertices `s` and `(s+1) % 3`; the stored edge normal
points out of `edge_left`, so the outward normal seen from a triangle is
the stored normal times `tri_edge_sign`.

Meshes are immutable after construction (arrays are write-protected) and
safe to share across workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

#: Sentinel for "no neighbor" in edge/neighbor tables.
BOUNDARY = -1


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (nv, 2) float
    triangles: np.ndarray  # (nt, 3) int, counterclockwise
    tri_edges: np.ndarray  # (nt, 3) int, edge id of local edge s
    tri_edge_sign: np.ndarray  # (nt, 3) +1 where triangle == edge_left
    tri_neighbors: np.ndarray  # (nt, 3) neighbor across local edge, or BOUNDARY
    tri_area: np.ndarray  # (nt,)
    tri_h: np.ndarray  # (nt,) longest edge per triangle
    edge_vertices: np.ndarray  # (ne, 2) oriented as seen from edge_left
    edge_left: np.ndarray  # (ne,)
    edge_right: np.ndarray  # (ne,) triangle id or BOUNDARY
    edge_normal: np.ndarray  # (ne, 2) unit, outward from edge_left
    edge_length: np.ndarray  # (ne,)
    h: float
    level: int = 0

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_edges(self):
        return self.edge_vertices.shape[0]

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_right == BOUNDARY)

    def total_area(self):
        return float(self.tri_area.sum())


@dataclass(frozen=True)
class EdgeClassification:
    """Per-triangle upwind classification for one transport direction."""

    omega: np.ndarray
    omega_dot_n: np.ndarray  # (nt, 3) outward-normal components
    inflow: np.ndarray  # (nt, 3) bool; complement is the outflow set

    @property
    def outflow(self):
        return ~self.inflow


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def build_mesh(vertices, triangles, level=0) -> TriangleMesh:
    """Assemble the full mesh structure from vertices and triangle cells.

    Validates counterclockwise orientation, conformity (each edge shared by
    at most two triangles, with opposite orientations), and normal lengths.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must be an (nv, 2) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be an (nt, 3) array")
    if not np.isfinite(vertices).all():
        raise MeshError("vertex coordinates must be finite")
    nt = triangles.shape[0]
    if len({(a, b, c) for a, b, c in map(tuple, np.sort(triangles, axis=1))}) != nt:
        raise MeshError("duplicate triangles")
    if (np.sort(triangles, axis=1)[:, :-1] == np.sort(triangles, axis=1)[:, 1:]).any():
        raise MeshError("triangle with repeated vertex ids")

    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if (area <= 0).any():
        bad = int(np.argmax(area <= 0))
        raise MeshError(f"triangle {bad} is degenerate or clockwise (signed area {area[bad]:g})")

    # Edge table from the 3*nt directed local edges.
    pairs = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    sorted_pairs = np.sort(pairs, axis=1)
    _, inverse, counts = np.unique(
        sorted_pairs, axis=0, return_inverse=True, return_counts=True
    )
    if (counts > 2).any():
        raise MeshError("nonconforming mesh: an edge is shared by more than two triangles")
    ne = counts.shape[0]
    order = np.argsort(inverse, kind="stable")
    starts = np.searchsorted(inverse[order], np.arange(ne))
    first = order[starts]
    edge_left = first // 3
    edge_vertices = pairs[first]
    edge_right = np.full(ne, BOUNDARY, dtype=np.int64)
    interior = counts == 2
    second = order[starts[interior] + 1]
    edge_right[interior] = second // 3
    if not (pairs[second] == edge_vertices[interior][:, ::-1]).all():
        raise MeshError("interior edge traversed in the same direction by both triangles")

    tri_edges = inverse.reshape(nt, 3)
    tri_edge_sign = np.where(edge_left[tri_edges] == np.arange(nt)[:, None], 1, -1)
    tri_neighbors = np.where(
        tri_edge_sign == 1, edge_right[tri_edges], edge_left[tri_edges]
    )

    tvec = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    edge_length = np.hypot(tvec[:, 0], tvec[:, 1])
    if (edge_length <= 0).any():
        raise MeshError("zero-length edge")
    edge_normal = np.column_stack([tvec[:, 1], -tvec[:, 0]]) / edge_length[:, None]

    tri_h = edge_length[tri_edges].max(axis=1)

    return TriangleMesh(
        vertices=_freeze(vertices),
        triangles=_freeze(triangles),
        tri_edges=_freeze(tri_edges),
        tri_edge_sign=_freeze(tri_edge_sign),
        tri_neighbors=_freeze(tri_neighbors),
        tri_area=_freeze(area),
        tri_h=_freeze(tri_h),
        edge_vertices=_freeze(edge_vertices),
        edge_left=_freeze(edge_left),
        edge_right=_freeze(edge_right),
        edge_normal=_freeze(edge_normal),
        edge_length=_freeze(edge_length),
        h=float(edge_length.max()),
        level=level,
    )


def build_structured_unit_square(n: int) -> TriangleMesh:
    """Crisscross mesh of (0,1)^2: n*n squares, each cut from lower-left to
    upper-right, giving 2*n^2 triangles with h = sqrt(2)/n."""
    if n < 1:
        raise ValueError(f"grid parameter must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ur, ul = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))
    mesh = build_mesh(vertices, np.array(tris), level=0)
    if abs(mesh.total_area() - 1.0) > 1e-10:
        raise MeshError("structured mesh does not tile the unit square")
    return mesh


def refine_regular(mesh: TriangleMesh) -> TriangleMesh:
    """Split every triangle into four via edge midpoints (red refinement).

    Midpoints are shared through the edge table, so the result is conforming
    by construction and each child h is half the parent's.
    """
    nv = mesh.n_vertices
    mids = 0.5 * (
        mesh.vertices[mesh.edge_vertices[:, 0]] + mesh.vertices[mesh.edge_vertices[:, 1]]
    )
    vertices = np.vstack([mesh.vertices, mids])

    a, b, c = mesh.triangles[:, 0], mesh.triangles[:, 1], mesh.triangles[:, 2]
    mab = nv + mesh.tri_edges[:, 0]
    mbc = nv + mesh.tri_edges[:, 1]
    mca = nv + mesh.tri_edges[:, 2]
    children = np.empty((mesh.n_triangles, 4, 3), dtype=np.int64)
    children[:, 0] = np.column_stack([a, mab, mca])
    children[:, 1] = np.column_stack([mab, b, mbc])
    children[:, 2] = np.column_stack([mca, mbc, c])
    children[:, 3] = np.column_stack([mab, mbc, mca])

    fine = build_mesh(vertices, children.reshape(-1, 3), level=mesh.level + 1)
    if abs(fine.total_area() - mesh.total_area()) > 1e-10 * mesh.total_area():
        raise MeshError("refinement changed the total area")
    return fine


def classify_edges(mesh: TriangleMesh, omega, eps_n: float = 1e-12) -> EdgeClassification:
    """Split each triangle's edges into inflow and outflow for direction omega.

    An edge with outward normal n is inflow when omega . n < -eps_n;
    tangential edges (|omega . n| <= eps_n) land in the outflow set.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (2,) or abs(np.hypot(*omega) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit 2-vector")
    dot = (mesh.edge_normal[mesh.tri_edges] @ omega) * mesh.tri_edge_sign
    return EdgeClassification(omega=omega, omega_dot_n=dot, inflow=dot < -eps_n)


def opposite_local_edge(mesh: TriangleMesh):
    """For (k, s): local index of the shared edge inside the neighbor.

    Entries across boundary edges are -1. Both triangles see the same edge
    id; each records which side of it they are on via tri_edge_sign.
    """
    loc = np.full((mesh.n_edges, 2), -1, dtype=np.int64)
    for s in range(3):
        e = mesh.tri_edges[:, s]
        side = (mesh.tri_edge_sign[:, s] < 0).astype(np.int64)
        loc[e, side] = s
    own_side = (mesh.tri_edge_sign < 0).astype(np.int64)
    return loc[mesh.tri_edges, 1 - own_side]


def save_mesh(mesh: TriangleMesh, path):
    """Write the plain-text format: `nv nt`, vertex lines, triangle lines."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def load_mesh(path) -> TriangleMesh:
    """Read the plain-text format written by `save_mesh`."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise MeshError(f"{path}: missing header")
    nv, nt = int(tokens[0]), int(tokens[1])
    need = 2 + 2 * nv + 3 * nt
    if len(tokens) != need:
        raise MeshError(f"{path}: expected {need} tokens, found {len(tokens)}")
    vertices = np.array(tokens[2 : 2 + 2 * nv], dtype=float).reshape(nv, 2)
    triangles = np.array(tokens[2 + 2 * nv :], dtype=np.int64).reshape(nt, 3)
    if triangles.min() < 0 or triangles.max() >= nv:
        raise MeshError(f"{path}: triangle vertex id out of range")
    return build_mesh(vertices, triangles)
