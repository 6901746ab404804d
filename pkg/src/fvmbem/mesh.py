"""Primal triangulations, their dual box meshes and boundary classification.

Triangles are stored counterclockwise. Local edge ``e`` of a triangle joins
local vertices ``e`` and ``(e + 1) % 3``. Inside each triangle the dual mesh
consists of three segments, one per local edge, running from the edge
midpoint to the barycenter; they separate the three vertex regions.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

IN, OUT = 0, 1


class MeshError(ValueError):
    pass


@dataclass(eq=False)
class PrimalMesh:
    """Conforming triangulation of a polygonal domain.

    Parameters
    ----------
    vertices : (N, 2) array
    triangles : (M, 3) int array, counterclockwise
    spacing : float, optional
        Grid spacing of structured meshes (the ``h`` used by the experiments).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    spacing: float = float("nan")
    edges: np.ndarray = field(init=False, repr=False)
    edge_triangles: np.ndarray = field(init=False, repr=False)
    triangle_edges: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if np.any(self.signed_areas <= 0.0):
            raise MeshError("degenerate or clockwise triangle")
        self._build_topology()
        if self.diameter >= 1.0:
            raise MeshError(f"diam(Omega) = {self.diameter:.3g} must be < 1")

    def _build_topology(self):
        tri = self.triangles
        local = np.stack([tri, np.roll(tri, -1, axis=1)], axis=2)  # (M, 3, 2)
        flat = local.reshape(-1, 2)
        key = np.sort(flat, axis=1)
        edges, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise MeshError("non-manifold edge shared by more than two triangles")
        self.edges = edges
        self.triangle_edges = inverse.reshape(-1, 3)
        edge_tri = -np.ones((len(edges), 2), dtype=np.int64)
        owner = np.repeat(np.arange(len(tri)), 3)
        first = np.ones(len(edges), dtype=bool)
        for k, e in enumerate(inverse):
            if first[e]:
                edge_tri[e, 0] = owner[k]
                first[e] = False
            else:
                edge_tri[e, 1] = owner[k]
        self.edge_triangles = edge_tri
        # boundary edges keep the orientation of their triangle, i.e. CCW along Gamma
        bmask = counts[inverse] == 1
        directed = flat[bmask]
        nxt = {}
        for a, b in directed:
            if a in nxt:
                raise MeshError("boundary is not a simple closed loop")
            nxt[a] = b
        start = int(directed[np.lexsort((directed[:, 1], directed[:, 0]))[0], 0])
        loop = [start]
        while True:
            b = nxt[loop[-1]]
            if b == start:
                break
            loop.append(b)
            if len(loop) > len(directed):
                raise MeshError("boundary is not a simple closed loop")
        if len(loop) != len(directed):
            raise MeshError("boundary consists of more than one loop")
        loop = np.array(loop, dtype=np.int64)
        self.boundary_edges = np.column_stack([loop, np.roll(loop, -1)])

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @property
    def area(self):
        return float(self.signed_areas.sum())

    @cached_property
    def diameter(self):
        nodes = self.vertices[self.boundary_edges[:, 0]]
        diff = nodes[:, None, :] - nodes[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    @cached_property
    def triangle_diameters(self):
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return lengths.max(axis=1)

    @property
    def h(self):
        """Maximal triangle diameter."""
        return float(self.triangle_diameters.max())

    @cached_property
    def barycenters(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self):
        """Gradients of the three hat functions on each triangle, ``(M, 3, 2)``."""
        p = self.vertices[self.triangles]
        # grad(lambda_k) = rot(opposite edge) / (2 |K|)
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        grad = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
        return grad / (2.0 * self.signed_areas[:, None, None])

    @cached_property
    def vertex_triangles(self):
        """List of adjacent triangle indices per vertex."""
        star = [[] for _ in range(self.n_vertices)]
        for k, t in enumerate(self.triangles):
            for v in t:
                star[v].append(k)
        return [np.array(s, dtype=np.int64) for s in star]

    @cached_property
    def boundary_nodes(self):
        return self.boundary_edges[:, 0].copy()

    @cached_property
    def boundary_lengths(self):
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def boundary_normals(self):
        """Outward unit normals of the boundary edges."""
        p = self.vertices[self.boundary_edges]
        d = (p[:, 1] - p[:, 0]) / self.boundary_lengths[:, None]
        return np.column_stack([d[:, 1], -d[:, 0]])

    @cached_property
    def boundary_midpoints(self):
        return self.vertices[self.boundary_edges].mean(axis=1)

    def locate(self, points, tol=1e-12):
        """Triangle index and barycentric coordinates of each point.

        Points outside the mesh get index -1. Brute force, in chunks.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.vertices[self.triangles]
        a = p[:, 0]
        d1 = p[:, 1] - a
        d2 = p[:, 2] - a
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        index = -np.ones(len(points), dtype=np.int64)
        bary = np.zeros((len(points), 3))
        chunk = max(1, 2_000_000 // max(1, self.n_triangles))
        for lo in range(0, len(points), chunk):
            x = points[lo:lo + chunk]
            r = x[:, None, :] - a[None]
            l1 = (r[..., 0] * d2[:, 1] - r[..., 1] * d2[:, 0]) / det
            l2 = (d1[:, 0] * r[..., 1] - d1[:, 1] * r[..., 0]) / det
            l0 = 1.0 - l1 - l2
            inside = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
            hit = inside.any(axis=1)
            k = np.argmax(inside, axis=1)
            rows = np.arange(len(x))
            index[lo:lo + chunk] = np.where(hit, k, -1)
            bary[lo:lo + chunk] = np.column_stack(
                [l0[rows, k], l1[rows, k], l2[rows, k]])
        return index, bary

    def to_vtk(self, path, point_data=None, title="fvmbem"):
        """Write a legacy ASCII VTK unstructured grid."""
        lines = ["# vtk DataFile Version 3.0", title, "ASCII",
                 "DATASET UNSTRUCTURED_GRID",
                 f"POINTS {self.n_vertices} double"]
        lines += [f"{x:.16g} {y:.16g} 0" for x, y in self.vertices]
        lines.append(f"CELLS {self.n_triangles} {4 * self.n_triangles}")
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        lines.append(f"CELL_TYPES {self.n_triangles}")
        lines += ["5"] * self.n_triangles
        if point_data:
            lines.append(f"POINT_DATA {self.n_vertices}")
            for name, values in point_data.items():
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f"{v:.16g}" for v in np.asarray(values, dtype=float)]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _tiles(length, spacing):
    n = length / spacing
    m = int(round(n))
    if spacing <= 0 or m < 1 or abs(n - m) > 1e-9 * max(1.0, n):
        raise MeshError(f"spacing {spacing} does not tile length {length}")
    return m


def _structured(lower, n, spacing, keep=None):
    """Square grid split along bottom-left to top-right diagonals."""
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[row j, col i]
    xs = lower + spacing * np.arange(n + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            if keep is not None and not keep(lower + spacing * (i + 0.5),
                                             lower + spacing * (j + 0.5)):
                continue
            v00, v10 = idx[j, i], idx[j, i + 1]
            v01, v11 = idx[j + 1, i], idx[j + 1, i + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.array(tris, dtype=np.int64)
    used = np.unique(tris)
    renum = -np.ones(len(vertices), dtype=np.int64)
    renum[used] = np.arange(len(used))
    return vertices[used], renum[tris]


def build_uniform_square_mesh(lower, upper, spacing):
    """Structured mesh of the square ``[lower, upper]^2``.

    Each grid square is cut along its bottom-left to top-right diagonal.
    """
    n = _tiles(upper - lower, spacing)
    vertices, triangles = _structured(lower, n, spacing)
    return PrimalMesh(vertices, triangles, spacing=float(spacing))


def build_lshape_mesh(spacing):
    """Structured mesh of ``(-1/4, 1/4)^2 minus [0, 1/4] x [-1/4, 0]``."""
    n = _tiles(0.5, spacing)
    if n % 2:
        raise MeshError("spacing must put the reentrant corner on a grid node")
    vertices, triangles = _structured(
        -0.25, n, spacing, keep=lambda x, y: not (x > 0 and y < 0))
    return PrimalMesh(vertices, triangles, spacing=float(spacing))


def refine_uniform(mesh):
    """Red refinement: every triangle is split into four similar children."""
    nv = mesh.n_vertices
    mids = nv + mesh.triangle_edges  # (M, 3), midpoint of local edge e
    midpoints = mesh.vertices[mesh.edges].mean(axis=1)
    vertices = np.vstack([mesh.vertices, midpoints])
    t = mesh.triangles
    m01, m12, m20 = mids[:, 0], mids[:, 1], mids[:, 2]
    children = np.stack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    return PrimalMesh(vertices, children, spacing=0.5 * mesh.spacing)


@dataclass(eq=False)
class DualMesh:
    """Vertex-centered box mesh.

    Attributes
    ----------
    box_areas : (N,) areas of the boxes V_i
    subquads : (M, 3, 4, 2) corners (a_i, m_ij, s, m_ik) of the part of V_i in K
    seg_points : (M, 3, 2, 2) dual segment of local edge e: midpoint -> barycenter
    seg_from, seg_to : (M, 3) vertices on either side; the normal points from
        ``V_from`` into ``V_to``
    seg_normals : (M, 3, 2) unit normals, outward for ``V_from``
    seg_lengths : (M, 3)
    seg_edge : (M, 3) primal edge crossed by the segment
    bhalf_vertex : (B, 2) owners of the two halves of each boundary edge
    bhalf_points : (B, 2, 2, 2) endpoints of each half
    """

    mesh: PrimalMesh
    box_areas: np.ndarray
    subquads: np.ndarray
    seg_points: np.ndarray
    seg_from: np.ndarray
    seg_to: np.ndarray
    seg_normals: np.ndarray
    seg_lengths: np.ndarray
    seg_edge: np.ndarray
    bhalf_vertex: np.ndarray
    bhalf_points: np.ndarray

    @cached_property
    def subtriangles(self):
        """Each sub-quadrilateral split into (a_i, m_ij, s) and (a_i, s, m_ik).

        Returns corners of shape ``(M, 3, 2, 3, 2)`` and areas ``(M, 3, 2)``.
        """
        q = self.subquads
        t1 = np.stack([q[:, :, 0], q[:, :, 1], q[:, :, 2]], axis=2)
        t2 = np.stack([q[:, :, 0], q[:, :, 2], q[:, :, 3]], axis=2)
        corners = np.stack([t1, t2], axis=2)
        d1 = corners[..., 1, :] - corners[..., 0, :]
        d2 = corners[..., 2, :] - corners[..., 0, :]
        areas = 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
        return corners, areas

    def interface(self, i, j):
        """Segments of tau_ij with normals pointing out of V_i.

        Returns a list of ``(p0, p1, normal)`` tuples.
        """
        out = []
        hit = ((self.seg_from == i) & (self.seg_to == j)) | (
            (self.seg_from == j) & (self.seg_to == i))
        for k, e in zip(*np.nonzero(hit)):
            n = self.seg_normals[k, e]
            if self.seg_from[k, e] == j:
                n = -n
            p = self.seg_points[k, e]
            out.append((p[0].copy(), p[1].copy(), n.copy()))
        return out

    def boundary_length(self, i):
        """Length of the part of Gamma on the boundary of V_i."""
        half = 0.5 * self.mesh.boundary_lengths
        return float(half[self.bhalf_vertex[:, 0] == i].sum()
                     + half[self.bhalf_vertex[:, 1] == i].sum())


def build_dual(mesh):
    """Construct the box mesh from barycenters and edge midpoints."""
    p = mesh.vertices[mesh.triangles]  # (M, 3, 2)
    s = p.mean(axis=1)
    mid = 0.5 * (p + np.roll(p, -1, axis=1))  # mid[:, e] of local edge e
    # vertex k touches local edges k (k -> k+1) and k-1 (k-1 -> k)
    subquads = np.stack([
        p, mid, np.broadcast_to(s[:, None], p.shape), np.roll(mid, 1, axis=1)
    ], axis=2)
    seg_points = np.stack([mid, np.broadcast_to(s[:, None], mid.shape)], axis=2)
    t = seg_points[:, :, 1] - seg_points[:, :, 0]
    lengths = np.linalg.norm(t, axis=2)
    normals = np.stack([t[..., 1], -t[..., 0]], axis=-1) / lengths[..., None]
    vfrom = mesh.triangles
    vto = np.roll(mesh.triangles, -1, axis=1)
    towards = mesh.vertices[vto] - mesh.vertices[vfrom]
    flip = (normals * towards).sum(-1) < 0
    normals[flip] *= -1.0

    box_areas = np.zeros(mesh.n_vertices)
    np.add.at(box_areas, mesh.triangles.ravel(),
              np.repeat(mesh.signed_areas / 3.0, 3))

    be = mesh.boundary_edges
    a, b = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    m = 0.5 * (a + b)
    bhalf_points = np.stack([np.stack([a, m], 1), np.stack([m, b], 1)], 1)
    return DualMesh(mesh, box_areas, subquads, seg_points, vfrom.copy(),
                    vto.copy(), normals, lengths, mesh.triangle_edges.copy(),
                    be.copy(), bhalf_points)


@dataclass(eq=False)
class BoundaryClassification:
    """Inflow/outflow tag per boundary edge (``IN`` or ``OUT``)."""

    tags: np.ndarray

    @property
    def outflow(self):
        return self.tags == OUT

    @property
    def inflow(self):
        return self.tags == IN


def classify_boundary(mesh, velocity):
    """Tag each boundary edge by the sign of ``b . n`` at its midpoint."""
    b = np.asarray(velocity(mesh.boundary_midpoints), dtype=float)
    bn = (b * mesh.boundary_normals).sum(axis=1)
    return BoundaryClassification(np.where(bn < 0.0, IN, OUT))
