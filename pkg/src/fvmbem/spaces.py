"""Discrete spaces S1(T), P0(E_Gamma), P0(T*) and projections onto them."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import gauss_legendre, triangle_rule

# int_{Q_i} phi_j / |K| for the sub-quadrilateral Q_i of vertex i in K
_CHI_LOCAL = np.array([[22.0, 7.0, 7.0],
                       [7.0, 22.0, 7.0],
                       [7.0, 7.0, 22.0]]) / 108.0


@dataclass(eq=False)
class NodalFunction:
    """Element of S1(T): one value per vertex."""

    mesh: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.n_vertices,):
            raise ValueError("one coefficient per vertex expected")

    def __call__(self, points):
        return evaluate_nodal(self.mesh, self.coeffs, points)


@dataclass(eq=False)
class BoundaryDensity:
    """Element of P0(E_Gamma): one value per boundary edge."""

    mesh: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (len(self.mesh.boundary_edges),):
            raise ValueError("one coefficient per boundary edge expected")


@dataclass(eq=False)
class BoxFunction:
    """Element of P0(T*): one value per box."""

    dual: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.dual.mesh.n_vertices,):
            raise ValueError("one coefficient per box expected")

    def __call__(self, points):
        return evaluate_box(self.dual.mesh, self.coeffs, points)


def evaluate_nodal(mesh, coeffs, points):
    idx, bary = mesh.locate(points)
    if np.any(idx < 0):
        raise ValueError("point outside the mesh")
    return (coeffs[mesh.triangles[idx]] * bary).sum(axis=1)


def evaluate_box(mesh, coeffs, points):
    # inside K the box of vertex k is where its barycentric coordinate is largest
    idx, bary = mesh.locate(points)
    if np.any(idx < 0):
        raise ValueError("point outside the mesh")
    k = np.argmax(bary, axis=1)
    return coeffs[mesh.triangles[idx, k]]


def interpolate_to_boxes(v, dual):
    """I_h^*: the box value of V_i is v(a_i)."""
    if v.mesh is not dual.mesh:
        raise ValueError("mesh mismatch")
    return BoxFunction(dual, v.coeffs.copy())


def chi_mass_matrix(mesh):
    """Matrix with entries ``M[i, j] = int_{V_i} phi_j``, computed exactly."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    vals = (mesh.signed_areas[:, None, None] * _CHI_LOCAL).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def chi_inner_product(v, w, dual=None):
    """``<v, I_h^* w>`` for nodal functions ``v`` and ``w``."""
    if v.mesh is not w.mesh:
        raise ValueError("mesh mismatch")
    M = chi_mass_matrix(v.mesh)
    return float(w.coeffs @ (M @ v.coeffs))


def fem_mass_matrix(mesh):
    t = mesh.triangles
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    vals = (mesh.signed_areas[:, None, None] * local).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def fem_stiffness_matrix(mesh):
    g = mesh.basis_gradients
    local = np.einsum("kid,kjd->kij", g, g) * mesh.signed_areas[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def triangle_quadrature(mesh, degree):
    """Physical points ``(M, q, 2)``, barycentrics ``(q, 3)`` and weights ``(M, q)``."""
    bary, w = triangle_rule(degree)
    pts = np.einsum("qk,mkd->mqd", bary, mesh.vertices[mesh.triangles])
    return pts, bary, mesh.signed_areas[:, None] * w[None, :]


def project_L2_nodal(mesh, g, degree=6):
    """L2-orthogonal projection of a field ``g(points)`` onto S1(T)."""
    pts, bary, w = triangle_quadrature(mesh, degree)
    vals = np.asarray(g(pts.reshape(-1, 2)), dtype=float).reshape(w.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite values in projected field")
    local = np.einsum("mq,qk->mk", vals * w, bary)
    rhs = np.zeros(mesh.n_vertices)
    np.add.at(rhs, mesh.triangles.ravel(), local.ravel())
    M = fem_mass_matrix(mesh).tocsc()
    lu = spla.splu(M)
    coeffs = lu.solve(rhs)
    if not np.all(np.isfinite(coeffs)):
        raise np.linalg.LinAlgError("singular mass matrix")
    return NodalFunction(mesh, coeffs)


def edge_quadrature(p0, p1, n_points=8):
    """Gauss points ``(E, q, 2)`` and weights ``(E, q)`` on segments p0 -> p1."""
    s, w = gauss_legendre(n_points)
    pts = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
    lengths = np.linalg.norm(p1 - p0, axis=1)
    return pts, lengths[:, None] * w[None, :]


def project_boundary_mean(mesh, g, n_points=8):
    """Edge-wise integral mean of a boundary field ``g(points, normals)``."""
    be = mesh.boundary_edges
    pts, w = edge_quadrature(mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]],
                             n_points)
    normals = np.repeat(mesh.boundary_normals[:, None, :], pts.shape[1], axis=1)
    vals = np.asarray(g(pts.reshape(-1, 2), normals.reshape(-1, 2)),
                      dtype=float).reshape(w.shape)
    return BoundaryDensity(mesh, (vals * w).sum(axis=1) / mesh.boundary_lengths)


def box_interpolation_defect(mesh, v):
    """Per triangle ``||v - I_h^* v||_{L2(K)}`` for a nodal function."""
    bary, w = triangle_rule(2)
    # sub-triangles (a_i, m_ij, s), (a_i, s, m_ik) in barycentric coordinates
    e = np.eye(3)
    s = np.full(3, 1.0 / 3.0)
    total = np.zeros(mesh.n_triangles)
    vals = v.coeffs[mesh.triangles]  # (M, 3)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        mij, mik = 0.5 * (e[i] + e[j]), 0.5 * (e[i] + e[k])
        for corners in ((e[i], mij, s), (e[i], s, mik)):
            lam = bary @ np.array(corners)  # (q, 3) barycentric in K
            diff = vals @ lam.T - vals[:, [i]]  # (M, q)
            total += (mesh.signed_areas / 6.0) * (diff ** 2 @ w)
    return np.sqrt(total)
