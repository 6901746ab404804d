"""Finite volume bilinear forms (plain and upwind) and right-hand sides.

Rows of every assembled matrix correspond to boxes ``V_i`` (test side),
columns to nodal hat functions ``phi_j`` (trial side).
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_legendre, triangle_rule

SCHEMES = ("none", "full", "steerable")


@dataclass(eq=False)
class CoefficientSet:
    """Model parameters, each vectorised over points of shape ``(n, 2)``.

    ``diffusion`` returns ``(n, 2, 2)``, ``velocity`` ``(n, 2)`` and
    ``reaction`` ``(n,)``.
    """

    diffusion: Callable
    velocity: Callable
    reaction: Callable

    def check(self, mesh, degree=2):
        """Sample A and (1/2) div b + c at quadrature points; warn on violations.

        Returns the smallest sampled eigenvalue of A.
        """
        bary, _ = triangle_rule(degree)
        pts = np.einsum("qk,mkd->mqd", bary,
                        mesh.vertices[mesh.triangles]).reshape(-1, 2)
        A = _evaluate(self.diffusion, pts, (len(pts), 2, 2))
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise ValueError("diffusion matrix is not symmetric")
        lam = np.linalg.eigvalsh(A).min()
        if lam <= 0.0:
            warnings.warn("diffusion matrix is not positive definite", stacklevel=2)
        eps = 1e-6
        dbx = (_evaluate(self.velocity, pts + [eps, 0.0], (len(pts), 2))[:, 0]
               - _evaluate(self.velocity, pts - [eps, 0.0], (len(pts), 2))[:, 0])
        dby = (_evaluate(self.velocity, pts + [0.0, eps], (len(pts), 2))[:, 1]
               - _evaluate(self.velocity, pts - [0.0, eps], (len(pts), 2))[:, 1])
        div = (dbx + dby) / (2 * eps)
        c = _evaluate(self.reaction, pts, (len(pts),))
        if np.any(0.5 * div + c <= 0.0):
            warnings.warn("(1/2) div b + c > 0 is violated", stacklevel=2)
        if lam - 0.25 <= 0.0:
            # C_K is unknown; 1 is the worst case of the contraction constant
            warnings.warn("lambda_min(A) - C_K/4 > 0 may fail (C_K := 1)",
                          stacklevel=2)
        return float(lam)


@dataclass(frozen=True)
class UpwindScheme:
    """Upwind variant and the matrix norm used in the local Peclet number.

    ``norm`` is ``"max_entry"`` (largest absolute entry) or ``"row_sum"``
    (the induced infinity norm).
    """

    kind: str = "full"
    norm: str = "max_entry"

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown upwind scheme {self.kind!r}")
        if self.norm not in ("max_entry", "row_sum"):
            raise ValueError(f"unknown matrix norm {self.norm!r}")

    def weight(self, peclet):
        return eval_weight(self, peclet)


def eval_weight(scheme, peclet):
    """Weight function Phi of the upwind scheme, values in [0, 1]."""
    kind = scheme.kind if isinstance(scheme, UpwindScheme) else scheme
    t = np.asarray(peclet, dtype=float)
    if kind == "full":
        out = 0.5 * (np.sign(t) + 1.0)
    elif kind == "steerable":
        with np.errstate(divide="ignore", over="ignore"):
            m = np.minimum(2.0 / np.abs(t), 1.0)
        out = np.where(t < 0.0, 0.5 * m, 1.0 - 0.5 * m)
    else:
        raise ValueError(f"scheme {kind!r} has no weight function")
    return out if out.ndim else float(out)


def _evaluate(fn, pts, shape):
    vals = np.asarray(fn(pts), dtype=float)
    vals = np.broadcast_to(vals, shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite coefficient evaluation")
    return vals


def _matrix_norm(A, kind):
    if kind == "row_sum":
        return np.abs(A).sum(axis=-1).max(axis=-1)
    return np.abs(A).reshape(A.shape[:-2] + (-1,)).max(axis=-1)


@lru_cache(maxsize=8)
def segment_quadrature(dual, n_points=2):
    """Gauss points on the dual segments.

    Returns physical points ``(M, 3, q, 2)``, barycentric coordinates in the
    owning triangle ``(3, q, 3)`` and weights ``(M, 3, q)``.
    """
    s, w = gauss_legendre(n_points)
    e = np.eye(3)
    centre = np.full(3, 1.0 / 3.0)
    lam = np.stack([
        (1 - s)[:, None] * (0.5 * (e[k] + e[(k + 1) % 3]))[None, :]
        + s[:, None] * centre[None, :] for k in range(3)])
    p = dual.mesh.vertices[dual.mesh.triangles]
    pts = np.einsum("eqk,mkd->meqd", lam, p)
    weights = dual.seg_lengths[..., None] * w[None, None, :]
    return pts, lam, weights


@lru_cache(maxsize=8)
def box_quadrature(dual, degree=4):
    """Quadrature on the sub-triangles of every box.

    Returns points ``(M, 3, Q, 2)``, barycentrics in the triangle ``(3, Q, 3)``
    and weights ``(M, 3, Q)``; index 1 is the local vertex owning the box part.
    """
    bary, w = triangle_rule(degree)
    e = np.eye(3)
    centre = np.full(3, 1.0 / 3.0)
    lam = []
    for i in range(3):
        mij = 0.5 * (e[i] + e[(i + 1) % 3])
        mik = 0.5 * (e[i] + e[(i + 2) % 3])
        parts = [bary @ np.array([e[i], mij, centre]),
                 bary @ np.array([e[i], centre, mik])]
        lam.append(np.concatenate(parts))
    lam = np.stack(lam)  # (3, 2q, 3)
    p = dual.mesh.vertices[dual.mesh.triangles]
    pts = np.einsum("iqk,mkd->miqd", lam, p)
    ww = np.concatenate([w, w])
    weights = (dual.mesh.signed_areas / 6.0)[:, None, None] * ww[None, None, :]
    return pts, lam, np.broadcast_to(weights, pts.shape[:3]).copy()


def boundary_half_quadrature(mesh, n_points=2):
    """Gauss points on the two halves of each boundary edge.

    Returns points ``(B, 2, q, 2)``, the edge parameter ``(2, q)`` in [0, 1]
    along the edge and weights ``(B, 2, q)``.
    """
    s, w = gauss_legendre(n_points)
    param = np.stack([0.5 * s, 0.5 + 0.5 * s])
    be = mesh.boundary_edges
    a, b = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    pts = a[:, None, None, :] + param[None, :, :, None] * (b - a)[:, None, None, :]
    weights = 0.5 * mesh.boundary_lengths[:, None, None] * w[None, None, :]
    return pts, param, np.broadcast_to(weights, pts.shape[:3]).copy()


def _diffusion_and_convection(dual, coeffs):
    """Per dual segment: diffusive and convective flux of each local hat.

    Returns ``diff`` and ``conv`` of shape ``(M, 3, 3)`` (segment, trial), plus
    the segment integrals of ``b . n`` ``(M, 3)`` and of ``A`` ``(M, 3, 2, 2)``.
    """
    mesh = dual.mesh
    pts, lam, w = segment_quadrature(dual)
    flat = pts.reshape(-1, 2)
    A = _evaluate(coeffs.diffusion, flat, (len(flat), 2, 2)).reshape(
        pts.shape[:3] + (2, 2))
    b = _evaluate(coeffs.velocity, flat, (len(flat), 2)).reshape(pts.shape)
    n = dual.seg_normals  # (M, 3, 2)
    grads = mesh.basis_gradients  # (M, 3, 2)
    An = np.einsum("meqab,mea->meqb", A, n)  # n^T A = (A n)^T, A symmetric
    diff = -np.einsum("meq,meqb,mjb->mej", w, An, grads)
    bn = np.einsum("meqd,med->meq", b, n)
    conv = np.einsum("meq,meq,eqj->mej", w, bn, lam)
    return diff, conv, (w * bn).sum(-1), np.einsum("meq,meqab->meab", w, A)


def _scatter_segments(mesh, dual, flux):
    """Add ``flux`` (M, 3, 3) to rows ``seg_from`` and subtract it from ``seg_to``."""
    cols = np.broadcast_to(mesh.triangles[:, None, :], flux.shape)
    rows_from = np.broadcast_to(dual.seg_from[:, :, None], flux.shape)
    rows_to = np.broadcast_to(dual.seg_to[:, :, None], flux.shape)
    rows = np.concatenate([rows_from.ravel(), rows_to.ravel()])
    cols = np.concatenate([cols.ravel(), cols.ravel()])
    vals = np.concatenate([flux.ravel(), -flux.ravel()])
    return rows, cols, vals


def _reaction(dual, coeffs, degree):
    mesh = dual.mesh
    pts, lam, w = box_quadrature(dual, degree)
    c = _evaluate(coeffs.reaction, pts.reshape(-1, 2),
                  (pts.shape[0] * pts.shape[1] * pts.shape[2],)).reshape(w.shape)
    local = np.einsum("miq,iqj->mij", c * w, lam)
    rows = np.broadcast_to(mesh.triangles[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.triangles[:, None, :], local.shape)
    return rows.ravel(), cols.ravel(), local.ravel()


def _outflow(mesh, coeffs, classification):
    be = mesh.boundary_edges
    pts, param, w = boundary_half_quadrature(mesh)
    b = _evaluate(coeffs.velocity, pts.reshape(-1, 2),
                  (pts.size // 2, 2)).reshape(pts.shape)
    bn = np.einsum("bhqd,bd->bhq", b, mesh.boundary_normals)
    bn = bn * classification.outflow[:, None, None]
    basis = np.stack([1.0 - param, param], axis=-1)  # (2, q, 2): phi_start, phi_end
    local = np.einsum("bhq,hqj->bhj", w * bn, basis)  # row half h, column endpoint j
    rows = np.broadcast_to(be[:, :, None], local.shape)
    cols = np.broadcast_to(be[:, None, :], local.shape)
    return rows.ravel(), cols.ravel(), local.ravel()


def _finish(mesh, parts):
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    n = mesh.n_vertices
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_fvm(mesh, dual, coeffs, classification, degree=4):
    """Matrix of the finite volume bilinear form A_V.

    Row ``i`` holds the flux of ``-A grad(phi_j) + b phi_j`` through the
    interior boundary of ``V_i``, the outflow term ``b . n phi_j`` on
    ``dV_i cap Gamma_out`` and the reaction integral ``int_{V_i} c phi_j``.
    """
    diff, conv, _, _ = _diffusion_and_convection(dual, coeffs)
    parts = [_scatter_segments(mesh, dual, diff + conv),
             _reaction(dual, coeffs, degree),
             _outflow(mesh, coeffs, classification)]
    return _finish(mesh, parts)


def interface_data(dual, coeffs):
    """Interface averages per primal edge ``(i, j)``, ``i < j``.

    Returns ``(flux, length, A_mean)`` where ``flux`` is the integral of
    ``b . n_i`` over ``tau_ij`` (so ``beta_ij = flux / length``) and
    ``A_mean`` the averaged diffusion matrix.
    """
    mesh = dual.mesh
    _, _, bn_int, A_int = _diffusion_and_convection(dual, coeffs)
    ne = len(mesh.edges)
    sign = np.where(dual.seg_from < dual.seg_to, 1.0, -1.0)
    flux = np.zeros(ne)
    length = np.zeros(ne)
    A_sum = np.zeros((ne, 2, 2))
    np.add.at(flux, dual.seg_edge.ravel(), (sign * bn_int).ravel())
    np.add.at(length, dual.seg_edge.ravel(), dual.seg_lengths.ravel())
    np.add.at(A_sum, dual.seg_edge.ravel(), A_int.reshape(-1, 2, 2))
    return flux, length, A_sum / length[:, None, None]


def upwind_weights(dual, coeffs, scheme):
    """lambda_ij per primal edge (oriented from the lower to the higher index)."""
    flux, length, A_mean = interface_data(dual, coeffs)
    norm = _matrix_norm(A_mean, scheme.norm)
    with np.errstate(divide="ignore", invalid="ignore"):
        # ||A_ij|| = 0: pure upwinding, Peclet number +-inf
        peclet = np.where(norm > 0.0, flux / np.where(norm > 0, norm, 1.0),
                          np.sign(flux) * np.inf)
    return eval_weight(scheme, peclet), flux


def assemble_fvm_upwind(mesh, dual, coeffs, classification, scheme, degree=4):
    """Matrix of the upwind bilinear form A_V^up.

    Interface convection uses ``lambda_ij u(a_i) + (1 - lambda_ij) u(a_j)``.
    As ``Phi(-t) = 1 - Phi(t)`` for both schemes, the value seen from ``V_j``
    is the same convex combination, so one flux per edge is added to row
    ``i`` and subtracted from row ``j``.
    """
    if not isinstance(scheme, UpwindScheme):
        scheme = UpwindScheme(scheme)
    if scheme.kind == "none":
        return assemble_fvm(mesh, dual, coeffs, classification, degree)
    diff, _, _, _ = _diffusion_and_convection(dual, coeffs)
    lam, flux = upwind_weights(dual, coeffs, scheme)
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    conv = (
        np.concatenate([i, i, j, j]),
        np.concatenate([i, j, i, j]),
        np.concatenate([flux * lam, flux * (1 - lam),
                        -flux * lam, -flux * (1 - lam)]),
    )
    parts = [_scatter_segments(mesh, dual, diff), conv,
             _reaction(dual, coeffs, degree),
             _outflow(mesh, coeffs, classification)]
    return _finish(mesh, parts)


def assemble_operator(mesh, dual, coeffs, classification, scheme="none"):
    """A_V or A_V^up depending on ``scheme``."""
    if not isinstance(scheme, UpwindScheme):
        scheme = UpwindScheme(scheme)
    if scheme.kind == "none":
        return assemble_fvm(mesh, dual, coeffs, classification)
    return assemble_fvm_upwind(mesh, dual, coeffs, classification, scheme)


class RhsAssembler:
    """Precomputed quadrature for ``int_{V_i} f + int_{dV_i cap Gamma} g2``."""

    def __init__(self, mesh, dual, degree=4, boundary_points=4):
        self.mesh = mesh
        self.pts, _, self.w = box_quadrature(dual, degree)
        self.owner = np.broadcast_to(mesh.triangles[:, :, None], self.w.shape).ravel()
        self.flat = self.pts.reshape(-1, 2)
        bpts, _, bw = boundary_half_quadrature(mesh, boundary_points)
        self.bw = bw
        self.bflat = bpts.reshape(-1, 2)
        self.bnormals = np.repeat(mesh.boundary_normals, bw.shape[1] * bw.shape[2],
                                  axis=0)
        self.bowner = np.broadcast_to(mesh.boundary_edges[:, :, None], bw.shape).ravel()

    def interior(self, f, t):
        vals = np.asarray(f(self.flat, t), dtype=float)
        vals = np.broadcast_to(vals, (len(self.flat),))
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite source term")
        return np.bincount(self.owner, weights=vals * self.w.ravel(),
                           minlength=self.mesh.n_vertices)

    def boundary(self, g2, t):
        vals = np.asarray(g2(self.bflat, self.bnormals, t), dtype=float)
        vals = np.broadcast_to(vals, (len(self.bflat),))
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite boundary data")
        return np.bincount(self.bowner, weights=vals * self.bw.ravel(),
                           minlength=self.mesh.n_vertices)

    def __call__(self, f, g2, t):
        return self.interior(f, t) + self.boundary(g2, t)


def assemble_fvm_rhs(mesh, dual, f, g2, t, degree=4):
    """Vector with entries ``int_{V_i} f(t) + int_{dV_i cap Gamma} g2(t)``."""
    return RhsAssembler(mesh, dual, degree)(f, g2, t)
