"""Block system of the FVM-BEM coupling and its FEM-BEM counterpart.

Unknowns are ``x = (U, Phi)`` with ``U`` the nodal values of ``u_h`` and
``Phi`` the edge values of ``phi_h``. The stationary operator is

    [ A      Ctb ]   rows: boxes V_i (FVM) or hats (FEM)
    [ Kb     V   ]   rows: boundary edges

with ``Ctb = -<phi_h, I_h^* v_h>_Gamma`` and ``Kb = <(1/2 - K) u_h, psi_h>``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bem import Boundary, DoubleLayerDataOperator, assemble_bem
from .fvm import RhsAssembler, UpwindScheme, assemble_operator
from .mesh import build_dual, classify_boundary
from .quadrature import triangle_rule
from .spaces import chi_mass_matrix, fem_mass_matrix, fem_stiffness_matrix


class NumericalError(RuntimeError):
    """Singular or non-finite linear algebra in the coupled system."""


@dataclass(eq=False)
class CoupledSystem:
    mesh: object
    dual: object
    bem: object
    A: sp.csr_matrix
    Ctb: sp.csr_matrix
    Kb: sp.csr_matrix
    V: np.ndarray
    M_chi: sp.csr_matrix
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def n1(self):
        return self.mesh.n_vertices

    @property
    def n2(self):
        return self.V.shape[0]

    @property
    def boundary(self):
        return self.bem.boundary

    def stationary(self):
        """The sparse block matrix B."""
        return sp.bmat([[self.A, self.Ctb], [self.Kb, sp.csr_matrix(self.V)]],
                       format="csr")

    def step_matrix(self, tau):
        return sp.bmat([[self.M_chi / tau + self.A, self.Ctb],
                        [self.Kb, sp.csr_matrix(self.V)]], format="csc")

    def factor(self, tau):
        """LU factorisation of the step matrix, cached per step size."""
        key = float(tau)
        if key not in self._lu:
            try:
                lu = spla.splu(self.step_matrix(tau))
            except RuntimeError as exc:
                raise NumericalError(f"singular step matrix (tau={tau})") from exc
            self._lu[key] = lu
        return self._lu[key]

    def split(self, x):
        return x[:self.n1], x[self.n1:]

    def quadratic_form(self, x, y=None):
        """``B(x; y)`` evaluated blockwise (``y`` defaults to ``x``)."""
        y = x if y is None else y
        u, phi = self.split(np.asarray(x, dtype=float))
        v, psi = self.split(np.asarray(y, dtype=float))
        return float(v @ (self.A @ u) + v @ (self.Ctb @ phi)
                     + psi @ (self.Kb @ u) + psi @ (self.V @ phi))


def coupling_block(mesh):
    """``Ctb[i, E] = -|dV_i cap E|``: ``-h_E / 2`` at both endpoints of E."""
    be = mesh.boundary_edges
    k = np.arange(len(be))
    half = -0.5 * mesh.boundary_lengths
    return sp.csr_matrix((np.concatenate([half, half]),
                          (np.concatenate([be[:, 0], be[:, 1]]), np.concatenate([k, k]))),
                         shape=(mesh.n_vertices, len(be)))


def trace_block(mesh, bem):
    """``(1/2) Mb - K`` with columns scattered to global vertex numbers."""
    local = 0.5 * bem.Mb - bem.K
    ids = bem.boundary.global_ids
    rows = np.repeat(np.arange(local.shape[0]), local.shape[1])
    cols = np.tile(ids, local.shape[0])
    return sp.csr_matrix((local.ravel(), (rows, cols)),
                         shape=(local.shape[0], mesh.n_vertices))


def _check_bem(mesh, bem):
    bnd = bem.boundary
    if bnd.global_ids is None or not np.array_equal(bnd.global_ids[bnd.edges],
                                                    mesh.boundary_edges):
        raise ValueError("BEM boundary does not match the mesh boundary")


def assemble_system(mesh, dual, coeffs, scheme="none", bem=None, classification=None):
    """FVM-BEM system for the coefficient set and upwind scheme."""
    if dual.mesh is not mesh:
        raise ValueError("dual mesh belongs to another mesh")
    bem = assemble_bem(Boundary.from_mesh(mesh)) if bem is None else bem
    _check_bem(mesh, bem)
    if classification is None:
        classification = classify_boundary(mesh, coeffs.velocity)
    A = assemble_operator(mesh, dual, coeffs, classification, scheme)
    return CoupledSystem(mesh, dual, bem, A, coupling_block(mesh), trace_block(mesh, bem),
                         bem.V, chi_mass_matrix(mesh))


def assemble_fem(mesh, coeffs, classification=None, degree=4):
    """S1 Galerkin matrix of ``(A grad u - b u, grad v) + (c u, v) + <b.n u, v>_out``."""
    if classification is None:
        classification = classify_boundary(mesh, coeffs.velocity)
    bary, w = triangle_rule(degree)
    pts = np.einsum("qk,mkd->mqd", bary, mesh.vertices[mesh.triangles])
    flat = pts.reshape(-1, 2)
    nq = len(w)
    A = np.asarray(coeffs.diffusion(flat), dtype=float).reshape(-1, nq, 2, 2)
    b = np.asarray(coeffs.velocity(flat), dtype=float).reshape(-1, nq, 2)
    c = np.broadcast_to(np.asarray(coeffs.reaction(flat), dtype=float),
                        (len(flat),)).reshape(-1, nq)
    wk = mesh.signed_areas[:, None] * w[None, :]
    g = mesh.basis_gradients
    local = np.einsum("mq,mqab,mjb,mia->mij", wk, A, g, g)
    # convection: -(b phi_j, grad phi_i)
    local -= np.einsum("mq,mqa,mia,qj->mij", wk, b, g, bary)
    local += np.einsum("mq,mq,qi,qj->mij", wk, c, bary, bary)
    t = mesh.triangles
    rows = np.broadcast_to(t[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(t[:, None, :], local.shape).ravel()
    parts_r, parts_c, parts_v = [rows], [cols], [local.ravel()]
    # outflow term on full edges
    be = mesh.boundary_edges
    s, ws = np.polynomial.legendre.leggauss(4)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    p0, p1 = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    bp = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
    bv = np.asarray(coeffs.velocity(bp.reshape(-1, 2)), dtype=float).reshape(bp.shape)
    bn = np.einsum("eqd,ed->eq", bv, mesh.boundary_normals) * classification.outflow[:, None]
    basis = np.stack([1 - s, s], axis=1)
    wb = mesh.boundary_lengths[:, None] * ws[None, :]
    loc_b = np.einsum("eq,qi,qj->eij", wb * bn, basis, basis)
    parts_r.append(np.broadcast_to(be[:, :, None], loc_b.shape).ravel())
    parts_c.append(np.broadcast_to(be[:, None, :], loc_b.shape).ravel())
    parts_v.append(loc_b.ravel())
    n = mesh.n_vertices
    return sp.csr_matrix((np.concatenate(parts_v),
                          (np.concatenate(parts_r), np.concatenate(parts_c))), shape=(n, n))


def assemble_fembem_oracle(mesh, coeffs, bem=None, classification=None):
    """FEM-BEM Galerkin system; the BEM blocks are shared with the FVM version.

    ``<phi_h, v_h>_Gamma`` tested with hats gives the same ``-h_E / 2``
    entries as the box-tested coupling, and the FEM mass matrix replaces
    the chi-mass matrix.
    """
    bem = assemble_bem(Boundary.from_mesh(mesh)) if bem is None else bem
    _check_bem(mesh, bem)
    A = assemble_fem(mesh, coeffs, classification)
    return CoupledSystem(mesh, None, bem, A, coupling_block(mesh), trace_block(mesh, bem),
                         bem.V, fem_mass_matrix(mesh))


def h1_gram(mesh):
    return (fem_stiffness_matrix(mesh) + fem_mass_matrix(mesh)).tocsr()


def ellipticity_constant(system):
    """Smallest eigenvalue of ``sym(B) x = lam G x`` with ``G = diag(H1 Gram, V)``."""
    B = system.stationary().toarray()
    S = 0.5 * (B + B.T)
    G = sla.block_diag(h1_gram(system.mesh).toarray(), system.V)
    lam = sla.eigh(S, G, eigvals_only=True, subset_by_index=[0, 0])
    return float(lam[0])


@dataclass(eq=False)
class LoadVector:
    t: float
    interior: np.ndarray
    boundary: np.ndarray

    def stacked(self):
        return np.concatenate([self.interior, self.boundary])


class LoadAssembler:
    """Evaluates ``F_V(.; t)`` for a problem's data ``f, g1, g2``.

    ``f(x, t)``, ``g1(x, n, t)`` and ``g2(x, n, t)`` are vectorised over
    points ``x`` and outward normals ``n`` of shape ``(p, 2)``.
    """

    def __init__(self, system, problem, degree=4):
        self.system = system
        self.problem = problem
        self.rhs = RhsAssembler(system.mesh, system.dual, degree)
        self.data = DoubleLayerDataOperator(system.boundary)

    def __call__(self, t):
        p = self.problem
        interior = self.rhs(p.f, p.g2, t)
        boundary = self.data(p.g1, t)
        return LoadVector(float(t), interior, boundary)


def assemble_load(system, problem, t, degree=4):
    return LoadAssembler(system, problem, degree)(t)


def build_system(problem, spacing, scheme=None):
    """Mesh, dual mesh and coupled system of a problem at a given spacing."""
    mesh = problem.build_mesh(spacing)
    dual = build_dual(mesh)
    scheme = UpwindScheme(problem.scheme) if scheme is None else scheme
    if not isinstance(scheme, UpwindScheme):
        scheme = UpwindScheme(scheme)
    return assemble_system(mesh, dual, problem.coeffs, scheme)
