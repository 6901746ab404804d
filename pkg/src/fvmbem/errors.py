"""Error norms against exact solutions and experimental orders of convergence."""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bem import assemble_single_layer, v_energy_norm
from .quadrature import gauss_legendre
from .spaces import edge_quadrature, triangle_quadrature

CSV_HEADER = ["level", "hinv", "err_V", "err_H1", "err_sum", "eoc_V", "eoc_H1", "eoc_sum"]


@dataclass(eq=False)
class ExactSolution:
    """Closed-form interior and exterior solutions.

    ``u(x, t)`` and ``u_e(x, t)`` return ``(p,)``; the gradients ``(p, 2)``.
    """

    u: Callable
    grad_u: Callable
    u_e: Callable
    grad_ue: Callable

    def flux(self, x, n, t):
        """Exact ``phi = d_n u_e`` with ``n`` the outward normal of Omega."""
        return (self.grad_ue(x, t) * n).sum(-1)


def consistency_residual(problem, n_samples=200, seed=0):
    """Largest mismatch of the coupling conditions on random boundary points.

    Checks ``g1 = u - u_e`` and ``g2 = (A grad u - [b u on inflow]) . n - d_n u_e``.
    """
    exact = problem.exact
    if exact is None:
        raise ValueError("problem has no exact solution")
    rng = np.random.default_rng(seed)
    mesh = problem.build_mesh(problem.base_spacing)
    be = mesh.boundary_edges
    k = rng.integers(0, len(be), n_samples)
    s = rng.uniform(0.05, 0.95, n_samples)
    p0, p1 = mesh.vertices[be[k, 0]], mesh.vertices[be[k, 1]]
    x = p0 + s[:, None] * (p1 - p0)
    n = mesh.boundary_normals[k]
    t = rng.uniform(0.0, problem.T, n_samples)
    worst = 0.0
    for tt in np.unique(np.round(t, 12))[:20]:
        g1 = problem.g1(x, n, tt)
        r1 = g1 - (exact.u(x, tt) - exact.u_e(x, tt))
        A = problem.coeffs.diffusion(x)
        b = problem.coeffs.velocity(x)
        bn = (b * n).sum(-1)
        flux = np.einsum("pab,pb,pa->p", A, exact.grad_u(x, tt), n)
        flux = flux - np.where(bn < 0.0, bn * exact.u(x, tt), 0.0)
        r2 = problem.g2(x, n, tt) - (flux - exact.flux(x, n, tt))
        scale = 1.0 + np.abs(flux).max()
        worst = max(worst, np.abs(r1).max(), np.abs(r2).max() / scale)
    return float(worst)


def error_H_T(traj, exact, degree=6):
    """``||u - u_{h,tau}||_{H_T}`` with ``u_{h,tau}`` linear in time per slab."""
    mesh = traj.mesh
    pts, bary, w = triangle_quadrature(mesh, degree)
    flat = pts.reshape(-1, 2)
    tri = mesh.triangles
    grads = mesh.basis_gradients
    s, ws = gauss_legendre(3)
    total = 0.0
    U = traj.U
    for n, tau in enumerate(traj.grid.steps, start=1):
        for sq, wq in zip(s, ws):
            t = traj.grid.knots[n - 1] + sq * tau
            coeffs = (1.0 - sq) * U[n - 1] + sq * U[n]
            loc = coeffs[tri]
            uh = loc @ bary.T
            guh = np.einsum("mk,mkd->md", loc, grads)
            du = exact.u(flat, t).reshape(uh.shape) - uh
            dg = exact.grad_u(flat, t).reshape(uh.shape + (2,)) - guh[:, None, :]
            total += wq * tau * float((w * (du ** 2 + (dg ** 2).sum(-1))).sum())
    return math.sqrt(total)


class FluxErrorNorm:
    """``||phi - phi_{h,tau}||_{L2(0,T; V)}`` on the twice refined boundary.

    The exact flux is projected onto edge means of the split boundary and
    the discrete flux is prolonged to it; the split-boundary single layer
    matrix is the norm Gram.
    """

    def __init__(self, boundary, n_points=8):
        self.coarse = boundary
        self.fine = boundary.split()
        self.V = assemble_single_layer(self.fine)
        self.pts, self.w = edge_quadrature(self.fine.starts, self.fine.ends, n_points)
        self.normals = np.repeat(self.fine.normals[:, None, :], self.pts.shape[1], axis=1)

    def project(self, flux, t):
        vals = np.asarray(flux(self.pts.reshape(-1, 2), self.normals.reshape(-1, 2), t),
                          dtype=float).reshape(self.w.shape)
        return (vals * self.w).sum(axis=1) / self.fine.lengths

    def prolong(self, phi_h):
        return np.repeat(np.asarray(phi_h, dtype=float), 2)

    def at(self, flux, t, phi_h):
        return v_energy_norm(self.V, self.project(flux, t) - self.prolong(phi_h))

    def __call__(self, traj, flux):
        s, ws = gauss_legendre(3)
        total = 0.0
        for n, tau in enumerate(traj.grid.steps, start=1):
            phi_h = self.prolong(traj.Phi[n - 1])
            for sq, wq in zip(s, ws):
                t = traj.grid.knots[n - 1] + sq * tau
                e = v_energy_norm(self.V, self.project(flux, t) - phi_h)
                total += wq * tau * e * e
        return math.sqrt(total)


def error_flux(traj, exact, boundary):
    return FluxErrorNorm(boundary)(traj, exact.flux)


def compute_eoc(errors, h):
    """EOC column; ``None`` for the first level or where an error vanishes."""
    out = []
    for k in range(len(errors)):
        if k == 0 or errors[k] <= 0.0 or errors[k - 1] <= 0.0:
            out.append(None)
        else:
            out.append(math.log(errors[k - 1] / errors[k]) / math.log(h[k - 1] / h[k]))
    return out


@dataclass
class LevelResult:
    level: int
    h: float
    tau: float
    err_V: float
    err_H1: float
    seconds: Optional[float] = None

    @property
    def err_sum(self):
        return self.err_V + self.err_H1


@dataclass
class ConvergenceReport:
    problem: str
    rows: list = field(default_factory=list)

    def add(self, row):
        self.rows.append(row)

    def eoc(self, which):
        h = [r.h for r in self.rows]
        return compute_eoc([getattr(r, which) for r in self.rows], h)

    def table(self):
        eocs = {k: self.eoc(k) for k in ("err_V", "err_H1", "err_sum")}
        out = []
        for k, r in enumerate(self.rows):
            out.append([r.level, 1.0 / r.h, r.err_V, r.err_H1, r.err_sum,
                        eocs["err_V"][k], eocs["err_H1"][k], eocs["err_sum"][k]])
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in self.table():
                writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])

    def final_eoc(self, which="err_sum"):
        col = self.eoc(which)
        return col[-1] if col else None


def _fmt(v):
    if v is None:
        return "nan"
    return f"{v:.12g}"
