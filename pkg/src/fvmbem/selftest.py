"""Quick oracle checks runnable from the command line."""

import numpy as np
from scipy.integrate import quad

from .bem import Boundary, assemble_single_layer, double_layer_entries, single_layer_entries
from .coupling import assemble_fem
from .fvm import CoefficientSet, assemble_fvm
from .mesh import build_dual, build_lshape_mesh, classify_boundary
from .spaces import chi_mass_matrix
from .time_integrators import TimeGrid, weight_identities


def _nested_quad(fn):
    def inner(s):
        return quad(lambda t: fn(s, t), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return quad(inner, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)[0]


def check_fvm_equals_fem():
    mesh = build_lshape_mesh(0.125)
    dual = build_dual(mesh)
    coeffs = CoefficientSet(
        diffusion=lambda x: np.broadcast_to(np.eye(2), (len(x), 2, 2)),
        velocity=lambda x: np.zeros((len(x), 2)),
        reaction=lambda x: np.zeros(len(x)))
    cls = classify_boundary(mesh, coeffs.velocity)
    diff = assemble_fvm(mesh, dual, coeffs, cls) - assemble_fem(mesh, coeffs, cls)
    return float(abs(diff).max()), 1e-12


def check_bem_oracle():
    mesh = build_lshape_mesh(0.125)
    bnd = Boundary.from_mesh(mesh)
    worst = 0.0
    for i, j in ((0, 1), (0, 2), (3, 7), (5, 5)):
        p0, p1, q0, q1 = bnd.starts[i], bnd.ends[i], bnd.starts[j], bnd.ends[j]
        Lp, Lq = bnd.lengths[i], bnd.lengths[j]
        if i != j:
            ref = -Lp * Lq / (2 * np.pi) * _nested_quad(
                lambda s, t: np.log(np.linalg.norm(p0 + s * (p1 - p0) - q0 - t * (q1 - q0))))
        else:
            ref = Lp * Lp * (1.5 - np.log(Lp)) / (2 * np.pi)
        val = single_layer_entries(bnd, [i], [j])[0]
        worst = max(worst, abs(val - ref) / abs(ref))
        if i != j:
            ny = bnd.normals[j]

            def k(s, t):
                r = p0 + s * (p1 - p0) - q0 - t * (q1 - q0)
                return (r @ ny) / (r @ r) * (1.0 - t)
            ref_k = Lp * Lq / (2 * np.pi) * _nested_quad(k)
            val_k = double_layer_entries(bnd, [i], [j])[0, 0]
            scale = max(abs(ref_k), 1e-3 * Lp * Lq)
            worst = max(worst, abs(val_k - ref_k) / scale)
    return worst, 1e-8


def check_v_spd():
    V = assemble_single_layer(Boundary.from_mesh(build_lshape_mesh(0.125)))
    return float(np.linalg.eigvalsh(V).min()), 0.0


def check_weights():
    first, second = weight_identities(TimeGrid.uniform(1.0, 20))
    return float(max(np.abs(first).max(), np.abs(second).max())), 1e-12


def check_chi_symmetry():
    M = chi_mass_matrix(build_lshape_mesh(0.0625))
    return float(abs(M - M.T).max()), 1e-15


# name -> (sense, check); "<" passes when value < tol, ">" when value > tol
CHECKS = {
    "fvm_equals_fem": ("<", check_fvm_equals_fem),
    "bem_oracle": ("<", check_bem_oracle),
    "v_positive_definite": (">", check_v_spd),
    "omega_identities": ("<", check_weights),
    "chi_mass_symmetry": ("<", check_chi_symmetry),
}


def run_selftest(out=print):
    ok = True
    for name, (sense, fn) in CHECKS.items():
        value, tol = fn()
        passed = value < tol if sense == "<" else value > tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} {sense} {tol:g}")
    return ok
