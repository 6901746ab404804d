import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvmbem.fvm import (CoefficientSet, UpwindScheme, assemble_fvm, assemble_fvm_rhs,
                        assemble_fvm_upwind, assemble_operator, eval_weight, upwind_weights)
from fvmbem.mesh import build_dual, build_lshape_mesh, classify_boundary
from oracles import fem_stiffness_oracle, integrate_triangle


def constant(value, shape):
    return lambda x: np.broadcast_to(np.asarray(value, dtype=float), (len(x),) + shape)


def pure_diffusion(diffusion):
    return CoefficientSet(diffusion, constant([0.0, 0.0], (2,)), constant(0.0, ()))


def piecewise_diffusion(mesh, A_tri):
    def diffusion(x):
        idx, _ = mesh.locate(x)
        assert np.all(idx >= 0)
        return A_tri[idx]
    return diffusion


def test_fvm_equals_fem_identity(test_meshes):
    for mesh in test_meshes:
        coeffs = pure_diffusion(constant(np.eye(2), (2, 2)))
        cls = classify_boundary(mesh, coeffs.velocity)
        A = assemble_fvm(mesh, build_dual(mesh), coeffs, cls).toarray()
        ref = fem_stiffness_oracle(mesh, np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2)))
        assert np.abs(A - ref).max() < 1e-12


def test_fvm_equals_fem_piecewise_constant(test_meshes, rng):
    for mesh in test_meshes:
        B = rng.standard_normal((mesh.n_triangles, 2, 2))
        A_tri = B @ np.swapaxes(B, 1, 2) + 0.5 * np.eye(2)
        coeffs = pure_diffusion(piecewise_diffusion(mesh, A_tri))
        cls = classify_boundary(mesh, coeffs.velocity)
        A = assemble_fvm(mesh, build_dual(mesh), coeffs, cls).toarray()
        assert np.abs(A - fem_stiffness_oracle(mesh, A_tri)).max() < 1e-12


def smooth_coeffs():
    return CoefficientSet(
        diffusion=lambda x: np.einsum("n,ab->nab", 1 + x[:, 0] ** 2, np.eye(2)),
        velocity=lambda x: np.column_stack([0.25 - 4 * x[:, 1], 4 * x[:, 0]]),
        reaction=lambda x: 1.0 + x[:, 1] ** 2)


def test_constants_have_no_interior_flux(square_mesh, square_dual):
    coeffs = pure_diffusion(lambda x: np.einsum("n,ab->nab", 1 + x[:, 0], np.eye(2)))
    cls = classify_boundary(square_mesh, coeffs.velocity)
    A = assemble_fvm(square_mesh, square_dual, coeffs, cls)
    assert np.abs(A @ np.ones(square_mesh.n_vertices)).max() < 1e-13


def test_conservation(square_mesh, square_dual):
    # column sums: interior fluxes cancel, leaving outflow and reaction terms
    b = np.array([1.0, -0.5])
    coeffs = CoefficientSet(constant(np.eye(2), (2, 2)), constant(b, (2,)), constant(0.0, ()))
    cls = classify_boundary(square_mesh, coeffs.velocity)
    bn = square_mesh.boundary_normals @ b
    expected = (bn * square_mesh.boundary_lengths)[cls.outflow].sum()
    for scheme in ("none", "full", "steerable"):
        A = assemble_operator(square_mesh, square_dual, coeffs, cls, scheme)
        assert np.isclose(A.sum(), expected, rtol=1e-13)


def test_upwind_agrees_on_constants(square_mesh, square_dual):
    coeffs = smooth_coeffs()
    cls = classify_boundary(square_mesh, coeffs.velocity)
    one = np.ones(square_mesh.n_vertices)
    ref = assemble_fvm(square_mesh, square_dual, coeffs, cls) @ one
    for kind in ("full", "steerable"):
        up = assemble_fvm_upwind(square_mesh, square_dual, coeffs, cls, UpwindScheme(kind))
        np.testing.assert_allclose(up @ one, ref, atol=1e-13)


def test_full_upwind_picks_upstream_vertex(square_mesh, square_dual):
    coeffs = smooth_coeffs()
    lam, flux = upwind_weights(square_dual, coeffs, UpwindScheme("full"))
    assert np.all(lam[flux > 0] == 1.0)
    assert np.all(lam[flux < 0] == 0.0)


def test_full_upwind_m_matrix():
    mesh = build_lshape_mesh(0.0625)
    dual = build_dual(mesh)
    coeffs = CoefficientSet(constant(1e-3 * np.eye(2), (2, 2)),
                            constant([1.0, 0.7], (2,)), constant(0.0, ()))
    cls = classify_boundary(mesh, coeffs.velocity)
    # the outflow term couples the two ends of a boundary edge
    mask = ~np.eye(mesh.n_vertices, dtype=bool)
    mask[mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1]] = False
    mask[mesh.boundary_edges[:, 1], mesh.boundary_edges[:, 0]] = False
    A = assemble_fvm_upwind(mesh, dual, coeffs, cls, UpwindScheme("full")).toarray()
    assert A[mask].max() <= 1e-15
    plain = assemble_fvm(mesh, dual, coeffs, cls).toarray()
    assert plain[mask].max() > 0


def test_eval_weight_values():
    full = UpwindScheme("full")
    assert eval_weight(full, 2.0) == 1.0 and eval_weight(full, -2.0) == 0.0
    steer = UpwindScheme("steerable")
    assert eval_weight(steer, 4.0) == pytest.approx(0.75)
    assert eval_weight(steer, -4.0) == pytest.approx(0.25)
    assert eval_weight(steer, 1.0) == 0.5 and eval_weight(steer, -1.0) == 0.5
    assert eval_weight(steer, np.inf) == 1.0 and eval_weight(steer, -np.inf) == 0.0


@given(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda t: t != 0.0))
def test_weight_antisymmetry(t):
    for kind in ("full", "steerable"):
        a, b = eval_weight(kind, t), eval_weight(kind, -t)
        assert 0.0 <= a <= 1.0
        assert a + b == pytest.approx(1.0, abs=1e-15)
        assert eval_weight(kind, t + 1.0) >= a


def test_upwind_scheme_validation():
    with pytest.raises(ValueError):
        UpwindScheme("central")
    with pytest.raises(ValueError):
        UpwindScheme("full", norm="frobenius")


def test_row_sum_norm_changes_weights(square_dual):
    coeffs = CoefficientSet(lambda x: np.broadcast_to([[1.0, 0.5], [0.5, 1.0]], (len(x), 2, 2)),
                            constant([300.0, 100.0], (2,)), constant(0.0, ()))
    a, _ = upwind_weights(square_dual, coeffs, UpwindScheme("steerable", "max_entry"))
    b, _ = upwind_weights(square_dual, coeffs, UpwindScheme("steerable", "row_sum"))
    assert not np.allclose(a, b)


def test_coefficient_check_warns(square_mesh):
    bad = CoefficientSet(constant(0.1 * np.eye(2), (2, 2)), constant([0.0, 0.0], (2,)),
                         constant(0.0, ()))
    with pytest.warns(UserWarning):
        bad.check(square_mesh)
    with pytest.raises(ValueError):
        CoefficientSet(constant([[1.0, 1.0], [0.0, 1.0]], (2, 2)), bad.velocity,
                       bad.reaction).check(square_mesh)


def test_nonfinite_coefficient_rejected(square_mesh, square_dual):
    coeffs = pure_diffusion(constant(np.full((2, 2), np.nan), (2, 2)))
    cls = classify_boundary(square_mesh, coeffs.velocity)
    with pytest.raises(ValueError):
        assemble_fvm(square_mesh, square_dual, coeffs, cls)


def test_rhs_trivial_cases(square_mesh, square_dual):
    zero = lambda x, n, t: np.zeros(len(x))  # noqa: E731
    r = assemble_fvm_rhs(square_mesh, square_dual, lambda x, t: np.ones(len(x)), zero, 0.0)
    np.testing.assert_allclose(r, square_dual.box_areas, rtol=1e-13)
    r = assemble_fvm_rhs(square_mesh, square_dual, lambda x, t: np.zeros(len(x)),
                         lambda x, n, t: np.ones(len(x)), 0.0)
    expected = np.zeros(square_mesh.n_vertices)
    for (a, b), L in zip(square_mesh.boundary_edges, square_mesh.boundary_lengths):
        expected[[a, b]] += 0.5 * L
    np.testing.assert_allclose(r, expected, rtol=1e-13)


def box_polygon_triangles(mesh, i):
    """Sub-triangles (a_i, m_ij, s_K), (a_i, s_K, m_ik) of the box around vertex ``i``."""
    out = []
    for tri in mesh.triangles:
        if i not in tri:
            continue
        k = list(tri).index(i)
        p = mesh.vertices[tri]
        a, b, c = p[k], p[(k + 1) % 3], p[(k + 2) % 3]
        s = p.mean(axis=0)
        out += [(a, 0.5 * (a + b), s), (a, s, 0.5 * (a + c))]
    return out


def test_rhs_against_adaptive_oracle(square_mesh, square_dual):
    f = lambda x, t: np.exp(x[:, 0] + t) * np.cos(3 * x[:, 1])  # noqa: E731
    zero = lambda x, n, t: np.zeros(len(x))  # noqa: E731
    r = assemble_fvm_rhs(square_mesh, square_dual, f, zero, 0.3)
    for i in (0, 6, 12, 24):
        ref = sum(integrate_triangle(lambda p: np.exp(p[0] + 0.3) * np.cos(3 * p[1]), *tri)
                  for tri in box_polygon_triangles(square_mesh, i))
        assert abs(r[i] - ref) < 1e-8 * abs(ref)


def test_rhs_rejects_nonfinite(square_mesh, square_dual):
    with pytest.raises(ValueError):
        assemble_fvm_rhs(square_mesh, square_dual, lambda x, t: np.full(len(x), np.inf),
                         lambda x, n, t: np.zeros(len(x)), 0.0)
