import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fvmbem.mesh import build_dual, build_uniform_square_mesh
from fvmbem.spaces import (BoundaryDensity, NodalFunction, box_interpolation_defect,
                           chi_inner_product, chi_mass_matrix, fem_mass_matrix,
                           interpolate_to_boxes, project_boundary_mean, project_L2_nodal)
from oracles import edge_mean_defect


def test_edge_mean_identity(rng, test_meshes):
    for mesh in test_meshes:
        for _ in range(5):
            v = rng.standard_normal(mesh.n_vertices)
            assert np.abs(edge_mean_defect(mesh, v)).max() < 1e-12


def test_box_defect_bound(rng, test_meshes):
    for mesh in test_meshes:
        v = NodalFunction(mesh, rng.standard_normal(mesh.n_vertices))
        grad = np.einsum("kid,ki->kd", mesh.basis_gradients, v.coeffs[mesh.triangles])
        grad_norm = np.linalg.norm(grad, axis=1) * np.sqrt(mesh.areas)
        defect = box_interpolation_defect(mesh, v)
        assert np.all(defect <= mesh.triangle_diameters * grad_norm)
        assert defect.max() > 0


def test_box_defect_zero_for_constants(square_mesh):
    v = NodalFunction(square_mesh, np.full(square_mesh.n_vertices, 3.0))
    assert box_interpolation_defect(square_mesh, v).max() < 1e-14


def test_chi_mass_row_sums_are_box_areas(test_meshes):
    for mesh in test_meshes:
        d = build_dual(mesh)
        M = chi_mass_matrix(mesh)
        np.testing.assert_allclose(M @ np.ones(mesh.n_vertices), d.box_areas, rtol=1e-13)


def test_chi_mass_local_entries(square_dual):
    # int_{V_i cap K} phi_j by quadrature on the box sub-triangles
    from fvmbem.fvm import box_quadrature
    mesh = square_dual.mesh
    _, lam, w = box_quadrature(square_dual, 2)
    local = np.einsum("miq,iqj->mij", w, lam)
    expected = mesh.areas[:, None, None] * (np.full((3, 3), 7.0) + 15 * np.eye(3)) / 108
    np.testing.assert_allclose(local, expected, rtol=1e-13)


def test_chi_symmetry_and_positivity(rng, test_meshes):
    for mesh in test_meshes:
        M = chi_mass_matrix(mesh)
        assert abs(M - M.T).max() < 1e-15
        for _ in range(5):
            v = NodalFunction(mesh, rng.standard_normal(mesh.n_vertices))
            w = NodalFunction(mesh, rng.standard_normal(mesh.n_vertices))
            assert abs(chi_inner_product(v, w) - chi_inner_product(w, v)) < 1e-12
        assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_interpolation_to_boxes(square_dual, rng):
    mesh = square_dual.mesh
    v = NodalFunction(mesh, rng.standard_normal(mesh.n_vertices))
    box = interpolate_to_boxes(v, square_dual)
    np.testing.assert_array_equal(box(mesh.vertices), v.coeffs)
    other = build_dual(build_uniform_square_mesh(0.0, 0.5, 0.25))
    with pytest.raises(ValueError):
        interpolate_to_boxes(v, other)


def test_shape_validation(square_mesh):
    with pytest.raises(ValueError):
        NodalFunction(square_mesh, np.zeros(3))
    with pytest.raises(ValueError):
        BoundaryDensity(square_mesh, np.zeros(3))


def test_L2_projection_reproduces_linears(square_mesh):
    v = project_L2_nodal(square_mesh, lambda x: 2 * x[:, 0] - x[:, 1] + 0.5)
    x = square_mesh.vertices
    np.testing.assert_allclose(v.coeffs, 2 * x[:, 0] - x[:, 1] + 0.5, atol=1e-13)


def test_L2_projection_orthogonality(square_mesh):
    g = lambda x: np.exp(x[:, 0]) * np.sin(3 * x[:, 1])  # noqa: E731
    v = project_L2_nodal(square_mesh, g, degree=8)
    fine = project_L2_nodal(square_mesh, g, degree=10)
    np.testing.assert_allclose(v.coeffs, fine.coeffs, atol=1e-10)
    M = fem_mass_matrix(square_mesh)
    assert np.isclose(M.sum(), square_mesh.area)


def test_L2_projection_rejects_nan(square_mesh):
    with pytest.raises(ValueError):
        project_L2_nodal(square_mesh, lambda x: np.full(len(x), np.nan))


def test_boundary_mean_constant_and_linear(square_mesh):
    mean = project_boundary_mean(square_mesh, lambda x, n: np.full(len(x), 2.5))
    np.testing.assert_allclose(mean.coeffs, 2.5)
    mean = project_boundary_mean(square_mesh, lambda x, n: x[:, 0] + 3 * x[:, 1])
    mid = square_mesh.boundary_midpoints
    np.testing.assert_allclose(mean.coeffs, mid[:, 0] + 3 * mid[:, 1], atol=1e-14)


def test_boundary_mean_oracle(square_mesh):
    mean = project_boundary_mean(square_mesh, lambda x, n: np.sin(np.pi * (x[:, 0] + 2 * x[:, 1])))
    be = square_mesh.boundary_edges
    for k in range(len(be)):
        a, b = square_mesh.vertices[be[k, 0]], square_mesh.vertices[be[k, 1]]
        ref = quad(lambda s: np.sin(np.pi * ((a + s * (b - a)) @ [1.0, 2.0])), 0, 1,
                   epsabs=1e-15, epsrel=1e-13)[0]
        assert abs(mean.coeffs[k] - ref) <= 1e-10 * abs(ref)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9),
       st.lists(st.floats(-10, 10), min_size=9, max_size=9))
def test_chi_product_symmetric_property(a, b):
    mesh = build_uniform_square_mesh(-0.25, 0.25, 0.25)
    v, w = NodalFunction(mesh, a), NodalFunction(mesh, b)
    scale = 1.0 + np.abs(a).max() * np.abs(b).max()
    assert abs(chi_inner_product(v, w) - chi_inner_product(w, v)) <= 1e-14 * scale
