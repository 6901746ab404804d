import csv
import math

import numpy as np
import pytest

from fvmbem.bem import Boundary
from fvmbem.coupling import build_system
from fvmbem.errors import (CSV_HEADER, ConvergenceReport, ExactSolution, FluxErrorNorm,
                           LevelResult, compute_eoc, error_flux, error_H_T)
from fvmbem.mesh import build_uniform_square_mesh
from fvmbem.problems import problem_tanh_layer
from fvmbem.time_integrators import TimeGrid, TrajectorySolution, run


def linear_exact():
    return ExactSolution(
        u=lambda x, t: (1 + t) * (x[:, 0] + 2 * x[:, 1]),
        grad_u=lambda x, t: np.tile([1 + t, 2 * (1 + t)], (len(x), 1)),
        u_e=lambda x, t: 0 * x[:, 0],
        grad_ue=lambda x, t: 0 * x)


def test_H_T_zero_for_injected_solution(square_mesh):
    exact = linear_exact()
    grid = TimeGrid.uniform(1.0, 4)
    U = np.array([exact.u(square_mesh.vertices, t) for t in grid.knots])
    traj = TrajectorySolution(grid, square_mesh, U, np.zeros((4, 16)))
    assert error_H_T(traj, exact) < 1e-13


def test_H_T_constant_offset(square_mesh):
    # u_h = u + 1: the error is ||1||_{L2} = sqrt(|Omega| T)
    exact = linear_exact()
    grid = TimeGrid.uniform(2.0, 3)
    U = np.array([exact.u(square_mesh.vertices, t) + 1 for t in grid.knots])
    traj = TrajectorySolution(grid, square_mesh, U, np.zeros((3, 16)))
    assert np.isclose(error_H_T(traj, exact), math.sqrt(0.25 * 2.0), rtol=1e-13)


def nearest_edge(bnd, y):
    r = y[:, None, :] - bnd.starts[None]
    s = np.clip((r * bnd.tangents[None]).sum(-1) / bnd.lengths, 0.0, 1.0)
    proj = bnd.starts[None] + s[..., None] * (bnd.ends - bnd.starts)[None]
    return np.argmin(np.linalg.norm(y[:, None, :] - proj, axis=2), axis=1)


def test_flux_norm_zero_and_scaling(square_mesh):
    bnd = Boundary.from_mesh(square_mesh)
    norm = FluxErrorNorm(bnd)
    phi = np.linspace(1.0, 2.0, bnd.n_edges)
    grid = TimeGrid.uniform(1.0, 2)
    traj = TrajectorySolution(grid, square_mesh, np.zeros((3, 25)), np.tile(phi, (2, 1)))

    def flux(scale):
        return lambda y, n, t: scale * phi[nearest_edge(bnd, y)]
    assert norm(traj, flux(1.0)) < 1e-12
    e1, e2 = norm(traj, flux(2.0)), norm(traj, flux(3.0))
    assert e1 > 0 and np.isclose(e2, 2 * e1)


def test_compute_eoc():
    h = [0.1, 0.05, 0.025]
    assert compute_eoc([1.0, 0.5, 0.25], h) == [None, pytest.approx(1.0), pytest.approx(1.0)]
    assert compute_eoc([1.0, 0.25], h[:2]) == [None, pytest.approx(2.0)]
    assert compute_eoc([1.0, 0.0], h[:2]) == [None, None]


def test_report_csv(tmp_path):
    report = ConvergenceReport("demo")
    for k in range(3):
        report.add(LevelResult(k, 0.125 / 2 ** k, 0.05 / 2 ** k, 0.3 / 2 ** k, 0.1 / 4 ** k))
    path = tmp_path / "demo.csv"
    report.to_csv(path)
    rows = list(csv.reader(path.read_text().splitlines()))
    assert rows[0] == CSV_HEADER
    assert rows[0] == "level,hinv,err_V,err_H1,err_sum,eoc_V,eoc_H1,eoc_sum".split(",")
    assert len(rows) == 4
    assert rows[1][5:] == ["nan", "nan", "nan"]
    assert float(rows[2][5]) == pytest.approx(1.0) and float(rows[2][6]) == pytest.approx(2.0)
    assert rows[1][1] == "8"
    assert report.final_eoc("err_H1") == pytest.approx(2.0)
    text = path.read_bytes()
    report.to_csv(path)
    assert path.read_bytes() == text


def test_tanh_errors_decrease():
    p = problem_tanh_layer()
    eh, ev = [], []
    for k, h in enumerate((0.125, 0.0625)):
        system = build_system(p, h)
        traj = run(p, system, TimeGrid.with_step(1.0, 0.05 / 2 ** k))
        eh.append(error_H_T(traj, p.exact))
        ev.append(error_flux(traj, p.exact, system.boundary))
    assert eh[0] > eh[1] > 0
    assert ev[0] / ev[1] > 1


def test_exact_flux_uses_outward_normal():
    p = problem_tanh_layer()
    mesh = build_uniform_square_mesh(0.0, 0.5, 0.125)
    bnd = Boundary.from_mesh(mesh)
    mid = 0.5 * (bnd.starts + bnd.ends)
    # u_e = (1 - t) log|x - (1/4, 1/4)|: the gradient points away from the centre
    assert np.all(p.exact.flux(mid, bnd.normals, 0.5) > 0)
