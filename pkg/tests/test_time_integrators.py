import numpy as np
import pytest
from scipy.integrate import quad

from fvmbem.coupling import build_system
from fvmbem.problems import get_problem, problem_lshape, problem_tanh_layer
from fvmbem.spaces import project_L2_nodal
from fvmbem.time_integrators import (Stepper, TimeGrid, WeightedAverager, initial_value,
                                     omega, run, step_classical_euler, step_variant_euler,
                                     weight_identities)


def test_time_grid():
    g = TimeGrid.with_step(1.0, 0.05)
    assert g.N == 20 and np.isclose(g.tau, 0.05) and g.T == 1.0
    with pytest.raises(ValueError):
        TimeGrid.with_step(1.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0])


def test_weight_identities_nonuniform():
    grid = TimeGrid(np.cumsum(np.r_[0.0, np.random.default_rng(5).uniform(0.01, 0.2, 30)]))
    first, second = weight_identities(grid)
    assert np.abs(first).max() < 1e-12 and np.abs(second).max() < 1e-12


def test_weight_identities_against_quad():
    t0, t1 = 0.3, 0.37
    tau = t1 - t0
    w = lambda t: omega((t - t0) / tau)  # noqa: E731
    assert np.isclose(quad(w, t0, t1)[0], tau, rtol=0, atol=1e-15)
    assert np.isclose(quad(lambda t: w(t) ** 2, t0, t1)[0], 4 * tau, rtol=0, atol=1e-15)
    assert omega(1.0) == 4.0 and omega(0.0) == -2.0


def test_averager_reproduces_linear_data():
    grid = TimeGrid.uniform(1.0, 7)
    av = WeightedAverager()
    for n in range(1, grid.N + 1):
        assert np.isclose(av(lambda t: 3.0 - 2.0 * t, grid, n), 3.0 - 2.0 * grid.knots[n])


def test_averager_quadratic_oracle():
    grid = TimeGrid.uniform(1.0, 8)
    av = WeightedAverager()
    for n in (1, 4, 8):
        t0, t1 = grid.knots[n - 1], grid.knots[n]
        tau = t1 - t0
        ref = quad(lambda t: t * t * omega((t - t0) / tau), t0, t1)[0] / tau
        assert np.isclose(av(lambda t: t * t, grid, n), ref, rtol=0, atol=1e-14)
        assert np.isclose(ref - t1 ** 2, -tau ** 2 / 6, rtol=0, atol=1e-14)


@pytest.fixture(scope="module")
def tanh_system():
    p = problem_tanh_layer()
    return p, build_system(p, 0.125)


def test_linear_data_gives_identical_trajectories(tanh_system):
    p, system = tanh_system
    grid = TimeGrid.with_step(1.0, 0.05)
    a = run(p, system, grid, "variant")
    b = run(p, system, grid, "classical")
    assert np.abs(a.U - b.U).max() < 1e-10
    assert np.abs(a.Phi - b.Phi).max() < 1e-10


def test_quadratic_data_differs():
    p = problem_lshape()
    system = build_system(p, 0.125)
    grid = TimeGrid.with_step(1.0, 0.1)
    a = run(p, system, grid, "variant")
    b = run(p, system, grid, "classical")
    assert np.abs(a.U - b.U).max() > 1e-6


def test_rhs_difference_matches_time_oracle():
    p = get_problem("transport")
    p = p.with_options(f=lambda x, t: t * t * (1.0 + x[:, 0]))
    system = build_system(p, 0.125)
    grid = TimeGrid.with_step(1.0, 0.125)
    var, cla = Stepper(system, p, "variant"), Stepper(system, p, "classical")
    F0 = Stepper(system, p.with_options(f=lambda x, t: 1.0 + x[:, 0]), "classical")
    F0 = F0.rhs_data(grid, 1)[0]
    for n in (1, 5, 8):
        t0, t1 = grid.knots[n - 1], grid.knots[n]
        tau = t1 - t0
        coef = quad(lambda t: t * t * omega((t - t0) / tau), t0, t1)[0] / tau - t1 ** 2
        diff = var.rhs_data(grid, n)[0] - cla.rhs_data(grid, n)[0]
        assert np.abs(diff - coef * F0).max() < 1e-10


def test_single_step_matches_run(tanh_system):
    p, system = tanh_system
    grid = TimeGrid.uniform(0.05, 1)
    traj = run(p, system, grid)
    U0 = initial_value(system, p)
    U1, Phi1 = step_variant_euler(system, p, grid, 1, U0)
    np.testing.assert_array_equal(traj.U[1], U1)
    np.testing.assert_array_equal(traj.Phi[0], Phi1)
    U1c, _ = step_classical_euler(system, p, grid, 1, U0)
    assert np.abs(U1 - U1c).max() < 1e-10


def test_nonuniform_grid_with_same_knots(tanh_system):
    p, system = tanh_system
    a = run(p, system, TimeGrid.uniform(0.2, 4))
    b = run(p, system, TimeGrid(np.array([0.0, 0.05, 0.1, 0.15, 0.2])))
    np.testing.assert_allclose(a.U, b.U, rtol=0, atol=1e-13)


def test_initial_value_is_projection(tanh_system):
    p, system = tanh_system
    U0 = initial_value(system, p)
    np.testing.assert_array_equal(U0, project_L2_nodal(system.mesh, p.q).coeffs)
    traj = run(p, system, TimeGrid.uniform(0.1, 2))
    np.testing.assert_array_equal(traj.u_at(0.0), U0)
    with pytest.raises(ValueError):
        traj.u_at(0.5)


def test_callback_and_method_validation(tanh_system):
    p, system = tanh_system
    seen = []
    run(p, system, TimeGrid.uniform(0.1, 2), callback=lambda n, U, Phi: seen.append(n))
    assert seen == [1, 2]
    with pytest.raises(ValueError):
        Stepper(system, p, "crank-nicolson")


def test_nonfinite_data_raises(tanh_system):
    p, system = tanh_system
    bad = p.with_options(f=lambda x, t: np.full(len(x), np.inf) if t > 0.15 else 0 * x[:, 0])
    with pytest.raises(ValueError):
        run(bad, system, TimeGrid.uniform(0.2, 4), "classical")


def test_energy_stays_bounded_under_refinement():
    p = problem_tanh_layer()
    norms = []
    for k, h in enumerate((0.125, 0.0625)):
        system = build_system(p, h)
        traj = run(p, system, TimeGrid.with_step(1.0, 0.05 / 2 ** k))
        norms.append(np.sqrt((traj.U ** 2 @ system.dual.box_areas).max()))
    assert np.all(np.isfinite(norms))
    assert norms[1] <= 1.5 * norms[0]
