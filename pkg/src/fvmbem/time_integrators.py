"""Backward Euler time stepping of the coupled system.

The variant scheme solves the same step system as the classical one but
with omega-weighted data averages

    v_hat^n = (1 / tau^n) int_{t^{n-1}}^{t^n} v(t) omega^n(t) dt,
    omega^n(t) = (6 t - 2 t^n - 4 t^{n-1}) / tau^n,

which is ``6 s - 2`` in the local coordinate ``s = (t - t^{n-1}) / tau^n``.
"""

from dataclasses import dataclass

import numpy as np

from .coupling import LoadAssembler, NumericalError
from .quadrature import gauss_legendre
from .spaces import project_L2_nodal

METHODS = ("variant", "classical")


@dataclass(eq=False)
class TimeGrid:
    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 2:
            raise ValueError("a time grid needs at least two knots")
        if np.any(np.diff(self.knots) <= 0.0):
            raise ValueError("time knots must increase strictly")

    @classmethod
    def uniform(cls, T, n_steps):
        return cls(np.linspace(0.0, T, int(n_steps) + 1))

    @classmethod
    def with_step(cls, T, tau):
        n = int(round(T / tau))
        if n < 1 or abs(n * tau - T) > 1e-9 * T:
            raise ValueError(f"step {tau} does not divide the horizon {T}")
        return cls.uniform(T, n)

    @property
    def steps(self):
        return np.diff(self.knots)

    @property
    def tau(self):
        return float(self.steps.max())

    @property
    def N(self):
        return len(self.knots) - 1

    @property
    def T(self):
        return float(self.knots[-1])


def omega(s):
    """The weight in local slab coordinates ``s`` in [0, 1]."""
    return 6.0 * np.asarray(s) - 2.0


class WeightedAverager:
    """3-point Gauss rule for ``v_hat^n``; exact for polynomials of degree 4 in t."""

    def __init__(self, n_points=3):
        s, w = gauss_legendre(n_points)
        self.s = s
        self.w = w * omega(s)

    def nodes(self, grid, n):
        return grid.knots[n - 1] + self.s * grid.steps[n - 1]

    def __call__(self, fn, grid, n):
        """``v_hat^n`` for ``fn(t)`` returning arrays."""
        return sum(w * np.asarray(fn(t)) for w, t in zip(self.w, self.nodes(grid, n)))


def weight_identities(grid, n_points=3):
    """Per slab ``(int omega^n dt - tau^n, int (omega^n)^2 dt - 4 tau^n)``."""
    s, w = gauss_legendre(n_points)
    taus = grid.steps
    first = taus * (w @ omega(s)) - taus
    second = taus * (w @ omega(s) ** 2) - 4.0 * taus
    return first, second


@dataclass(eq=False)
class TrajectorySolution:
    grid: TimeGrid
    mesh: object
    U: np.ndarray  # (N + 1, n1)
    Phi: np.ndarray  # (N, n2), Phi[n - 1] lives on slab n

    def u_at(self, t):
        """Nodal values at the time knot nearest to ``t``."""
        if t < -1e-12 or t > self.grid.T + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.grid.T}]")
        return self.U[int(np.argmin(np.abs(self.grid.knots - t)))]


class Stepper:
    """Assembled load, averaging rule and cached factorisations for a system."""

    def __init__(self, system, problem, method="variant", load=None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.system = system
        self.problem = problem
        self.method = method
        self.load = LoadAssembler(system, problem) if load is None else load
        self.averager = WeightedAverager()

    def rhs_data(self, grid, n):
        """Data part of the right-hand side for step ``n``: ``(interior, boundary)``."""
        if self.method == "classical":
            L = self.load(grid.knots[n])
            return L.interior, L.boundary
        parts = [self.load(t) for t in self.averager.nodes(grid, n)]
        interior = sum(w * p.interior for w, p in zip(self.averager.w, parts))
        boundary = sum(w * p.boundary for w, p in zip(self.averager.w, parts))
        return interior, boundary

    def step(self, grid, n, U_prev):
        tau = grid.steps[n - 1]
        interior, boundary = self.rhs_data(grid, n)
        rhs = np.concatenate([self.system.M_chi @ U_prev / tau + interior, boundary])
        x = self.system.factor(tau).solve(rhs)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite solution in step {n}")
        return self.system.split(x)


def step_variant_euler(system, problem, grid, n, U_prev):
    return Stepper(system, problem, "variant").step(grid, n, U_prev)


def step_classical_euler(system, problem, grid, n, U_prev):
    return Stepper(system, problem, "classical").step(grid, n, U_prev)


def initial_value(system, problem):
    return project_L2_nodal(system.mesh, problem.q).coeffs


def run(problem, system, grid, method="variant", stepper=None, callback=None):
    """Time march from ``U^0 = P_h q``; returns the full trajectory."""
    stepper = Stepper(system, problem, method) if stepper is None else stepper
    U = np.empty((grid.N + 1, system.n1))
    Phi = np.empty((grid.N, system.n2))
    U[0] = initial_value(system, problem)
    for n in range(1, grid.N + 1):
        try:
            U[n], Phi[n - 1] = stepper.step(grid, n, U[n - 1])
        except NumericalError as exc:
            raise NumericalError(f"step {n} of {grid.N}: {exc}") from exc
        if callback is not None:
            callback(n, U[n], Phi[n - 1])
    return TrajectorySolution(grid, system.mesh, U, Phi)
