"""Convergence studies and snapshot runs with CSV, VTK and PNG output."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coupling import build_system
from .errors import ConvergenceReport, FluxErrorNorm, LevelResult, error_H_T
from .fvm import UpwindScheme
from .problems import get_problem
from .time_integrators import TimeGrid, run

log = logging.getLogger(__name__)

SNAPSHOT_TIMES = (0.0625, 0.125, 0.25, 0.5, 0.75, 1.0)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "tanh"
    levels: int = 5
    h0: float = 0.125
    tau0: float = 0.05
    T: float = 1.0
    method: str = "variant"
    upwind: str = None  # None: the problem's default
    upwind_norm: str = "max_entry"
    alpha_threshold: float = None
    times: tuple = SNAPSHOT_TIMES
    out_dir: str = "results"
    plots: bool = True
    problem_kw: dict = field(default_factory=dict)

    _casts = {"levels": int, "h0": float, "tau0": float, "T": float,
              "alpha_threshold": float, "plots": lambda s: s.lower() in ("1", "true", "yes")}

    def update(self, values):
        for key, raw in values.items():
            if key not in self.__dataclass_fields__ or key.startswith("_"):
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            if key == "times" and isinstance(raw, str):
                raw = tuple(float(v) for v in raw.replace(",", " ").split())
            elif key in self._casts and isinstance(raw, str):
                try:
                    raw = self._casts[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            setattr(self, key, raw)
        return self

    def validate(self):
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.h0 <= 0 or self.tau0 <= 0 or self.T <= 0:
            raise ConfigError("h0, tau0 and T must be positive")
        if self.method not in ("variant", "classical"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.upwind is not None and self.upwind not in ("none", "full", "steerable"):
            raise ConfigError(f"unknown upwind scheme {self.upwind!r}")
        if self.upwind_norm not in ("max_entry", "row_sum"):
            raise ConfigError(f"unknown upwind norm {self.upwind_norm!r}")
        n = round(self.T / self.tau0)
        if n < 1 or abs(n * self.tau0 - self.T) > 1e-9 * self.T:
            raise ConfigError(f"tau0 = {self.tau0} does not divide T = {self.T}")
        return self

    def build_problem(self):
        kw = dict(self.problem_kw)
        if self.alpha_threshold is not None:
            if self.problem != "transport":
                raise ConfigError("alpha_threshold applies to the transport problem only")
            kw["alpha_threshold"] = self.alpha_threshold
        try:
            problem = get_problem(self.problem, **kw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        opts = {"T": self.T, "method": self.method}
        if self.upwind is not None:
            opts["scheme"] = self.upwind
        return problem.with_options(**opts)

    def scheme(self, problem):
        return UpwindScheme(problem.scheme, self.upwind_norm)


def read_config(path):
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def solve_level(problem, h, tau, method=None, scheme=None):
    system = build_system(problem, h, scheme)
    grid = TimeGrid.with_step(problem.T, tau)
    traj = run(problem, system, grid, method or problem.method)
    return system, traj


def run_convergence(problem, levels, h0=0.125, tau0=0.05, method=None, scheme=None,
                    out_dir=None, plots=True):
    """Errors and EOC for ``h = h0 / 2^l``, ``tau = tau0 / 2^l``, ``l < levels``."""
    if problem.exact is None:
        raise ConfigError(f"problem {problem.name!r} has no exact solution")
    report = ConvergenceReport(problem.name)
    for level in range(levels):
        h, tau = h0 / 2 ** level, tau0 / 2 ** level
        start = time.perf_counter()
        system, traj = solve_level(problem, h, tau, method, scheme)
        e_h = error_H_T(traj, problem.exact)
        e_v = FluxErrorNorm(system.boundary)(traj, problem.exact.flux)
        row = LevelResult(level, h, tau, e_v, e_h, time.perf_counter() - start)
        report.add(row)
        log.info("%s level %d: h=%g tau=%g err_V=%.6e err_H1=%.6e (%.1fs)",
                 problem.name, level, h, tau, e_v, e_h, row.seconds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / f"{problem.name}_convergence.csv")
        if plots:
            from .plotting import plot_convergence
            plot_convergence(report, out / f"{problem.name}_convergence.png")
    return report


def run_snapshots(problem, h=0.125, tau=0.05, times=SNAPSHOT_TIMES, out_dir="results",
                  method=None, scheme=None, plots=True):
    """VTK file per requested time (nearest time knot) plus an optional PNG panel."""
    times = tuple(float(t) for t in times)
    if any(t < 0.0 or t > problem.T for t in times):
        raise ConfigError(f"snapshot times must lie in [0, {problem.T}]")
    system, traj = solve_level(problem, h, tau, method, scheme)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, t in enumerate(times):
        idx = int(np.argmin(np.abs(traj.grid.knots - t)))
        path = out / f"{problem.name}_u_{k:02d}_t{t:.4f}.vtk"
        traj.mesh.to_vtk(path, {"u": traj.U[idx]},
                         title=f"{problem.name} t={traj.grid.knots[idx]:.6g}")
        paths.append(path)
    if plots:
        from .plotting import plot_snapshots
        plot_snapshots(traj, times, out / f"{problem.name}_snapshots.png",
                       boxes=problem.extras.get("source_boxes"))
    return traj, paths
