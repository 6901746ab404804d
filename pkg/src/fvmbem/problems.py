"""Model problems: the tanh layer, the L-shape corner singularity and transport.

Data callables use ``f(x, t)``, ``g1(x, n, t)``, ``g2(x, n, t)`` and
``q(x)`` with ``x`` and ``n`` of shape ``(p, 2)``.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ExactSolution
from .fvm import CoefficientSet
from .mesh import build_lshape_mesh, build_uniform_square_mesh


@dataclass(eq=False)
class ProblemSpec:
    name: str
    domain: str  # "square" or "lshape"
    coeffs: CoefficientSet
    f: Callable
    g1: Callable
    g2: Callable
    q: Callable
    T: float = 1.0
    exact: Optional[ExactSolution] = None
    scheme: str = "none"
    method: str = "variant"
    lower: float = 0.0
    upper: float = 0.5
    base_spacing: float = 0.125
    base_tau: float = 0.05
    extras: dict = field(default_factory=dict)

    def build_mesh(self, spacing):
        if self.domain == "square":
            return build_uniform_square_mesh(self.lower, self.upper, spacing)
        if self.domain == "lshape":
            return build_lshape_mesh(spacing)
        raise ValueError(f"unknown domain {self.domain!r}")

    def with_options(self, **kw):
        return replace(self, **kw)


def _log_field(centre):
    """``log|x - centre|`` and its gradient."""
    c = np.asarray(centre, dtype=float)

    def value(x):
        d = x - c
        return 0.5 * np.log((d * d).sum(-1))

    def grad(x):
        d = x - c
        return d / (d * d).sum(-1)[:, None]

    return value, grad


def _isotropic(alpha):
    def diffusion(x):
        a = alpha(x)
        out = np.zeros((len(x), 2, 2))
        out[:, 0, 0] = a
        out[:, 1, 1] = a
        return out
    return diffusion


def _g2_from(exact, coeffs):
    """``(A grad u - [b u on inflow]) . n - d_n u_e`` from closed-form fields."""
    def g2(x, n, t):
        A = coeffs.diffusion(x)
        flux = np.einsum("pab,pb,pa->p", A, exact.grad_u(x, t), n)
        bn = (coeffs.velocity(x) * n).sum(-1)
        inflow = np.where(bn < 0.0, bn * exact.u(x, t), 0.0)
        return flux - inflow - exact.flux(x, n, t)
    return g2


# -- tanh layer ---------------------------------------------------------------

def problem_tanh_layer(width=0.02, alpha_low=0.42, alpha_high=1.0, speed=1000.0,
                       reaction=5.0, scheme="full"):
    """Steep interior layer at ``x1 = 1/4`` on ``(0, 1/2)^2``, convection dominated."""
    k = 1.0 / width
    ue, gue = _log_field((0.25, 0.25))

    def alpha(x):
        return np.where(x[:, 1] < 0.25, alpha_low, alpha_high)

    def th(x):
        return np.tanh((0.25 - x[:, 0]) * k)

    def u(x, t):
        return 0.5 * (1.0 + t) * (1.0 - th(x))

    def grad_u(x, t):
        sech2 = 1.0 - th(x) ** 2
        g = np.zeros((len(x), 2))
        g[:, 0] = 0.5 * k * (1.0 + t) * sech2
        return g

    def f(x, t):
        T = th(x)
        sech2 = 1.0 - T * T
        u_t = 0.5 * (1.0 - T)
        ux = 0.5 * k * (1.0 + t) * sech2
        uxx = k * k * (1.0 + t) * sech2 * T
        uu = 0.5 * (1.0 + t) * (1.0 - T)
        # u_t - alpha u_xx + div(b u) + c u with div b = speed
        return u_t - alpha(x) * uxx + speed * uu + speed * x[:, 0] * ux + reaction * uu

    exact = ExactSolution(
        u=u, grad_u=grad_u,
        u_e=lambda x, t: (1.0 - t) * ue(x),
        grad_ue=lambda x, t: (1.0 - t) * gue(x))
    coeffs = CoefficientSet(
        diffusion=_isotropic(alpha),
        velocity=lambda x: np.column_stack([speed * x[:, 0], np.zeros(len(x))]),
        reaction=lambda x: np.full(len(x), reaction))
    return ProblemSpec(
        name="tanh", domain="square", coeffs=coeffs, f=f,
        g1=lambda x, n, t: u(x, t) - exact.u_e(x, t),
        g2=_g2_from(exact, coeffs),
        q=lambda x: u(x, 0.0), T=1.0, exact=exact, scheme=scheme,
        lower=0.0, upper=0.5)


# -- L-shape -------------------------------------------------------------------

def _corner_powers(x, p):
    """``z^p`` for the branch with argument in ``[0, 2 pi)``, as (re, im)."""
    r = np.hypot(x[:, 0], x[:, 1])
    phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2.0 * np.pi)
    rp = r ** p
    return rp * np.cos(p * phi), rp * np.sin(p * phi)


def corner_function(x):
    """``S = r^(2/3) sin(2 phi / 3)`` with its gradient and Hessian entries."""
    _, s = _corner_powers(x, 2.0 / 3.0)
    # S = Im z^(2/3); for holomorphic F = P + iS: S_x = Im F', S_y = Re F'
    re1, im1 = _corner_powers(x, -1.0 / 3.0)
    grad = np.column_stack([(2.0 / 3.0) * im1, (2.0 / 3.0) * re1])
    re2, im2 = _corner_powers(x, -4.0 / 3.0)
    sxx = -(2.0 / 9.0) * im2
    sxy = -(2.0 / 9.0) * re2
    return s, grad, sxx, sxy


def problem_lshape(scheme="none"):
    """Pure diffusion with a corner singularity at the reentrant corner."""
    ue, gue = _log_field((-0.125, 0.125))

    def diffusion(x):
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = 10.0 + np.cos(x[:, 0])
        out[:, 1, 1] = 10.0 + np.sin(x[:, 1])
        out[:, 0, 1] = out[:, 1, 0] = 160.0 * x[:, 0] * x[:, 1]
        return out

    def u(x, t):
        return (1.0 + t * t) * corner_function(x)[0]

    def grad_u(x, t):
        return (1.0 + t * t) * corner_function(x)[1]

    def f(x, t):
        s, g, sxx, sxy = corner_function(x)
        # div(A grad S) = (div A) . grad S + A : hess S, with S_yy = -S_xx
        div_a = np.column_stack([-np.sin(x[:, 0]) + 160.0 * x[:, 0],
                                 160.0 * x[:, 1] + np.cos(x[:, 1])])
        a11 = 10.0 + np.cos(x[:, 0])
        a22 = 10.0 + np.sin(x[:, 1])
        a12 = 160.0 * x[:, 0] * x[:, 1]
        div_flux = (div_a * g).sum(-1) + (a11 - a22) * sxx + 2.0 * a12 * sxy
        return 2.0 * t * s - (1.0 + t * t) * div_flux

    exact = ExactSolution(
        u=u, grad_u=grad_u,
        u_e=lambda x, t: (1.0 - t) * ue(x),
        grad_ue=lambda x, t: (1.0 - t) * gue(x))
    coeffs = CoefficientSet(
        diffusion=diffusion,
        velocity=lambda x: np.zeros((len(x), 2)),
        reaction=lambda x: np.zeros(len(x)))
    return ProblemSpec(
        name="lshape", domain="lshape", coeffs=coeffs, f=f,
        g1=lambda x, n, t: u(x, t) - exact.u_e(x, t),
        g2=_g2_from(exact, coeffs),
        q=lambda x: u(x, 0.0), T=1.0, exact=exact, scheme=scheme,
        lower=-0.25, upper=0.25)


# -- transport -----------------------------------------------------------------

SOURCE_BOXES = (
    # (x1 range, x2 range, value, switch-off time)
    ((-0.2, -0.1), (-0.2, -0.05), 50.0, 0.25),
    ((-0.2, -0.1), (0.05, 0.2), 25.0, 0.5),
)


def in_source_box(x, box):
    (a, b), (c, d) = box[0], box[1]
    return (x[:, 0] >= a) & (x[:, 0] <= b) & (x[:, 1] >= c) & (x[:, 1] <= d)


def problem_transport(alpha_threshold=0.25, alpha_left=1e-2, alpha_right=1e-3,
                      scheme="full"):
    """Two switched sources transported by a rotating field; no exact solution.

    ``alpha = alpha_left`` for ``x1 < alpha_threshold``; with the default
    threshold this covers the whole square.
    """
    def f(x, t):
        out = np.zeros(len(x))
        for box in SOURCE_BOXES:
            if t < box[3]:
                out = np.where(in_source_box(x, box), box[2], out)
        return out

    coeffs = CoefficientSet(
        diffusion=_isotropic(lambda x: np.where(x[:, 0] < alpha_threshold,
                                                alpha_left, alpha_right)),
        velocity=lambda x: np.column_stack([0.25 - 4.0 * x[:, 1], 4.0 * x[:, 0]]),
        reaction=lambda x: np.ones(len(x)))
    zero_b = lambda x, n, t: np.zeros(len(x))  # noqa: E731
    return ProblemSpec(
        name="transport", domain="square", coeffs=coeffs, f=f,
        g1=zero_b, g2=zero_b, q=lambda x: np.zeros(len(x)), T=1.0,
        scheme=scheme, lower=-0.25, upper=0.25,
        extras={"alpha_threshold": alpha_threshold, "source_boxes": SOURCE_BOXES})


PROBLEMS = {
    "tanh": problem_tanh_layer,
    "lshape": problem_lshape,
    "transport": problem_transport,
}


def get_problem(name, **kw):
    try:
        return PROBLEMS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
