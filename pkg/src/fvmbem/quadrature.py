"""Gauss rules on intervals and triangles."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed (Stroud conical product) Gauss rule on the reference triangle.

    Returns barycentric coordinates of shape ``(q, 3)`` and weights summing
    to one, so that ``area * sum(w * f(points))`` integrates ``f`` over a
    triangle. Exact for polynomials of total degree ``degree``.
    """
    # the Jacobian 1 - u raises the degree in u by one
    n = (degree + 1) // 2 + 1
    s, ws = gauss_legendre(n)
    u, v = np.meshgrid(s, s, indexing="ij")
    wu, wv = np.meshgrid(ws, ws, indexing="ij")
    # (u, v) in the unit square -> (x, y) = (u, v (1 - u)), Jacobian 1 - u
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    w = (wu * wv * (1.0 - u)).ravel() * 2.0
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, w


def graded_rule(n_levels=35, ratio=0.35, n_points=12):
    """Composite Gauss rule on [0, 1] geometrically graded towards 0.

    Integrates functions with integrable endpoint singularities such as
    ``log s`` or ``s log s`` at ``s = 0`` to near machine precision.
    """
    return _graded_rule(n_levels, ratio, n_points)


@lru_cache(maxsize=None)
def _graded_rule(n_levels, ratio, n_points):
    s, w = gauss_legendre(n_points)
    breaks = np.concatenate([[0.0], ratio ** np.arange(n_levels, -1, -1)])
    lo, hi = breaks[:-1], breaks[1:]
    nodes = (lo[:, None] + (hi - lo)[:, None] * s[None, :]).ravel()
    weights = ((hi - lo)[:, None] * w[None, :]).ravel()
    return nodes, weights


def composite_rule(n_panels, n_points=16):
    """Uniform composite Gauss rule on [0, 1]."""
    return _composite_rule(n_panels, n_points)


@lru_cache(maxsize=None)
def _composite_rule(n_panels, n_points):
    s, w = gauss_legendre(n_points)
    lo = np.arange(n_panels) / n_panels
    nodes = (lo[:, None] + s[None, :] / n_panels).ravel()
    weights = np.tile(w / n_panels, n_panels)
    return nodes, weights
