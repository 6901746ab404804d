"""Galerkin boundary element matrices for the 2D Laplace kernels.

G(z) = -log|z| / (2 pi). Normals point out of the interior domain. For an
observation edge E and a source edge E' the integral over E is done in
closed form; the remaining integral over E' uses Gauss rules chosen from
the pair geometry (closed form for identical edges, geometrically graded
rules towards a shared vertex, composite rules otherwise).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from matplotlib.path import Path
from scipy.special import xlogy

from .quadrature import composite_rule, gauss_legendre, graded_rule

INV_2PI = 1.0 / (2.0 * np.pi)
_CHUNK = 400_000


class BemError(ValueError):
    pass


@dataclass(eq=False)
class Boundary:
    """Closed polygon traced counterclockwise.

    ``edges[k] = (k, k + 1 mod n)`` indexes ``points``; ``global_ids`` maps
    boundary nodes to mesh vertices when the polygon comes from a mesh.
    """

    points: np.ndarray
    global_ids: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        n = len(self.points)
        self.edges = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])

    @classmethod
    def from_mesh(cls, mesh):
        ids = mesh.boundary_nodes
        return cls(mesh.vertices[ids], ids)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def starts(self):
        return self.points[self.edges[:, 0]]

    @cached_property
    def ends(self):
        return self.points[self.edges[:, 1]]

    @cached_property
    def lengths(self):
        return np.linalg.norm(self.ends - self.starts, axis=1)

    @cached_property
    def tangents(self):
        return (self.ends - self.starts) / self.lengths[:, None]

    @cached_property
    def normals(self):
        t = self.tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    def split(self):
        """Boundary with every edge halved (used for error norms)."""
        mids = 0.5 * (self.starts + self.ends)
        pts = np.empty((2 * len(self.points), 2))
        pts[0::2] = self.points
        pts[1::2] = mids
        return Boundary(pts)

    def contains(self, x):
        return Path(self.points).contains_points(np.atleast_2d(x), radius=0.0)

    def distance(self, x):
        return _point_edge_distance(self, np.atleast_2d(np.asarray(x, dtype=float))).min(axis=1)


# -- closed-form integrals over an observation segment -------------------------

def _log_antiderivative(u, h):
    # d/du of this is log sqrt(u^2 + h^2)
    ah = np.abs(h)
    return 0.5 * xlogy(u, u * u + h * h) - u + ah * np.arctan2(u, ah)


def _coords(d, nu, r):
    return (r * d).sum(-1), (r * nu).sum(-1)


def _log_integral_rel(d, nu, L, r):
    a, h = _coords(d, nu, r)
    return _log_antiderivative(L - a, h) - _log_antiderivative(-a, h)


def _double_layer_rel(d, nu, L, r, ny):
    a, h = _coords(d, nu, r)
    with np.errstate(divide="ignore"):
        logratio = 0.5 * (np.log((L - a) ** 2 + h * h) - np.log(a * a + h * h))
    return (d * ny).sum(-1) * logratio - (nu * ny).sum(-1) * subtended_angle(a, h, L)


def log_integral(P, d, nu, L, y):
    """``int_0^L log|P + t d - y| dt`` (broadcasting over leading axes)."""
    return _log_integral_rel(d, nu, L, y - P)


def subtended_angle(a, h, L):
    """``int_0^L h / ((t - a)^2 + h^2) dt``."""
    ah = np.abs(h)
    return np.sign(h) * (np.arctan2(L - a, ah) + np.arctan2(a, ah))


def double_layer_adjoint(P, d, nu, L, y, ny):
    """``int_0^L (x - y) . n_y / |x - y|^2 dt`` with ``x = P + t d``."""
    return _double_layer_rel(d, nu, L, y - P, ny)


def self_single_layer(L):
    """``-(1/2pi) int_E int_E log|x - y|`` for a segment of length ``L``."""
    return INV_2PI * L * L * (1.5 - np.log(L))


# -- pair classification ------------------------------------------------------

def segment_distance(p0, p1, q0, q1):
    """Euclidean distance between segments (vectorised, 0 if they intersect)."""
    def point_seg(x, a, b):
        ab = b - a
        t = np.clip(((x - a) * ab).sum(-1) / (ab * ab).sum(-1), 0.0, 1.0)
        return np.linalg.norm(x - a - t[..., None] * ab, axis=-1)

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    d = np.minimum.reduce([point_seg(p0, q0, q1), point_seg(p1, q0, q1),
                           point_seg(q0, p0, p1), point_seg(q1, p0, p1)])
    o1 = cross(p1 - p0, q0 - p0) * cross(p1 - p0, q1 - p0)
    o2 = cross(q1 - q0, p0 - q0) * cross(q1 - q0, p1 - q0)
    return np.where((o1 < 0) & (o2 < 0), 0.0, d)


def _pair_rules(bnd, obs, src):
    """Group ``(obs, src)`` edge pairs by the source-side rule they need.

    Yields ``(mask, kind, nodes, weights)`` with ``kind`` in
    {"identical", "shared_start", "shared_end", "panels"}; nodes are edge
    parameters in [0, 1] along the source edge, measured from its end node
    for "shared_end".
    """
    e_obs, e_src = bnd.edges[obs], bnd.edges[src]
    identical = obs == src
    shared_start = ~identical & ((e_src[:, 0] == e_obs[:, 0]) | (e_src[:, 0] == e_obs[:, 1]))
    shared_end = ~identical & ~shared_start & (
        (e_src[:, 1] == e_obs[:, 0]) | (e_src[:, 1] == e_obs[:, 1]))
    rest = ~(identical | shared_start | shared_end)
    g_nodes, g_weights = graded_rule()
    yield identical, "identical", None, None
    yield shared_start, "shared_start", g_nodes, g_weights
    # parameters measured from the end node: 1 - tiny would round to 1
    yield shared_end, "shared_end", g_nodes, g_weights
    if rest.any():
        idx = np.nonzero(rest)[0]
        dist = segment_distance(bnd.starts[obs[idx]], bnd.ends[obs[idx]],
                                bnd.starts[src[idx]], bnd.ends[src[idx]])
        if np.any(dist <= 0.0):
            raise BemError("overlapping non-identical boundary segments")
        panels = np.clip(np.ceil(bnd.lengths[src[idx]] / dist), 1, 64).astype(int)
        for k in np.unique(panels):
            mask = np.zeros_like(rest)
            mask[idx[panels == k]] = True
            nodes, weights = composite_rule(int(k), 16)
            yield mask, "panels", nodes, weights


def _pair_frames(bnd, obs, src, nodes, kind):
    """Observation frame ``(d, nu, L)`` and source offsets ``r = y - P``.

    For pairs sharing a vertex the observation edge is traversed starting
    at that vertex, so ``r`` is an exact offset from it and graded nodes
    never collapse onto the vertex in floating point.
    """
    q0, q1 = bnd.starts[src], bnd.ends[src]
    d, L = bnd.tangents[obs], bnd.lengths[obs]
    if kind == "panels":
        y = q0[:, None, :] + nodes[None, :, None] * (q1 - q0)[:, None, :]
        r = y - bnd.starts[obs][:, None, :]
    else:
        end = kind == "shared_end"
        v_id = bnd.edges[src, 1 if end else 0]
        far = q0 if end else q1
        near = q1 if end else q0
        r = nodes[None, :, None] * (far - near)[:, None, :]
        flip = bnd.edges[obs, 1] == v_id
        d = np.where(flip[:, None], -d, d)
    nu = np.column_stack([d[:, 1], -d[:, 0]])
    return d[:, None], nu[:, None], L[:, None], r


def _chunks(n, per_item):
    step = max(1, _CHUNK // max(1, per_item))
    for lo in range(0, n, step):
        yield slice(lo, min(n, lo + step))


def _all_pairs(n):
    obs, src = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return obs.ravel(), src.ravel()


def single_layer_entries(bnd, obs, src):
    """``<V chi_src, chi_obs>`` for arrays of edge index pairs."""
    obs, src = np.asarray(obs), np.asarray(src)
    out = np.empty(len(obs))
    for mask, kind, nodes, weights in _pair_rules(bnd, obs, src):
        if not mask.any():
            continue
        if kind == "identical":
            out[mask] = self_single_layer(bnd.lengths[obs[mask]])
            continue
        o_all, s_all = obs[mask], src[mask]
        vals = np.empty(len(o_all))
        for sl in _chunks(len(o_all), len(nodes)):
            o, s = o_all[sl], s_all[sl]
            inner = _log_integral_rel(*_pair_frames(bnd, o, s, nodes, kind))
            vals[sl] = -INV_2PI * bnd.lengths[s] * (inner @ weights)
        out[mask] = vals
    return out


def double_layer_entries(bnd, obs, src):
    """``<K phi, chi_obs>`` for the two hat functions of the source edge.

    Returns ``(n, 2)``: contributions of the hats at the start and end node
    of ``src``.
    """
    obs, src = np.asarray(obs), np.asarray(src)
    out = np.zeros((len(obs), 2))
    for mask, kind, nodes, weights in _pair_rules(bnd, obs, src):
        if not mask.any() or kind == "identical":
            continue  # (x - y) . n_y = 0 on a straight edge
        o_all, s_all = obs[mask], src[mask]
        vals = np.empty((len(o_all), 2))
        basis = np.column_stack([1.0 - nodes, nodes]) * weights[:, None]
        if kind == "shared_end":
            basis = basis[:, ::-1]
        for sl in _chunks(len(o_all), len(nodes)):
            o, s = o_all[sl], s_all[sl]
            inner = _double_layer_rel(*_pair_frames(bnd, o, s, nodes, kind),
                                      bnd.normals[s][:, None, :])
            vals[sl] = INV_2PI * bnd.lengths[s][:, None] * (inner @ basis)
        out[mask] = vals
    return out


def assemble_single_layer(bnd):
    """Dense, symmetric single layer matrix on P0(E_Gamma)."""
    n = bnd.n_edges
    obs, src = _all_pairs(n)
    upper = obs <= src
    V = np.zeros((n, n))
    V[obs[upper], src[upper]] = single_layer_entries(bnd, obs[upper], src[upper])
    return np.triu(V) + np.triu(V, 1).T


def assemble_double_layer(bnd):
    """Dense double layer matrix, edges x boundary nodes (hat basis)."""
    n = bnd.n_edges
    obs, src = _all_pairs(n)
    vals = double_layer_entries(bnd, obs, src)
    K = np.zeros((n, len(bnd.points)))
    np.add.at(K, (obs, bnd.edges[src, 0]), vals[:, 0])
    np.add.at(K, (obs, bnd.edges[src, 1]), vals[:, 1])
    return K


def assemble_boundary_mass(bnd):
    """``<phi_j, chi_E>``: ``h_E / 2`` at both endpoints of E."""
    M = np.zeros((bnd.n_edges, len(bnd.points)))
    k = np.arange(bnd.n_edges)
    M[k, bnd.edges[:, 0]] += 0.5 * bnd.lengths
    M[k, bnd.edges[:, 1]] += 0.5 * bnd.lengths
    return M


@dataclass(eq=False)
class BemMatrices:
    boundary: Boundary
    V: np.ndarray
    K: np.ndarray
    Mb: np.ndarray


def assemble_bem(bnd):
    return BemMatrices(bnd, assemble_single_layer(bnd), assemble_double_layer(bnd),
                       assemble_boundary_mass(bnd))


def v_energy_norm(V, psi, tol=1e-12):
    """``sqrt(psi^T V psi)``."""
    psi = np.asarray(psi, dtype=float)
    q = float(psi @ (V @ psi))
    if q < -tol * max(1.0, float(np.abs(V).max()) * float(psi @ psi)):
        raise BemError("negative V quadratic form (diam >= 1 or assembly error)")
    return float(np.sqrt(max(q, 0.0)))


# -- data functionals -----------------------------------------------------------

class DoubleLayerDataOperator:
    """Maps samples of a continuous boundary field to ``<(1/2 - K) g, chi_E>``.

    ``g`` is sampled at Gauss nodes on each edge (composite rule with panels
    no longer than ``max_panel``); near shared vertices the adjacent
    observation edges use extra geometrically graded nodes.
    """

    def __init__(self, bnd, max_panel=1.0 / 64, n_points=8):
        self.boundary = bnd
        n = bnd.n_edges
        s, w = gauss_legendre(n_points)
        g_s, g_w = graded_rule()
        n_panel = np.maximum(1, np.ceil(bnd.lengths / max_panel - 1e-9)).astype(int)
        nodes, weights, owner, tag = [], [], [], []
        # tag bits: 1 first regular panel, 2 last regular panel; 8 graded at
        # the start node, 16 graded at the end node
        for e in range(n):
            m = n_panel[e]
            lo = np.arange(m) / m
            reg = (lo[:, None] + s[None, :] / m).ravel()
            panel = np.repeat(np.arange(m), n_points)
            nodes.append(reg)
            weights.append(np.tile(w / m, m))
            owner.append(np.full(reg.size, e))
            tag.append(np.where(panel == 0, 1, 0) + np.where(panel == m - 1, 2, 0))
            # graded nodes at the end node are measured from that node
            nodes += [g_s / m, g_s / m]
            weights += [g_w / m, g_w / m]
            owner += [np.full(g_s.size, e)] * 2
            tag += [np.full(g_s.size, 8), np.full(g_s.size, 16)]
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights) * bnd.lengths[np.concatenate(owner)]
        self.owner = np.concatenate(owner)
        self.tag = np.concatenate(tag)
        from_end = self.tag == 16
        self.base_id = np.where(from_end, bnd.edges[self.owner, 1], bnd.edges[self.owner, 0])
        sign = np.where(from_end, -1.0, 1.0)
        self.offsets = (sign * self.nodes)[:, None] * (bnd.ends - bnd.starts)[self.owner]
        self.points = bnd.points[self.base_id] + self.offsets
        self.normals = bnd.normals[self.owner]
        self.matrix = self._build(n)

    def _build(self, n):
        bnd = self.boundary
        regular = self.tag < 8
        rows, cols, vals = [], [], []
        # half the mass term
        idx = np.nonzero(regular)[0]
        rows.append(self.owner[idx])
        cols.append(idx)
        vals.append(0.5 * self.weights[idx])
        e_start = bnd.edges[:, 0]
        e_end = bnd.edges[:, 1]
        for E in range(n):
            P, d, nu, L = bnd.starts[E], bnd.tangents[E], bnd.normals[E], bnd.lengths[E]
            src = self.owner
            same = src == E
            start_shared = (e_start[src] == e_start[E]) | (e_start[src] == e_end[E])
            end_shared = (e_end[src] == e_start[E]) | (e_end[src] == e_end[E])
            start_shared &= ~same
            end_shared &= ~same
            tag = self.tag
            use = regular & ~same
            # replace the regular panel next to a shared vertex by graded nodes
            use &= ~(start_shared & ((tag & 1) > 0))
            use &= ~(end_shared & ((tag & 2) > 0))
            use |= start_shared & (tag == 8)
            use |= end_shared & (tag == 16)
            k = np.nonzero(use)[0]
            # graded nodes: relative to the shared vertex, walking E away from it
            graded = tag[k] >= 8
            flip = graded & (self.base_id[k] == e_end[E])
            dk = np.where(flip[:, None], -d, d)
            nuk = np.column_stack([dk[:, 1], -dk[:, 0]])
            r = np.where(graded[:, None], self.offsets[k], self.points[k] - P)
            w = _double_layer_rel(dk, nuk, L, r, self.normals[k])
            rows.append(np.full(k.size, E))
            cols.append(k)
            vals.append(-INV_2PI * w * self.weights[k])
        return sp.csr_matrix((np.concatenate(vals),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, len(self.nodes)))

    def __call__(self, g, t=None):
        """Apply to a field ``g(points, normals[, t])``."""
        vals = g(self.points, self.normals) if t is None else g(self.points, self.normals, t)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(self.nodes),))
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite boundary data")
        return self.matrix @ vals


# -- exterior evaluation --------------------------------------------------------

def _point_edge_distance(bnd, x):
    """Distances ``(p, n_edges)`` from points to the boundary edges."""
    r = x[:, None, :] - bnd.starts[None]
    s = np.clip((r * bnd.tangents[None]).sum(-1) / bnd.lengths[None], 0.0, 1.0)
    proj = bnd.starts[None] + s[..., None] * (bnd.ends - bnd.starts)[None]
    return np.linalg.norm(x[:, None, :] - proj, axis=2)


def _potential_rule(bnd, x):
    """Per (point, edge) composite Gauss panel count sized by the distance."""
    dist = _point_edge_distance(bnd, x)
    return np.clip(np.ceil(4.0 * bnd.lengths[None] / dist), 1, 512).astype(int)


def _layer_potentials(bnd, x, trace, flux):
    """``int dG/dn_y trace - int G flux`` with callables on (edge, s)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    panels = _potential_rule(bnd, x)
    out = np.zeros(len(x))
    for k in np.unique(panels):
        pi, ei = np.nonzero(panels == k)
        s, w = composite_rule(int(k), 16)
        y = bnd.starts[ei][:, None] + s[None, :, None] * (bnd.ends - bnd.starts)[ei][:, None]
        r = x[pi][:, None, :] - y
        r2 = (r * r).sum(-1)
        dG = INV_2PI * (r * bnd.normals[ei][:, None, :]).sum(-1) / r2
        G = -INV_2PI * 0.5 * np.log(r2)
        vals = dG * trace(ei, s) - G * flux(ei, s)
        np.add.at(out, pi, bnd.lengths[ei] * (vals @ w))
    return out


def _check_exterior(bnd, x, tol=1e-10):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(bnd.contains(x)) or np.any(bnd.distance(x) < tol):
        raise BemError("evaluation point inside Omega or on Gamma")
    return x


def evaluate_exterior(bnd, trace, density, points):
    """Representation formula for discrete Cauchy data.

    Parameters
    ----------
    trace : (n_nodes,) values of ``u_e|_Gamma = u|_Gamma - g1`` at boundary nodes
    density : (n_edges,) values of ``phi = d_n u_e`` per edge
    points : (p, 2) points strictly outside the domain
    """
    x = _check_exterior(bnd, points)
    trace = np.asarray(trace, dtype=float)
    density = np.asarray(density, dtype=float)
    t0, t1 = trace[bnd.edges[:, 0]], trace[bnd.edges[:, 1]]
    return _layer_potentials(
        bnd, x,
        lambda e, s: t0[e][:, None] * (1 - s)[None] + t1[e][:, None] * s[None],
        lambda e, s: np.broadcast_to(density[e][:, None], (len(e), len(s))))


def represent_exterior(bnd, trace_fn, flux_fn, points):
    """Representation formula for continuous Cauchy data ``fn(y, n)``."""
    x = _check_exterior(bnd, points)

    def lift(fn):
        def f(e, s):
            y = bnd.starts[e][:, None] + s[None, :, None] * (bnd.ends - bnd.starts)[e][:, None]
            n = np.broadcast_to(bnd.normals[e][:, None], y.shape)
            return np.asarray(fn(y.reshape(-1, 2), n.reshape(-1, 2))).reshape(y.shape[:2])
        return f

    return _layer_potentials(bnd, x, lift(trace_fn), lift(flux_fn))


def growth_factor(bnd, density):
    """Coefficient ``a`` of the ``a log|x|`` far field."""
    return INV_2PI * float(np.dot(density, bnd.lengths))
