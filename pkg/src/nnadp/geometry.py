"""Dense polytope computations in H- and V-representation.

All routines target low dimensions (the control benchmark is planar). LPs are
solved with the in-package simplex in :mod:`nnadp.lp`.
"""

import itertools
import json

import numpy as np

from . import lp
from .errors import (
    DegeneratePolytope,
    EmptyPolytope,
    Infeasible,
    NotInHull,
    SamplingStalled,
    Unbounded,
    UnboundedPolytope,
    UnsupportedDimension,
)

MEMBERSHIP_TOL = 1e-9
DEDUP_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-8
REDUNDANCY_TOL = 1e-9
_ZERO_ROW = 1e-12


class HPolytope:
    """Polytope ``{x | H x <= h}``.

    All-zero rows are dropped when their right-hand side is nonnegative and
    rejected with :class:`EmptyPolytope` otherwise.
    """

    def __init__(self, H, h):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
        if H.shape[0] != h.shape[0]:
            raise ValueError(f"H has {H.shape[0]} rows but h has length {h.shape[0]}")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
            raise ValueError("polytope data must be finite")
        norms = np.linalg.norm(H, axis=1)
        zero = norms <= _ZERO_ROW
        if np.any(zero & (h < 0)):
            raise EmptyPolytope("all-zero row with negative right-hand side")
        H, h = H[~zero], h[~zero]
        if H.shape[0] == 0:
            raise ValueError("polytope needs at least one nonzero row")
        self.H = H
        self.h = h

    @property
    def n(self):
        return self.H.shape[1]

    @property
    def m(self):
        return self.H.shape[0]

    def __repr__(self):
        return f"HPolytope(m={self.m}, n={self.n})"

    def normalized(self):
        """Return an equivalent polytope with unit-norm rows."""
        norms = np.linalg.norm(self.H, axis=1)
        return HPolytope(self.H / norms[:, None], self.h / norms)

    def intersect(self, other):
        return HPolytope(np.vstack([self.H, other.H]), np.concatenate([self.h, other.h]))

    @classmethod
    def from_box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    def to_dict(self):
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["H"], data["h"])


class VPolytope:
    """Convex hull of a minimal vertex list (rows of ``vertices``)."""

    def __init__(self, vertices, check=True):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[0] < 1:
            raise ValueError("need at least one vertex")
        self.vertices = V
        if check and V.shape[0] > 1:
            for i in range(V.shape[0]):
                others = np.delete(V, i, axis=0)
                if _in_hull_lp(others, V[i]) is not None:
                    raise ValueError(f"vertex {i} is a convex combination of the others")

    @property
    def n(self):
        return self.vertices.shape[1]

    @property
    def n_v(self):
        return self.vertices.shape[0]

    def to_dict(self):
        return {"V": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["V"])


def save_json(obj, path):
    with open(path, "w") as f:
        json.dump(obj.to_dict(), f, indent=1)


def load_polytope(path):
    with open(path) as f:
        data = json.load(f)
    if "V" in data:
        return VPolytope.from_dict(data)
    return HPolytope.from_dict(data)


def contains(P, x, tol=MEMBERSHIP_TOL):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != P.n:
        raise ValueError(f"point has dimension {x.size}, polytope has {P.n}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.all(P.H @ x <= P.h + tol))


def max_violation(P, x):
    """Largest amount by which ``x`` violates a row of ``P`` (0 if inside)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(max(0.0, np.max(P.H @ x - P.h)))


def _check_nonempty(P):
    try:
        lp.simplex(np.zeros(P.n), P.H, P.h)
    except Infeasible:
        raise EmptyPolytope("polytope is empty") from None


def bounding_box(P):
    """Per-coordinate ``(lower, upper)`` support values via 2n LPs."""
    lower = np.empty(P.n)
    upper = np.empty(P.n)
    for i in range(P.n):
        e = np.zeros(P.n)
        e[i] = 1.0
        try:
            _, lo = lp.simplex(e, P.H, P.h)
            _, hi = lp.simplex(-e, P.H, P.h)
        except Infeasible:
            raise EmptyPolytope("polytope is empty") from None
        except Unbounded:
            raise UnboundedPolytope(f"polytope is unbounded along coordinate {i}") from None
        lower[i] = lo
        upper[i] = -hi
    return lower, upper


def chebyshev_center(P, max_radius=1e9):
    """Center and radius of the largest inscribed ball.

    A negative radius means the polytope is empty; ``inf`` means the LP hit
    ``max_radius`` (unbounded polytope).
    """
    Q = P.normalized()
    A = np.hstack([Q.H, np.ones((Q.m, 1))])
    cap = np.zeros(Q.n + 1)
    cap[-1] = 1.0
    A = np.vstack([A, cap])
    b = np.concatenate([Q.h, [max_radius]])
    c = np.zeros(Q.n + 1)
    c[-1] = -1.0
    try:
        z, _ = lp.simplex(c, A, b)
    except Unbounded:
        return None, np.inf
    radius = z[-1]
    if radius >= max_radius:
        return z[:-1], np.inf
    return z[:-1], float(radius)


def remove_redundant(P, tol=REDUNDANCY_TOL):
    """Drop rows implied by the remaining rows.

    Rows are visited in order; row ``i`` is removed when the maximum of its
    normalized left-hand side over the currently kept rows does not exceed its
    right-hand side by more than ``tol``. Original row scaling is preserved.
    """
    _check_nonempty(P)
    norms = np.linalg.norm(P.H, axis=1)
    Hn = P.H / norms[:, None]
    hn = P.h / norms
    keep = np.ones(P.m, dtype=bool)
    for i in range(P.m):
        keep[i] = False
        if not keep.any():
            keep[i] = True
            continue
        try:
            _, val = lp.simplex(-Hn[i], Hn[keep], hn[keep])
            redundant = -val <= hn[i] + tol
        except Unbounded:
            redundant = False
        except Infeasible:
            raise EmptyPolytope("polytope is empty") from None
        keep[i] = not redundant
    return HPolytope(P.H[keep], P.h[keep])


def _eliminate(H, h, j):
    """Fourier-Motzkin elimination of column ``j``."""
    col = H[:, j]
    pos = np.flatnonzero(col > _ZERO_ROW)
    neg = np.flatnonzero(col < -_ZERO_ROW)
    zero = np.flatnonzero(np.abs(col) <= _ZERO_ROW)
    rows = [H[zero]]
    rhs = [h[zero]]
    if pos.size and neg.size:
        Hp = H[pos] / col[pos, None]
        hp = h[pos] / col[pos]
        Hm = H[neg] / -col[neg, None]
        hm = h[neg] / -col[neg]
        rows.append((Hp[:, None, :] + Hm[None, :, :]).reshape(-1, H.shape[1]))
        rhs.append((hp[:, None] + hm[None, :]).reshape(-1))
    H_new = np.delete(np.vstack(rows), j, axis=1)
    h_new = np.concatenate(rhs)
    norms = np.linalg.norm(H_new, axis=1)
    scale = np.maximum(np.abs(h_new), 1.0)
    zero_rows = norms <= 1e-10 * scale
    if np.any(zero_rows & (h_new < -1e-9 * scale)):
        raise EmptyPolytope("elimination proved the polytope empty")
    H_new, h_new, norms = H_new[~zero_rows], h_new[~zero_rows], norms[~zero_rows]
    return H_new / norms[:, None], h_new / norms


def project(P, keep_dims):
    """Project ``P`` onto the coordinates in ``keep_dims`` (in that order)."""
    keep_dims = [int(d) for d in keep_dims]
    if not keep_dims or len(set(keep_dims)) != len(keep_dims):
        raise ValueError("keep_dims must be a nonempty list of distinct indices")
    if any(d < 0 or d >= P.n for d in keep_dims) or len(keep_dims) >= P.n:
        raise ValueError("keep_dims must be a strict subset of the coordinates")
    H, h = P.H.copy(), P.h.copy()
    order = list(range(P.n))
    drop = sorted(set(order) - set(keep_dims), reverse=True)
    for j in drop:
        H, h = _eliminate(H, h, j)
        order.pop(j)
        if H.shape[0] == 0:
            break
        H_red = remove_redundant(HPolytope(H, h))
        H, h = H_red.H, H_red.h
    if H.shape[0] == 0:
        raise UnboundedPolytope("projection has no constraints left")
    perm = [order.index(d) for d in keep_dims]
    return HPolytope(H[:, perm], h)


def enumerate_vertices(P):
    """Minimal vertex set of a bounded polytope in dimension 1 to 3.

    Planar vertices are returned in counter-clockwise order around the
    centroid, starting from the negative x axis.
    """
    if P.n > 3:
        raise UnsupportedDimension(f"vertex enumeration supports n <= 3, got {P.n}")
    bounding_box(P)
    points = []
    for rows in itertools.combinations(range(P.m), P.n):
        M = P.H[list(rows)]
        if abs(np.linalg.det(M)) <= 1e-12:
            continue
        v = np.linalg.solve(M, P.h[list(rows)])
        if contains(P, v, MEMBERSHIP_TOL):
            points.append(v)
    if not points:
        raise EmptyPolytope("no feasible vertex found")
    unique = []
    for v in points:
        if all(np.max(np.abs(v - u)) > DEDUP_TOL for u in unique):
            unique.append(v)
    V = np.array(unique)
    if P.n == 1:
        V = V[np.argsort(V[:, 0])]
    elif P.n == 2:
        d = V - V.mean(axis=0)
        V = V[np.lexsort((np.hypot(d[:, 0], d[:, 1]), np.arctan2(d[:, 1], d[:, 0])))]
    else:
        V = V[np.lexsort(V.T[::-1])]
    # planar/box cases never produce interior points; n=3 may (coplanar facets)
    return VPolytope(V, check=P.n == 3)


def sample_uniform(P, count, rng, batch=10_000, max_draws=1_000_000):
    """Uniform samples by rejection from the bounding box."""
    if count < 1:
        raise ValueError("count must be at least 1")
    _, radius = chebyshev_center(P)
    if radius <= 1e-9:
        if radius < 0:
            raise EmptyPolytope("cannot sample an empty polytope")
        raise DegeneratePolytope(f"Chebyshev radius {radius:.3g} too small to sample")
    lower, upper = bounding_box(P)
    accepted = []
    n_acc = 0
    draws = 0
    while n_acc < count:
        if draws >= max_draws:
            if n_acc / draws < 1e-3:
                raise SamplingStalled(f"acceptance ratio {n_acc / draws:.2e} after {draws} draws")
            max_draws += batch
        X = rng.uniform(lower, upper, size=(batch, P.n))
        draws += batch
        ok = np.all(X @ P.H.T <= P.h, axis=1)
        accepted.append(X[ok])
        n_acc += int(ok.sum())
    return np.vstack(accepted)[:count]


def _in_hull_lp(V, u):
    """Feasible convex weights with ``V.T @ lam == u`` via simplex phase one."""
    n_v, n = V.shape
    eq = np.vstack([V.T, np.ones((1, n_v))])
    rhs = np.concatenate([u, [1.0]])
    A = np.vstack([eq, -eq, -np.eye(n_v)])
    b = np.concatenate([rhs, -rhs, np.zeros(n_v)])
    try:
        lam, _ = lp.simplex(np.zeros(n_v), A, b, feas_tol=1e-11)
    except Infeasible:
        return None
    return lam


def _clean_weights(lam):
    lam = np.where(lam < 0, 0.0, lam)
    return lam / lam.sum()


def _wachspress(V, u):
    """Wachspress coordinates of ``u`` in a convex polygon.

    Points on an edge get the linear interpolation between its endpoints.
    Returns ``None`` when ``u`` lies outside the polygon.
    """
    P = V.vertices
    d = P - P.mean(axis=0)
    order = np.argsort(np.arctan2(d[:, 1], d[:, 0]))
    P = P[order]
    nxt = np.roll(P, -1, axis=0)
    edge = nxt - P
    length = np.hypot(edge[:, 0], edge[:, 1])
    # twice the signed area of (u, p_i, p_{i+1}); positive inside
    area = edge[:, 0] * (u[1] - P[:, 1]) - edge[:, 1] * (u[0] - P[:, 0])
    dist = area / length
    scale = max(1.0, float(np.abs(P).max()))
    if dist.min() < -RECONSTRUCTION_TOL:
        return None
    lam = np.zeros(len(P))
    if dist.min() <= 1e-12 * scale:
        i = int(np.argmin(dist))
        t = float(np.clip(np.dot(u - P[i], edge[i]) / length[i] ** 2, 0.0, 1.0))
        lam[i] = 1.0 - t
        lam[(i + 1) % len(P)] += t
    else:
        prev = np.roll(P, 1, axis=0)
        corner = (P[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1]) - (P[:, 1] - prev[:, 1]) * (nxt[:, 0] - prev[:, 0])
        w = corner / (np.roll(area, 1) * area)
        lam = w / w.sum()
    out = np.empty_like(lam)
    out[order] = lam
    return out


def barycentric_coords(V, u, method="frank_wolfe", max_iters=500):
    """Convex weights reconstructing ``u`` from the vertices of ``V``.

    ``method="frank_wolfe"`` minimizes ``||V.T @ lam - u||^2`` over the
    probability simplex, started at the nearest vertex. Points on the boundary
    of the hull can make Frank-Wolfe crawl; if the residual is still above
    :data:`RECONSTRUCTION_TOL` after ``max_iters`` iterations, a basic
    feasible solution of the hull LP is used instead.

    ``method="wachspress"`` (planar only) returns the Wachspress coordinates,
    which are unique and smooth in ``u``; that regularity matters when the
    weights are regression targets.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != V.n:
        raise ValueError(f"point has dimension {u.size}, vertices have {V.n}")
    Vt = V.vertices.T
    if method == "wachspress":
        if V.n != 2 or V.n_v < 3:
            raise UnsupportedDimension("Wachspress coordinates need a polygon in the plane")
        lam = _wachspress(V, u)
    elif method == "frank_wolfe":
        lam = _barycentric_fw(V, u, max_iters)
    else:
        raise ValueError(f"unknown method {method!r}")
    if lam is not None and np.linalg.norm(Vt @ lam - u) <= RECONSTRUCTION_TOL:
        return lam
    lam = _in_hull_lp(V.vertices, u)
    if lam is not None:
        lam = _clean_weights(lam)
        if np.linalg.norm(Vt @ lam - u) <= RECONSTRUCTION_TOL:
            return lam
    raise NotInHull(f"point {u} is not in the convex hull (tolerance {RECONSTRUCTION_TOL})")


def _barycentric_fw(V, u, max_iters):
    from .solvers import FwConfig, frank_wolfe

    Vt = V.vertices.T
    n_v = V.n_v
    G = 2.0 * Vt.T @ Vt
    lin = -2.0 * Vt.T @ u

    def fun(lam):
        r = Vt @ lam - u
        return float(r @ r)

    def grad(lam):
        return G @ lam + lin

    def lmo(g):
        s = np.zeros(n_v)
        s[int(np.argmin(g))] = 1.0
        return s

    simplex_set = HPolytope(
        np.vstack([-np.eye(n_v), np.ones((1, n_v)), -np.ones((1, n_v))]),
        np.concatenate([np.zeros(n_v), [1.0, -1.0]]),
    )
    lam0 = np.zeros(n_v)
    lam0[int(np.argmin(np.linalg.norm(V.vertices - u, axis=1)))] = 1.0
    cfg = FwConfig(max_iters=max_iters, step_rule="exact", gap_tol=RECONSTRUCTION_TOL**2 * 1e-2)
    res = frank_wolfe(fun, grad, simplex_set, lam0, cfg, hess=G, lmo=lmo)
    return _clean_weights(res.u)
