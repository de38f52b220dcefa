"""Optimization primitives shared by the seminorm and extension engines.

Everything here is deterministic: random multistarts draw from fixed seeds,
pattern-search direction sets are fixed arrays, and linear programs go
through HiGHS.  Batched routines treat the leading "node" axis as a family
of independent problems solved in lockstep.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

_MULTISTART_SEED = 718281828


class SolverError(RuntimeError):
    """A solver failed or reported an infeasible/unbounded program."""


def lp_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None,
             context="linear program"):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        raise SolverError(f"{context}: {res.message}")
    return res


# ---------------------------------------------------------------------------
# linear algebra helpers

def orthonormal_rows(a, tol=1e-12):
    """Orthonormal basis (rows) of the row space of ``a``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0 or a.shape[0] == 0:
        return np.zeros((0, a.shape[1] if a.ndim == 2 else 0))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[:rank]


def nullspace_rows(a, tol=1e-12):
    """Orthonormal basis (rows) of the null space of ``a`` (acting on rows)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n)
    u, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:]


def intersect_rowspaces(a, b, tol=1e-12):
    """Rows spanning the intersection of two row spaces in R^n."""
    a = orthonormal_rows(a, tol)
    b = orthonormal_rows(b, tol)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((0, max(a.shape[1], b.shape[1])))
    # z in both spaces iff z = a^T x = b^T y; solve [a^T | -b^T] w = 0.
    stacked = np.hstack([a.T, -b.T])
    null = nullspace_rows(stacked, tol)   # rows w = (x, y)
    if null.shape[0] == 0:
        return np.zeros((0, a.shape[1]))
    zs = null[:, :a.shape[0]] @ a
    return orthonormal_rows(zs, tol)


# ---------------------------------------------------------------------------
# batched convex minimization (projected subgradient + pattern polish)

def _directions(dim):
    if dim == 0:
        return np.zeros((0, 0))
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        # evenly spaced angles; dense enough to escape polyhedral valleys
        angles = np.arange(32) * (np.pi / 16)
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    if dim == 3:
        grids = np.meshgrid(*([np.array([-1.0, 0.0, 1.0])] * 3),
                            indexing="ij")
        d = np.stack([g.ravel() for g in grids], axis=-1)
        d = d[np.any(d != 0, axis=1)]
        rng = np.random.default_rng(_MULTISTART_SEED)
        d = np.vstack([d, rng.standard_normal((24, 3))])
    else:
        eye = np.eye(dim)
        rng = np.random.default_rng(_MULTISTART_SEED)
        extra = rng.standard_normal((4 * dim, dim))
        d = np.vstack([eye, -eye, extra])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _multistarts(dim, radius, hint, n_starts):
    starts = [np.zeros(dim)]
    if hint is not None:
        starts.append(np.asarray(hint, dtype=float))
        starts.append(-np.asarray(hint, dtype=float))
    k = 0
    while len(starts) < n_starts and k < dim:
        e = np.zeros(dim)
        e[k] = radius
        starts += [e, -e]
        k += 1
    rng = np.random.default_rng(_MULTISTART_SEED)
    while len(starts) < n_starts:
        starts.append(radius * rng.standard_normal(dim) / np.sqrt(max(dim, 1)))
    return starts[:max(n_starts, 1)]


def minimize_batched(fun, sub, dim, n_nodes, radius, ball_norm=None,
                     hint=None, n_starts=8, n_iter=500, polish_rounds=300,
                     min_radius=1e-9, y0=None):
    """Minimize a convex objective per node over a ball of given radius.

    Parameters
    ----------
    fun : callable
        Maps ``(..., n_nodes, dim)`` points to ``(..., n_nodes)`` values.
    sub : callable or None
        Subgradient with the same batch semantics; ``None`` disables the
        subgradient phase (pattern search only).
    dim, n_nodes : int
        Problem dimensions.
    radius : float
        Ball radius in ``ball_norm`` (Euclidean when None); points are kept
        feasible by radial rescaling.
    hint : array or None
        Extra start shared by all nodes.
    y0 : array or None
        Per-node warm start, shape (n_nodes, dim).

    Returns ``(y, v)``: per-node argmin estimates and values.
    """
    if dim == 0 or radius == 0.0:
        y = np.zeros((n_nodes, dim))
        return y, fun(y)

    nrm = (lambda z: np.linalg.norm(z, axis=-1)) if ball_norm is None \
        else ball_norm

    def project(y):
        r = nrm(y)
        scale = np.where(r > radius, radius / np.maximum(r, 1e-300), 1.0)
        return y * scale[..., None]

    best_y = np.zeros((n_nodes, dim))
    best_v = fun(best_y)
    nodes = np.arange(n_nodes)

    def absorb(ys, vs):
        nonlocal best_y, best_v
        idx = np.argmin(vs, axis=0)
        v = vs[idx, nodes]
        improve = v < best_v
        if np.any(improve):
            best_y[improve] = ys[idx[improve], improve]
            best_v[improve] = v[improve]

    if y0 is not None:
        y0 = project(np.array(y0, dtype=float))
        absorb(y0[None], fun(y0)[None])

    if sub is not None:
        # all starts advance as one batched stack
        starts = _multistarts(dim, radius, hint, n_starts)
        ys = project(np.stack([np.broadcast_to(s, (n_nodes, dim))
                               for s in starts]).astype(float))
        absorb(ys, fun(ys))
        for k in range(1, n_iter + 1):
            g = sub(ys)
            gn = np.linalg.norm(g, axis=-1, keepdims=True)
            ys = project(ys - (radius / k) * g / np.maximum(gn, 1e-300))
            absorb(ys, fun(ys))

    # pattern polish: fixed direction set, shrinking radius, all nodes in step
    dirs = _directions(dim)
    r = max(radius / 4.0, min_radius * 2)
    rounds = 0
    while r > min_radius and rounds < polish_rounds:
        rounds += 1
        cand = project(best_y[None, :, :] + r * dirs[:, None, :])
        vals = fun(cand)
        idx = np.argmin(vals, axis=0)
        v = vals[idx, nodes]
        improve = v < best_v - 1e-15
        if np.any(improve):
            best_y[improve] = cand[idx[improve], improve]
            best_v[improve] = v[improve]
        else:
            r *= 0.5
    return best_y, best_v


# ---------------------------------------------------------------------------
# total-variation-minimal selection in a tube

def _sweep_path(lo, hi, start=None):
    """Forward sweep of the flat-bottom value functions along a path.

    Returns per-node triples (m, a, b): minimal accumulated variation m and
    the flat argmin interval [a, b] within the node's tube.
    """
    n = lo.shape[0]
    out = np.zeros((n, 3))
    if start is None:
        m, a, b = 0.0, lo[0], hi[0]
    else:
        m, a, b = 0.0, start, start
    out[0] = (m, a, b)
    for i in range(1, n):
        if hi[i] < a:
            m += a - hi[i]
            a = b = hi[i]
        elif lo[i] > b:
            m += lo[i] - b
            a = b = lo[i]
        else:
            a = max(a, lo[i])
            b = min(b, hi[i])
        out[i] = (m, a, b)
    return out


def _backtrack_path(lo, hi, mid, sweep, f_last):
    n = lo.shape[0]
    f = np.zeros(n)
    f[-1] = f_last
    for i in range(n - 2, -1, -1):
        _, a, b = sweep[i]
        nxt = f[i + 1]
        if nxt >= b:
            p, q = b, min(hi[i], nxt)
        elif nxt <= a:
            p, q = max(lo[i], nxt), a
        else:
            p = q = nxt
        f[i] = min(max(mid[i], p), q)
    return f


def taut_string_path(lo, hi, mid=None):
    """TV-minimal selection in a tube along a path, ties toward ``mid``.

    ``lo <= f <= hi`` holds exactly; among all selections of minimal total
    variation the backward pass picks, step by step, the admissible value
    closest to the midpoint field.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise SolverError("taut_string_path: empty tube (lo > hi somewhere)")
    mid = 0.5 * (lo + hi) if mid is None else np.asarray(mid, dtype=float)
    sweep = _sweep_path(lo, hi)
    _, a, b = sweep[-1]
    f_last = min(max(mid[-1], a), b)
    return _backtrack_path(lo, hi, mid, sweep, f_last)


def _cycle_cost(lo, hi, v):
    sweep = _sweep_path(lo, hi, start=v)
    m, a, b = sweep[-1]
    return m + max(0.0, a - v, v - b), sweep


def taut_string_cycle(lo, hi, mid=None):
    """TV-minimal selection in a tube around a cycle (nodes in cyclic order)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise SolverError("taut_string_cycle: empty tube")
    mid = 0.5 * (lo + hi) if mid is None else np.asarray(mid, dtype=float)

    def g(v):
        return _cycle_cost(lo, hi, v)[0]

    # pinned-value cost is convex piecewise linear; candidate breakpoints are
    # the tube bounds, then ternary refinement around the best one
    cand = np.unique(np.clip(np.concatenate([lo, hi, [mid[0]]]),
                             lo[0], hi[0]))
    vals = np.array([g(v) for v in cand])
    k = int(np.argmin(vals))
    left = cand[max(k - 1, 0)]
    right = cand[min(k + 1, len(cand) - 1)]
    for _ in range(200):
        if right - left < 1e-14 * max(1.0, abs(left) + abs(right)) + 1e-300:
            break
        u1 = left + (right - left) / 3
        u2 = right - (right - left) / 3
        if g(u1) <= g(u2):
            right = u2
        else:
            left = u1
    v_best = 0.5 * (left + right)
    best = g(v_best)

    # flat-bottom edges of {v : g(v) <= best + eps}, then tie toward mid[0]
    eps = 1e-12 * (1.0 + abs(best))

    def flat_edge(inside, outside):
        # boundary of the near-optimal set between a point inside it and one
        # outside; bisection keeps the returned value inside
        if g(outside) <= best + eps:
            return outside
        a, b = inside, outside
        for _ in range(100):
            m_ = 0.5 * (a + b)
            if g(m_) <= best + eps:
                a = m_
            else:
                b = m_
        return a

    flat_hi = flat_edge(v_best, hi[0])
    flat_lo = flat_edge(v_best, lo[0])
    v0 = min(max(mid[0], min(flat_lo, flat_hi)), max(flat_lo, flat_hi))

    _, sweep = _cycle_cost(lo, hi, v0)
    _, a, b = sweep[-1]
    # last node: argmin of accumulated cost plus the closing edge toward v0
    if v0 >= b:
        p, q = b, min(hi[-1], v0)
    elif v0 <= a:
        p, q = max(lo[-1], v0), a
    else:
        p = q = v0
    f_last = min(max(mid[-1], p), q)
    f = _backtrack_path(lo, hi, mid, sweep, f_last)
    f[0] = v0
    return f


def tube_tv_graph(lo, hi, edges, mid=None, tie_break=True):
    """Two-stage LP: minimal total variation in the tube, then (optionally)
    minimal l1 distance to the midpoint among near-optimal selections."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    m = edges.shape[0]
    if np.any(lo > hi):
        raise SolverError("tube_tv_graph: empty tube")
    mid = 0.5 * (lo + hi) if mid is None else np.asarray(mid, dtype=float)

    # variables: f (n), t (m) with t_e >= |f_i - f_j|
    c = np.concatenate([np.zeros(n), np.ones(m)])
    A = np.zeros((2 * m, n + m))
    for e, (i, j) in enumerate(edges):
        A[2 * e, i], A[2 * e, j], A[2 * e, n + e] = 1.0, -1.0, -1.0
        A[2 * e + 1, i], A[2 * e + 1, j], A[2 * e + 1, n + e] = -1.0, 1.0, -1.0
    b = np.zeros(2 * m)
    bounds = [(lo[i], hi[i]) for i in range(n)] + [(0, None)] * m
    res = lp_solve(c, A_ub=A, b_ub=b, bounds=bounds, context="tube TV LP")
    tv_opt = float(res.fun)
    if not tie_break:
        return np.clip(res.x[:n], lo, hi), tv_opt

    # stage 2: among TV-near-optimal selections, closest (l1) to the midpoint
    c2 = np.concatenate([np.zeros(n + m), np.ones(n)])
    A2 = np.zeros((2 * m + 2 * n + 1, n + m + n))
    A2[:2 * m, :n + m] = A
    b2 = np.zeros(2 * m + 2 * n + 1)
    for i in range(n):
        A2[2 * m + 2 * i, i], A2[2 * m + 2 * i, n + m + i] = 1.0, -1.0
        b2[2 * m + 2 * i] = mid[i]
        A2[2 * m + 2 * i + 1, i], A2[2 * m + 2 * i + 1, n + m + i] = -1.0, -1.0
        b2[2 * m + 2 * i + 1] = -mid[i]
    A2[-1, n:n + m] = 1.0
    b2[-1] = tv_opt + 1e-9 * (1.0 + abs(tv_opt))
    bounds2 = bounds + [(0, None)] * n
    res2 = lp_solve(c2, A_ub=A2, b_ub=b2, bounds=bounds2,
                    context="tube TV tie-break LP")
    return np.clip(res2.x[:n], lo, hi), tv_opt


def total_variation(f, edges):
    f = np.asarray(f, dtype=float)
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if edges.size == 0:
        return 0.0
    return float(np.sum(np.abs(f[edges[:, 0]] - f[edges[:, 1]])))
