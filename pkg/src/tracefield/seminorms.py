"""Grid-valued seminorms (gauges) on a finite-dimensional real space.

A gauge assigns to every grid node a sublinear, absolutely homogeneous
function on R^n with nonnegative values.  Closed-form kinds (scaled p-norms,
maxima of absolute linear functionals, quotient-distance augmentations) are
evaluated exactly; quotient and inf-convolution kinds carry an inner
minimization that is solved by convex descent over deterministic candidate
sets, optionally cross-checked against a dense scan.

The reported value of an inner minimization is always an upper bound of the
true infimum (it is the minimum over evaluated feasible points), and paired
constructions share their candidate sets so that order relations between
them hold exactly for the reported values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .solvers import (intersect_rowspaces, lp_solve, minimize_batched,
                      nullspace_rows, orthonormal_rows)


class SeminormError(ValueError):
    """Invalid gauge or model data."""


# ---------------------------------------------------------------------------
# base norms and subspace distances

@dataclass(frozen=True, eq=False)
class BaseNorm:
    """p-norm with optional positive weights: ||w . z||_p, p in {1, 2, inf}."""

    p: float = 2.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.p not in (1.0, 2.0, float("inf")):
            raise SeminormError(f"unsupported p-norm: {self.p}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise SeminormError("norm weights must be positive")
            object.__setattr__(self, "weights", w)

    def _scaled(self, z):
        z = np.asarray(z, dtype=float)
        return z if self.weights is None else z * self.weights

    def value(self, z):
        z = self._scaled(z)
        if self.p == 2.0:
            return np.sqrt(np.einsum("...i,...i->...", z, z))
        if self.p == 1.0:
            return np.sum(np.abs(z), axis=-1)
        return np.max(np.abs(z), axis=-1) if z.shape[-1] else np.zeros(z.shape[:-1])

    def subgrad(self, z):
        zw = self._scaled(z)
        if self.p == 2.0:
            n = np.linalg.norm(zw, axis=-1, keepdims=True)
            g = zw / np.maximum(n, 1e-300)
        elif self.p == 1.0:
            g = np.sign(zw)
        else:
            g = np.zeros_like(zw)
            idx = np.argmax(np.abs(zw), axis=-1)
            np.put_along_axis(g, idx[..., None],
                              np.take_along_axis(np.sign(zw), idx[..., None],
                                                 -1), -1)
        return g if self.weights is None else g * self.weights


class SubspaceDistance:
    """Distance from a point to the span of basis rows, in a base norm.

    The Euclidean case uses an orthogonal projector; p = 1 and p = inf go
    through a small linear program per evaluated point.
    """

    def __init__(self, basis_rows, norm: BaseNorm):
        self.norm = norm
        basis_rows = np.atleast_2d(np.asarray(basis_rows, dtype=float))
        if basis_rows.size == 0:
            basis_rows = basis_rows.reshape(0, basis_rows.shape[-1]
                                            if basis_rows.ndim == 2 else 0)
        self.basis = basis_rows
        w = norm.weights
        scaled = basis_rows if w is None else basis_rows * w
        self._q = orthonormal_rows(scaled)          # weighted coords, p = 2
        dim = basis_rows.shape[1]
        self._residual_op = np.eye(dim) - self._q.T @ self._q
        self._proj_q = orthonormal_rows(basis_rows)  # plain projector

    @property
    def trivial(self) -> bool:
        return self._q.shape[0] == 0

    def project(self, z):
        """Euclidean projection onto the subspace (candidate generation)."""
        z = np.asarray(z, dtype=float)
        return (z @ self._proj_q.T) @ self._proj_q

    def _residual(self, z):
        zw = z if self.norm.weights is None else z * self.norm.weights
        return zw @ self._residual_op

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self.norm.p == 2.0:
            resid = self._residual(z)
            return np.sqrt(np.einsum("...i,...i->...", resid, resid))
        flat = z.reshape(-1, z.shape[-1])
        out = np.array([self._lp_value(row)[0] for row in flat])
        return out.reshape(z.shape[:-1])

    def subgrad(self, z):
        z = np.asarray(z, dtype=float)
        if self.norm.p == 2.0:
            w = self.norm.weights
            resid = self._residual(z)
            n = np.sqrt(np.einsum("...i,...i->...", resid, resid))[..., None]
            g = resid / np.maximum(n, 1e-300)
            return g if w is None else g * w
        flat = z.reshape(-1, z.shape[-1])
        grads = np.stack([self.norm.subgrad(row - self._lp_value(row)[1])
                          for row in flat])
        return grads.reshape(z.shape)

    def _lp_value(self, z):
        if self.basis.shape[0] == 0:
            return float(self.norm.value(z)), np.zeros_like(z)
        k, n = self.basis.shape
        w = np.ones(n) if self.norm.weights is None else self.norm.weights
        bt = (self.basis * w).T  # (n, k)
        zw = z * w
        if self.norm.p == float("inf"):
            # vars (c, s): minimize s subject to |zw - bt c| <= s
            a_ub = np.block([[-bt, -np.ones((n, 1))], [bt, -np.ones((n, 1))]])
            b_ub = np.concatenate([-zw, zw])
            c_obj = np.zeros(k + 1)
            c_obj[-1] = 1.0
            bounds = [(None, None)] * k + [(0, None)]
        else:
            # vars (c, s_1..s_n): minimize sum s subject to |zw - bt c| <= s
            a_ub = np.block([[-bt, -np.eye(n)], [bt, -np.eye(n)]])
            b_ub = np.concatenate([-zw, zw])
            c_obj = np.concatenate([np.zeros(k), np.ones(n)])
            bounds = [(None, None)] * k + [(0, None)] * n
        res = lp_solve(c_obj, A_ub=a_ub, b_ub=b_ub, bounds=bounds,
                       context="subspace distance LP")
        coeff = res.x[:k]
        return float(res.fun), (self.basis.T @ coeff)


# ---------------------------------------------------------------------------
# gauges

class Gauge:
    """Common interface: nodewise sublinear nonnegative functions on R^dim."""

    dim: int
    n_nodes: int
    has_subgrad: bool = True

    def values(self, Z) -> np.ndarray:
        """Z has shape (..., n_nodes, dim); returns (..., n_nodes)."""
        raise NotImplementedError

    def subgrad(self, Z) -> np.ndarray:
        raise NotImplementedError

    def value_nodes(self, z, extra=None):
        """Evaluate one ambient vector at every node.

        Returns ``(values, witnesses)`` where witnesses are the inner
        minimizers of inf-type kinds (None for closed-form kinds).  ``extra``
        is a list of ambient candidate vectors injected into inner solves.
        """
        z = np.asarray(z, dtype=float)
        Z = np.broadcast_to(z, (self.n_nodes, self.dim))
        return self.values(Z), None

    def nilspace_basis(self, t: int, tol: float = 1e-10) -> np.ndarray:
        """Rows spanning the directions with zero gauge value at node t."""
        raise NotImplementedError

    def _check_shape(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.shape[-2:] != (self.n_nodes, self.dim):
            raise SeminormError(
                f"gauge expects (..., {self.n_nodes}, {self.dim}), "
                f"got {Z.shape}")
        return Z


def _as_field(c, n_nodes):
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        c = np.full(n_nodes, float(c))
    if c.shape != (n_nodes,):
        raise SeminormError(f"node field has shape {c.shape}, "
                            f"expected ({n_nodes},)")
    if np.any(c < 0):
        raise SeminormError("gauge scale fields must be nonnegative")
    return c


class ScaledNorm(Gauge):
    """c(t) * ||z||  for a base p-norm."""

    def __init__(self, c, n_nodes, dim, norm: BaseNorm = None):
        self.norm = norm or BaseNorm()
        self.n_nodes = int(n_nodes)
        self.dim = int(dim)
        self.c = _as_field(c, self.n_nodes)

    def values(self, Z):
        Z = self._check_shape(Z)
        return self.c * self.norm.value(Z)

    def subgrad(self, Z):
        Z = self._check_shape(Z)
        return self.c[..., None] * self.norm.subgrad(Z)

    def nilspace_basis(self, t, tol=1e-10):
        if self.c[t] <= tol:
            return np.eye(self.dim)
        return np.zeros((0, self.dim))


class MaxAbsLinear(Gauge):
    """scale(t) * max_k |a_k . z| over a fixed family of functionals."""

    def __init__(self, functionals, n_nodes, scale=1.0):
        a = np.atleast_2d(np.asarray(functionals, dtype=float))
        if a.shape[0] == 0:
            raise SeminormError("max_abs_linear needs at least one functional")
        self.functionals = a
        self.dim = a.shape[1]
        self.n_nodes = int(n_nodes)
        self.scale = _as_field(scale, self.n_nodes)

    def values(self, Z):
        Z = self._check_shape(Z)
        return self.scale * np.max(np.abs(Z @ self.functionals.T), axis=-1)

    def subgrad(self, Z):
        Z = self._check_shape(Z)
        prods = Z @ self.functionals.T
        idx = np.argmax(np.abs(prods), axis=-1)
        signs = np.take_along_axis(np.sign(prods), idx[..., None], -1)
        return self.scale[..., None] * signs * self.functionals[idx]

    def nilspace_basis(self, t, tol=1e-10):
        if self.scale[t] <= tol:
            return np.eye(self.dim)
        return nullspace_rows(self.functionals)


class SumGauge(Gauge):
    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise SeminormError("empty sum gauge")
        self.parts = parts
        self.dim = parts[0].dim
        self.n_nodes = parts[0].n_nodes
        if any(p.dim != self.dim or p.n_nodes != self.n_nodes for p in parts):
            raise SeminormError("sum gauge parts disagree in shape")
        self.has_subgrad = all(p.has_subgrad for p in parts)

    def values(self, Z):
        return sum(p.values(Z) for p in self.parts)

    def subgrad(self, Z):
        return sum(p.subgrad(Z) for p in self.parts)

    def nilspace_basis(self, t, tol=1e-10):
        basis = self.parts[0].nilspace_basis(t, tol)
        for p in self.parts[1:]:
            basis = intersect_rowspaces(basis, p.nilspace_basis(t, tol))
        return basis


class ScaledByField(Gauge):
    """lambda(t) * m(z)(t): nodewise rescaling, e.g. by a partition bump."""

    def __init__(self, inner: Gauge, factor):
        self.inner = inner
        self.dim = inner.dim
        self.n_nodes = inner.n_nodes
        self.factor = _as_field(factor, self.n_nodes)
        self.has_subgrad = inner.has_subgrad

    def values(self, Z):
        return self.factor * self.inner.values(Z)

    def subgrad(self, Z):
        return self.factor[..., None] * self.inner.subgrad(Z)

    def value_nodes(self, z, extra=None):
        vals, wit = self.inner.value_nodes(z, extra)
        return self.factor * vals, wit

    def nilspace_basis(self, t, tol=1e-10):
        if self.factor[t] <= tol:
            return np.eye(self.dim)
        return self.inner.nilspace_basis(t, tol)


class AugmentedGauge(Gauge):
    """m(z)(t) + sum_k delta_k * dist(z, W_k(t)) in the model's base norm.

    ``terms`` is a list of (delta, dist) pairs where ``dist`` is either one
    shared :class:`SubspaceDistance` or a per-node list of them.
    """

    def __init__(self, base: Gauge, terms):
        self.base = base
        self.dim = base.dim
        self.n_nodes = base.n_nodes
        self.terms = list(terms)
        self.has_subgrad = base.has_subgrad

    def _term_values(self, delta, dist, Z):
        if isinstance(dist, SubspaceDistance):
            return delta * dist.value(Z)
        out = np.zeros(Z.shape[:-1])
        for t in range(self.n_nodes):
            out[..., t] = delta * dist[t].value(Z[..., t, :])
        return out

    def values(self, Z):
        Z = self._check_shape(Z)
        vals = self.base.values(Z)
        for delta, dist in self.terms:
            vals = vals + self._term_values(delta, dist, Z)
        return vals

    def subgrad(self, Z):
        Z = self._check_shape(Z)
        g = self.base.subgrad(Z)
        for delta, dist in self.terms:
            if isinstance(dist, SubspaceDistance):
                g = g + delta * dist.subgrad(Z)
            else:
                for t in range(self.n_nodes):
                    g[..., t, :] += delta * dist[t].subgrad(Z[..., t, :])
        return g

    def nilspace_basis(self, t, tol=1e-10):
        basis = self.base.nilspace_basis(t, tol)
        for _, dist in self.terms:
            d = dist if isinstance(dist, SubspaceDistance) else dist[t]
            basis = intersect_rowspaces(basis, d.basis)
        return basis


class PiecewiseNodes(Gauge):
    """One gauge on a designated node set, another elsewhere."""

    def __init__(self, mask, inside: Gauge, outside: Gauge):
        self.inside = inside
        self.outside = outside
        self.dim = inside.dim
        self.n_nodes = inside.n_nodes
        if outside.dim != self.dim or outside.n_nodes != self.n_nodes:
            raise SeminormError("piecewise gauge parts disagree in shape")
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.shape != (self.n_nodes,):
            raise SeminormError("piecewise mask length mismatch")
        self.mask = mask
        self.has_subgrad = inside.has_subgrad and outside.has_subgrad

    def values(self, Z):
        return np.where(self.mask, self.inside.values(Z),
                        self.outside.values(Z))

    def subgrad(self, Z):
        return np.where(self.mask[..., None], self.inside.subgrad(Z),
                        self.outside.subgrad(Z))

    def value_nodes(self, z, extra=None):
        vi, _ = self.inside.value_nodes(z, extra)
        vo, _ = self.outside.value_nodes(z, extra)
        return np.where(self.mask, vi, vo), None

    def nilspace_basis(self, t, tol=1e-10):
        return (self.inside if self.mask[t] else self.outside)\
            .nilspace_basis(t, tol)


class _QuotientCore:
    """Shared inner-minimization machinery of the two quotient kinds.

    Candidate sets are deterministic functions of the input vector, and both
    quotient objectives are minimized over one shared set (lattice scan over
    the subspace coordinates plus a pattern-search polish per objective), so
    the reported bar values never exceed the reported tilde values.
    """

    def __init__(self, m: Gauge, w_rows, delta: float, norm: BaseNorm,
                 oracle: bool = False):
        if delta <= 0:
            raise SeminormError("quotient construction needs delta > 0")
        self.m = m
        self.delta = float(delta)
        self.norm = norm
        self.w = np.atleast_2d(np.asarray(w_rows, dtype=float)) \
            if np.size(w_rows) else np.zeros((0, m.dim))
        self.wq = orthonormal_rows(self.w)
        self.oracle = oracle
        self._cache = {}

    def _objectives(self, z, W):
        """Values of bar/tilde integrands at candidates W: (..., n_nodes)."""
        ZW = z + W
        norm_zw = self.norm.value(ZW)
        g_bar = self.m.values(ZW) + self.delta * norm_zw
        g_tilde = self.m.values(W) + self.delta * norm_zw  # caller adds m(z)
        return g_bar, g_tilde

    def _lattice(self, k, radius):
        pts = 81 if k == 1 else (25 if k == 2 else 0)
        if self.oracle:
            pts = 201 if k == 1 else (41 if k == 2 else 0)
        if pts == 0:
            return np.zeros((1, k))
        axes = [np.linspace(-radius, radius, pts)] * k
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def pair_values(self, z, extra=None):
        z = np.asarray(z, dtype=float)
        key = z.tobytes() if extra is None else None
        if key is not None and key in self._cache:
            return self._cache[key]
        k = self.wq.shape[0]
        n_nodes, dim = self.m.n_nodes, self.m.dim
        cands = [np.zeros((n_nodes, dim))]
        if k:
            proj = (z @ self.wq.T) @ self.wq
            cands.append(np.broadcast_to(-proj, (n_nodes, dim)).copy())
            z_b = np.broadcast_to(z, (n_nodes, dim))
            radius = float(self.norm.value(z)) + \
                (float(self.m.values(z_b).max())
                 + self.delta * float(self.norm.value(z))) / self.delta + 1.0

            def lift(C):
                return C @ self.wq

            lat = self._lattice(k, radius)
            lat_b = np.broadcast_to(lat[:, None, :],
                                    (lat.shape[0], n_nodes, k))
            g_bar_lat, g_tilde_lat = self._objectives(z, lift(lat_b))
            nodes = np.arange(n_nodes)
            start_bar = lat[np.argmin(g_bar_lat, axis=0)]
            start_tilde = lat[np.argmin(g_tilde_lat, axis=0)]

            for which, start in (("bar", start_bar), ("tilde", start_tilde)):
                def fun(C, _w=which):
                    gb, gt = self._objectives(z, lift(C))
                    return gb if _w == "bar" else gt

                y, _ = minimize_batched(fun, None, k, n_nodes, radius,
                                        n_iter=0, polish_rounds=120, y0=start)
                cands.append(lift(y))
        if extra:
            for w in extra:
                w = np.asarray(w, dtype=float)
                if w.ndim == 1:
                    w = np.broadcast_to(w, (n_nodes, dim)).copy()
                cands.append(w)
        W = np.stack(cands)
        g_bar, g_tilde = self._objectives(z, W)
        i_bar = np.argmin(g_bar, axis=0)
        i_tilde = np.argmin(g_tilde, axis=0)
        nodes = np.arange(n_nodes)
        m_z = self.m.values(np.broadcast_to(z, (n_nodes, dim)))
        out = (g_bar[i_bar, nodes], m_z + g_tilde[i_tilde, nodes],
               W[i_bar, nodes], W[i_tilde, nodes])
        if key is not None:
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = out
        return out


def _grid_scan_candidates(fun, k, n_nodes, radius, points=41):
    """Dense scan over a coordinate box; returns per-node best coordinates."""
    axes = [np.linspace(-radius, radius, points)] * k
    mesh = np.meshgrid(*axes, indexing="ij")
    C = np.stack([g.ravel() for g in mesh], axis=-1)      # (P, k)
    C_batch = np.broadcast_to(C[:, None, :], (C.shape[0], n_nodes, k))
    vals = fun(C_batch)                                   # (P, n_nodes)
    best = np.argmin(vals, axis=0)
    return C[best]


class QuotientBar(Gauge):
    """inf over w in span(W) of  m(z + w)(t) + delta ||z + w||."""

    has_subgrad = False

    def __init__(self, m, w_rows, delta, norm, oracle=False):
        self.core = _QuotientCore(m, w_rows, delta, norm, oracle)
        self.dim = m.dim
        self.n_nodes = m.n_nodes

    def values(self, Z):
        Z = self._check_shape(Z)
        flat = Z.reshape(-1, self.n_nodes, self.dim)
        out = np.zeros(flat.shape[:2])
        for i in range(flat.shape[0]):
            for t in range(self.n_nodes):
                v, _, _, _ = self.core.pair_values(flat[i, t])
                out[i, t] = v[t]
        return out.reshape(Z.shape[:-1])

    def value_nodes(self, z, extra=None):
        v, _, wit, _ = self.core.pair_values(z, extra)
        return v, wit

    def nilspace_basis(self, t, tol=1e-10):
        return orthonormal_rows(self.core.w) if self.core.w.size \
            else np.zeros((0, self.dim))


class QuotientTilde(Gauge):
    """m(z)(t) + inf over w in span(W) of  m(w)(t) + delta ||z + w||."""

    has_subgrad = False

    def __init__(self, m, w_rows, delta, norm, oracle=False):
        self.core = _QuotientCore(m, w_rows, delta, norm, oracle)
        self.dim = m.dim
        self.n_nodes = m.n_nodes

    def values(self, Z):
        Z = self._check_shape(Z)
        flat = Z.reshape(-1, self.n_nodes, self.dim)
        out = np.zeros(flat.shape[:2])
        for i in range(flat.shape[0]):
            for t in range(self.n_nodes):
                _, v, _, _ = self.core.pair_values(flat[i, t])
                out[i, t] = v[t]
        return out.reshape(Z.shape[:-1])

    def value_nodes(self, z, extra=None):
        _, v, _, wit = self.core.pair_values(z, extra)
        return v, wit

    def nilspace_basis(self, t, tol=1e-10):
        return intersect_rowspaces(self.core.m.nilspace_basis(t, tol),
                                   self.core.w)


class InfConv(Gauge):
    """Nodewise inf-convolution over a subspace F:

        (m1 [] m2)(z)(t) = inf over y in F of  m1(y)(t) + m2(z - y)(t).

    The infimum is taken over a deterministic candidate set (origin, the
    projection of z onto F, convex descent, and an optional dense scan), so
    the reported value is an upper bound of the true infimum that is exact
    on the candidates.
    """

    has_subgrad = False

    def __init__(self, m1: Gauge, m2: Gauge, f_rows, oracle=False,
                 search_radius=None):
        if m1.dim != m2.dim or m1.n_nodes != m2.n_nodes:
            raise SeminormError("inf-convolution parts disagree in shape")
        self.m1, self.m2 = m1, m2
        self.dim, self.n_nodes = m1.dim, m1.n_nodes
        self.f = np.atleast_2d(np.asarray(f_rows, dtype=float)) \
            if np.size(f_rows) else np.zeros((0, self.dim))
        self.fq = orthonormal_rows(self.f)
        self.oracle = oracle
        self.search_radius = search_radius

    def _solve(self, z, extra=None):
        n_nodes, dim = self.n_nodes, self.dim
        z = np.asarray(z, dtype=float)
        k = self.fq.shape[0]
        cands = [np.zeros((n_nodes, dim))]
        if k:
            proj = (z @ self.fq.T) @ self.fq
            cands.append(np.broadcast_to(proj, (n_nodes, dim)).copy())
            cands.append(np.broadcast_to(0.5 * proj, (n_nodes, dim)).copy())
            radius = self.search_radius or 4.0 * (1.0 + np.linalg.norm(z))

            def lift(C):
                return C @ self.fq

            def fun(C):
                Y = lift(C)
                return self.m1.values(Y) + self.m2.values(z - Y)

            y, _ = minimize_batched(fun, None, k, n_nodes, radius,
                                    n_iter=0, polish_rounds=220)
            cands.append(lift(y))
            if self.oracle and k <= 2:
                cands.append(lift(_grid_scan_candidates(fun, k, n_nodes,
                                                        radius)))
        if extra:
            for w in extra:
                w = np.asarray(w, dtype=float)
                if w.ndim == 1:
                    w = np.broadcast_to(w, (n_nodes, dim)).copy()
                cands.append(w)
        Y = np.stack(cands)
        vals = self.m1.values(Y) + self.m2.values(z - Y)
        idx = np.argmin(vals, axis=0)
        nodes = np.arange(n_nodes)
        return vals[idx, nodes], Y[idx, nodes]

    def values(self, Z):
        Z = self._check_shape(Z)
        flat = Z.reshape(-1, self.n_nodes, self.dim)
        out = np.zeros(flat.shape[:2])
        for i in range(flat.shape[0]):
            for t in range(self.n_nodes):
                v, _ = self._solve(flat[i, t])
                out[i, t] = v[t]
        return out.reshape(Z.shape[:-1])

    def value_nodes(self, z, extra=None):
        return self._solve(z, extra)

    def nilspace_basis(self, t, tol=1e-10):
        n1 = intersect_rowspaces(self.m1.nilspace_basis(t, tol), self.f)
        n2 = self.m2.nilspace_basis(t, tol)
        return orthonormal_rows(np.vstack([n1, n2]) if n1.size or n2.size
                                else np.zeros((0, self.dim)))


# ---------------------------------------------------------------------------
# vector space model and the module-level operations

@dataclass
class VectorSpaceModel:
    """Ambient space with a distinguished subspace and complement.

    ``subspace`` and ``complement`` are basis rows; together they must span
    R^dim.  ``nilspace`` optionally lists extra per-node zero directions of
    the seminorm (one shared row block, or one per node).
    """

    dim: int
    norm: BaseNorm = field(default_factory=BaseNorm)
    subspace: np.ndarray = None
    complement: np.ndarray = None
    nilspace: object = None   # None | ndarray rows | list of ndarray per node

    def __post_init__(self):
        self.subspace = self._rows(self.subspace)
        self.complement = self._rows(self.complement)
        stacked = np.vstack([self.subspace, self.complement])
        if orthonormal_rows(stacked).shape[0] != self.dim:
            raise SeminormError(
                "subspace and complement bases do not jointly span the space")
        if self.subspace.shape[0] + self.complement.shape[0] != self.dim:
            raise SeminormError("bases are not jointly independent")

    def _rows(self, a):
        if a is None:
            return np.zeros((0, self.dim))
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.size == 0:
            return np.zeros((0, self.dim))
        if a.shape[1] != self.dim:
            raise SeminormError(f"basis rows have length {a.shape[1]}, "
                                f"expected {self.dim}")
        if orthonormal_rows(a).shape[0] != a.shape[0]:
            raise SeminormError("basis rows are linearly dependent")
        return a

    def nilspace_at(self, t: int) -> np.ndarray:
        if self.nilspace is None:
            return np.zeros((0, self.dim))
        if isinstance(self.nilspace, np.ndarray):
            return self.nilspace
        return self.nilspace[t]

    def quotient_rows(self, t: int) -> np.ndarray:
        """Rows spanning complement + nilspace at node t."""
        return np.vstack([self.complement, self.nilspace_at(t)])

    def per_node_nilspace(self) -> bool:
        return isinstance(self.nilspace, list)


def validate_nilspace(m: Gauge, model: VectorSpaceModel, tol=1e-10):
    """Check that every declared nilspace direction has zero gauge value."""
    worst = 0.0
    for t in range(m.n_nodes):
        rows = model.nilspace_at(t)
        for v in rows:
            vals, _ = m.value_nodes(v)
            worst = max(worst, float(vals[t]))
    if worst > tol:
        raise SeminormError(
            f"declared nilspace direction has gauge value {worst:.3e}")
    return worst


def eval_seminorm(m: Gauge, z, t: int) -> float:
    """Gauge value of one vector at one node."""
    vals, _ = m.value_nodes(np.asarray(z, dtype=float))
    return float(vals[t])


def build_m_delta(m: Gauge, model: VectorSpaceModel, delta: float,
                  auto_nilspace: bool = False) -> AugmentedGauge:
    """Augment a gauge by delta times the distance to complement + nilspace.

    The distance is taken in the model's base norm: orthogonal projection
    for p = 2, a linear program for p = 1 and p = inf.  With
    ``auto_nilspace`` the per-node nilspace is read off the gauge itself.
    """
    if delta <= 0:
        raise SeminormError("build_m_delta needs delta > 0")
    if auto_nilspace:
        dists = [SubspaceDistance(
            np.vstack([model.complement, m.nilspace_basis(t)]), model.norm)
            for t in range(m.n_nodes)]
        dist = dists
    elif model.per_node_nilspace():
        dist = [SubspaceDistance(model.quotient_rows(t), model.norm)
                for t in range(m.n_nodes)]
    else:
        dist = SubspaceDistance(model.quotient_rows(0), model.norm)
    return AugmentedGauge(m, [(float(delta), dist)])


def quotient_seminorms(m: Gauge, model: VectorSpaceModel, delta: float,
                       oracle: bool = False):
    """The two quotient constructions over W = complement + nilspace.

    Returns ``(bar, tilde)``; the reported values satisfy bar <= tilde at
    every node because both sides minimize over one shared candidate set.
    """
    if model.per_node_nilspace():
        raise SeminormError("quotient constructions need a shared nilspace")
    w = model.quotient_rows(0)
    bar = QuotientBar(m, w, delta, model.norm, oracle)
    tilde = QuotientTilde(m, w, delta, model.norm, oracle)
    return bar, tilde


def inf_convolve(m1: Gauge, m2: Gauge, f_rows, oracle: bool = False) -> InfConv:
    """Nodewise inf-convolution over the subspace spanned by ``f_rows``."""
    return InfConv(m1, m2, f_rows, oracle=oracle)


@dataclass(frozen=True)
class LocalFinitenessVerdict:
    condition: str            # "condition_i" | "condition_ii" | "fail"
    witness: dict
    minimal_core_dim: int | None = None


def check_locally_finite(m: Gauge, model: VectorSpaceModel, grid, t0: int,
                         eps: float, radius: float = None,
                         tol: float = 1e-10) -> LocalFinitenessVerdict:
    """Classify the local structure of a gauge near a node.

    condition_i: every complement basis vector has gauge value below ``eps``
    on the whole radius-neighbourhood of ``t0`` (checked nonvacuously).

    condition_ii: reported when the complement is trivial, or when the
    subspace contains a nontrivial part on which the gauge vanishes across
    the neighbourhood; the witness carries a basis of that part together
    with the minimal dimension of the complementary core, which is the
    meaningful finite-dimensional surrogate here.

    fail: condition (i) fails on a nontrivial complement and no subspace
    direction vanishes; the witness names the offending vector.
    """
    if radius is None:
        radius = float(np.mean(grid.lengths)) * 2.0 if grid.edges.size else 0.0
    dist = grid.distances_from([t0])
    hood = [int(i) for i in np.flatnonzero(dist <= radius + 1e-12)]

    worst_val, worst_vec, worst_node = -1.0, None, None
    if model.complement.shape[0]:
        for x in model.complement:
            vals, _ = m.value_nodes(x)
            local = vals[hood]
            j = int(np.argmax(local))
            if local[j] > worst_val:
                worst_val, worst_vec, worst_node = float(local[j]), x, hood[j]
        if worst_val < eps:
            return LocalFinitenessVerdict(
                "condition_i",
                {"neighbourhood": hood, "max_value": worst_val, "eps": eps})

    # maximal vanishing part of the subspace across the neighbourhood
    vanishing = model.subspace
    for t in hood:
        vanishing = intersect_rowspaces(vanishing, m.nilspace_basis(t, tol))
        if vanishing.shape[0] == 0:
            break
    core_dim = model.subspace.shape[0] - vanishing.shape[0]

    if model.complement.shape[0] == 0 or vanishing.shape[0] > 0:
        return LocalFinitenessVerdict(
            "condition_ii",
            {"neighbourhood": hood, "vanishing_basis": vanishing,
             "core_dim": core_dim,
             "vacuous": bool(vanishing.shape[0] == 0)},
            minimal_core_dim=core_dim)

    return LocalFinitenessVerdict(
        "fail",
        {"neighbourhood": hood, "counterexample": worst_vec,
         "value": worst_val, "node": worst_node},
        minimal_core_dim=core_dim)


# ---------------------------------------------------------------------------
# the inductive balanced chain

class _QuotientPiecewise(Gauge):
    """bar on a designated node set, tilde elsewhere, one shared core."""

    has_subgrad = False

    def __init__(self, core: _QuotientCore, mask):
        self.core = core
        self.dim = core.m.dim
        self.n_nodes = core.m.n_nodes
        self.mask = np.asarray(mask, dtype=bool).reshape(self.n_nodes)

    def value_nodes(self, z, extra=None):
        v_bar, v_tilde, w_bar, w_tilde = self.core.pair_values(z, extra)
        return (np.where(self.mask, v_bar, v_tilde),
                np.where(self.mask[:, None], w_bar, w_tilde))

    def values(self, Z):
        Z = self._check_shape(Z)
        flat = Z.reshape(-1, self.n_nodes, self.dim)
        out = np.zeros(flat.shape[:2])
        for i in range(flat.shape[0]):
            for t in range(self.n_nodes):
                v, _ = self.value_nodes(flat[i, t])
                out[i, t] = v[t]
        return out.reshape(Z.shape[:-1])

    def nilspace_basis(self, t, tol=1e-10):
        if self.mask[t]:
            return orthonormal_rows(self.core.w) if self.core.w.size \
                else np.zeros((0, self.dim))
        return intersect_rowspaces(self.core.m.nilspace_basis(t, tol),
                                   self.core.w)


@dataclass(frozen=True)
class BalancedChainResult:
    stage_gauges: list          # piecewise bar/tilde gauge per stage
    stage_values: np.ndarray    # (n_stages, n_points, n_nodes)
    tilde_values: np.ndarray    # (n_points, n_nodes)
    points: np.ndarray          # (n_points, dim) evaluated vectors


def balanced_chain(m: Gauge, model: VectorSpaceModel, delta: float,
                   u_masks, f_bases, points, lattice_radius=2.0,
                   lattice_points=9, oracle=False) -> BalancedChainResult:
    """Inductive seminorm chain built from the two quotient constructions.

    Stage n uses the piecewise gauge that equals the bar construction on the
    node set ``u_masks[n]`` and the tilde construction elsewhere; stage n+1
    inf-convolves the previous stage with the next piecewise gauge over the
    subspace ``f_bases[n]``.  Inner infima run over a fixed coordinate
    lattice that always contains the origin, plus the shared quotient
    candidates, so every reported value is an upper bound of the true
    infimum, reported values never exceed the tilde construction, and
    domination of any linear map dominated by the bar construction is
    preserved exactly.

    ``points`` are the vectors at which all stages are evaluated.
    """
    if len(u_masks) != len(f_bases):
        raise SeminormError("need one node set per chain stage")
    if model.per_node_nilspace():
        raise SeminormError("balanced chain needs a shared nilspace")
    core = _QuotientCore(m, model.quotient_rows(0), delta, model.norm, oracle)
    tilde = QuotientTilde(m, model.quotient_rows(0), delta, model.norm, oracle)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    stages = [_QuotientPiecewise(core, mask) for mask in u_masks]

    def lattice(rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size == 0 or rows.shape[0] == 0:
            return np.zeros((1, m.dim))
        q = orthonormal_rows(rows)
        axes = [np.linspace(-lattice_radius, lattice_radius, lattice_points)] \
            * q.shape[0]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([g.ravel() for g in mesh], axis=-1)
        pts = coords @ q
        if not np.any(np.all(pts == 0.0, axis=1)):
            pts = np.vstack([np.zeros(m.dim), pts])
        return pts

    tilde_vals = np.stack([tilde.value_nodes(p)[0] for p in points])

    def eval_gauge_at(g, xs):
        return np.stack([g.value_nodes(x)[0] for x in xs])

    stage_values = []
    current_pts = lattice(f_bases[0])
    current_tab = eval_gauge_at(stages[0], current_pts)   # (L, n_nodes)
    stage_values.append(eval_gauge_at(stages[0], points))

    for n in range(1, len(f_bases)):
        nxt = stages[n]

        def conv_value(x):
            vals = eval_gauge_at(nxt, x - current_pts)     # (L, n_nodes)
            return np.min(current_tab + vals, axis=0)

        stage_values.append(np.stack([conv_value(p) for p in points]))
        if n + 1 < len(f_bases):
            new_pts = lattice(f_bases[n])
            new_tab = np.stack([conv_value(p) for p in new_pts])
            current_pts, current_tab = new_pts, new_tab

    return BalancedChainResult(stages, np.stack(stage_values), tilde_vals,
                               points)
