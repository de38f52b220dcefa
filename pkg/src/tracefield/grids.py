"""Finite metric grids and scalar fields on them.

A grid is a connected weighted graph with an optional set of designated
"infinity" nodes; fields are plain ``(n,)`` numpy arrays indexed by node id.
Continuity-type statements are always *measured* on the grid (edge jumps,
semicontinuity defects, refinement trends), never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _dijkstra


class GridError(ValueError):
    """Invalid grid data or field/grid mismatch."""


class Grid:
    """Connected weighted graph with designated infinity nodes.

    Parameters
    ----------
    kind : str
        "path", "circle", or "graph".
    n : int
        Number of nodes (ids ``0 .. n-1``).
    edges : array_like, shape (m, 2)
        Node id pairs.
    lengths : array_like, shape (m,)
        Strictly positive edge lengths.
    infinity : iterable of int
        Node ids treated as the points at infinity (may be empty).
    positions : array_like or None
        Arc-length coordinate per node for path/circle grids; used by
        generators and reports, not by the graph metric.
    """

    def __init__(self, kind, n, edges, lengths, infinity=(), positions=None):
        if kind not in ("path", "circle", "graph"):
            raise GridError(f"unknown grid kind {kind!r}")
        n = int(n)
        edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if n < 1:
            raise GridError("grid needs at least one node")
        if edges.shape[0] != lengths.shape[0]:
            raise GridError("edges and lengths disagree in count")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GridError("edge endpoint out of range")
        if np.any(lengths <= 0):
            raise GridError("edge lengths must be positive")
        infinity = tuple(sorted(int(i) for i in infinity))
        if any(i < 0 or i >= n for i in infinity):
            raise GridError("infinity node id out of range")
        self.kind = kind
        self.n = n
        self.edges = edges
        self.lengths = lengths
        self.infinity = infinity
        self.positions = None if positions is None else \
            np.asarray(positions, dtype=float).reshape(n)
        self._neighbors = [[] for _ in range(n)]
        for (i, j), w in zip(edges, lengths):
            self._neighbors[i].append((int(j), float(w)))
            self._neighbors[j].append((int(i), float(w)))
        if n > 1 and not self._connected():
            raise GridError("grid is not connected")

    def _connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j, _ in self._neighbors[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    def neighbors(self, i: int):
        return self._neighbors[i]

    def check_field(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.shape != (self.n,):
            raise GridError(f"field has {g.shape[0]} values, grid has {self.n}")
        if not np.all(np.isfinite(g)):
            raise GridError("field contains non-finite values")
        return g

    def distances_from(self, sources) -> np.ndarray:
        """Graph distances from a set of source nodes (Dijkstra)."""
        sources = list(sources)
        if not sources:
            return np.full(self.n, np.inf)
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.lengths
        mat = csr_matrix((np.concatenate([w, w]),
                          (np.concatenate([i, j]), np.concatenate([j, i]))),
                         shape=(self.n, self.n))
        d = _dijkstra(mat, directed=False, indices=sources, min_only=True)
        return np.asarray(d, dtype=float)


def path_grid(n, length=1.0, infinity=()) -> Grid:
    """Uniform path on [0, length] with n nodes."""
    if n < 2:
        raise GridError("path grid needs at least two nodes")
    step = length / (n - 1)
    edges = [(i, i + 1) for i in range(n - 1)]
    pos = np.linspace(0.0, length, n)
    return Grid("path", n, edges, [step] * (n - 1), infinity, pos)


def circle_grid(n, circumference=1.0, infinity=()) -> Grid:
    """Uniform circle with n nodes."""
    if n < 3:
        raise GridError("circle grid needs at least three nodes")
    step = circumference / n
    edges = [(i, (i + 1) % n) for i in range(n)]
    pos = np.arange(n) * step
    return Grid("circle", n, edges, [step] * n, infinity, pos)


def refine(grid: Grid):
    """Split every edge at its midpoint.

    Returns ``(fine, prolong)`` where ``prolong`` is the (n_new, n_old)
    linear-interpolation matrix: original nodes keep their ids and values,
    each new midpoint node averages its edge's endpoints.
    """
    m = grid.edges.shape[0]
    n_new = grid.n + m
    edges, lengths = [], []
    prolong = np.zeros((n_new, grid.n))
    prolong[:grid.n, :] = np.eye(grid.n)
    positions = None
    if grid.positions is not None:
        positions = np.concatenate([grid.positions, np.zeros(m)])
    for e, ((i, j), w) in enumerate(zip(grid.edges, grid.lengths)):
        mid = grid.n + e
        edges += [(i, mid), (mid, j)]
        lengths += [w / 2, w / 2]
        prolong[mid, i] = prolong[mid, j] = 0.5
        if positions is not None:
            positions[mid] = grid.positions[i] + w / 2
    return (Grid(grid.kind, n_new, edges, lengths, grid.infinity, positions),
            prolong)


@dataclass(frozen=True)
class ContinuityModulus:
    lipschitz: float   # max |g(u)-g(v)| / length(u,v) over edges
    max_jump: float    # max raw jump |g(u)-g(v)| over edges


def modulus_of_continuity(g, grid: Grid) -> ContinuityModulus:
    """Edge-wise continuity surrogate: difference-quotient and raw-jump maxima."""
    g = grid.check_field(g)
    if grid.edges.shape[0] == 0:
        return ContinuityModulus(0.0, 0.0)
    jumps = np.abs(g[grid.edges[:, 0]] - g[grid.edges[:, 1]])
    return ContinuityModulus(float(np.max(jumps / grid.lengths)),
                             float(np.max(jumps)))


def epsilon_semicontinuity_report(g, grid: Grid, direction: str):
    """Per-node one-sided jump defects.

    For ``direction="upper"`` the defect at node t is the largest upward jump
    ``max(g(s) - g(t), 0)`` to a neighbor s; for "lower" it is the largest
    downward jump.  A function with small upper defects is, on this grid, the
    measurable surrogate of an upper semicontinuous function.
    """
    if direction not in ("upper", "lower"):
        raise GridError("direction must be 'upper' or 'lower'")
    g = grid.check_field(g)
    sign = 1.0 if direction == "upper" else -1.0
    defect = np.zeros(grid.n)
    for t in range(grid.n):
        for s, _ in grid.neighbors(t):
            defect[t] = max(defect[t], sign * (g[s] - g[t]))
    defect = np.maximum(defect, 0.0)
    return defect, float(np.max(defect)) if grid.n else 0.0


def partition_of_unity(grid: Grid, cover) -> list:
    """Bump-function partition subordinate to a cover by node sets.

    Each field is the graph distance to the complement of its cover set
    (zero outside the set), normalized so the family sums to one at every
    node.  Raises when the cover does not cover every node.
    """
    cover = [sorted(set(int(i) for i in part)) for part in cover]
    covered = set()
    for part in cover:
        covered.update(part)
    if covered != set(range(grid.n)):
        missing = sorted(set(range(grid.n)) - covered)
        raise GridError(f"cover misses nodes {missing[:8]}")
    bumps = []
    for part in cover:
        inside = np.zeros(grid.n, dtype=bool)
        inside[part] = True
        complement = [i for i in range(grid.n) if not inside[i]]
        if complement:
            d = grid.distances_from(complement)
            bump = np.where(inside, d, 0.0)
        else:
            bump = np.ones(grid.n)
        bumps.append(bump)
    total = np.sum(bumps, axis=0)
    if np.any(total <= 0):
        raise GridError("cover has a node with zero total bump weight")
    return [b / total for b in bumps]


def cb_membership(g, grid: Grid, cutoff: float = 1e-6):
    """Check membership in the cone of admissible positive fields.

    Admissible means nonnegative everywhere, and no larger than ``cutoff``
    at the designated infinity nodes.  Returns (ok, report dict).
    """
    g = grid.check_field(g)
    min_val = float(np.min(g))
    inf_max = float(np.max(g[list(grid.infinity)])) if grid.infinity else 0.0
    ok = (min_val >= -1e-14) and (inf_max <= cutoff)
    return ok, {"min_value": min_val, "infinity_max": inf_max,
                "cutoff": cutoff}
