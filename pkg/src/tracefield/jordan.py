"""Nodewise minimal decomposition of map fields into positive parts.

The split is purely local: every node's functional is separated into its
positive and negative spectral parts, which reconstruct the original exactly
and add their norms.  Whether the two parts vary continuously across the
grid is then *measured* (edge jumps under refinement), never imposed; for
inputs whose norm field is discontinuous the reports simply display the
discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import (AlgebraDescriptor, AlgebraError, Element, FunctionalRep,
                      random_contraction, support_projection)
from .config import Tolerances, DEFAULT_TOLS
from .fields import (MapField, evaluate, pointwise_norm, refine_map_field)
from .grids import modulus_of_continuity, refine

_TEST_ELEMENT_SEED = 271828182


@dataclass(frozen=True)
class DecompositionResult:
    phi: MapField
    plus: MapField
    minus: MapField
    norms: np.ndarray        # pointwise norm of phi
    norms_plus: np.ndarray
    norms_minus: np.ndarray
    reconstruction_residual: float
    min_eigenvalue: float    # most negative eigenvalue across both parts


def decompose_map(phi: MapField, tols: Tolerances = DEFAULT_TOLS) -> DecompositionResult:
    """Split every node's functional into positive and negative parts.

    Works for any map field; absolute continuity is not required (it only
    governs whether the output varies continuously).  Per node and block the
    split is the spectral sign decomposition with kernel threshold
    ``tols.eig_zero``.
    """
    plus_stacks, minus_stacks = [], []
    for b, s in enumerate(phi.stacks):
        try:
            w, u = np.linalg.eigh(s)
        except np.linalg.LinAlgError as exc:
            raise AlgebraError(f"eigensolver failed on block {b}: {exc}")
        wp = np.where(w > tols.eig_zero, w, 0.0)
        wm = np.where(w < -tols.eig_zero, -w, 0.0)
        uc = np.conj(np.transpose(u, (0, 2, 1)))
        plus_stacks.append(np.einsum("nij,nj,njk->nik", u, wp, uc))
        minus_stacks.append(np.einsum("nij,nj,njk->nik", u, wm, uc))
    plus = MapField(phi.grid, phi.algebra, plus_stacks)
    minus = MapField(phi.grid, phi.algebra, minus_stacks)

    recon = 0.0
    for s, p, q in zip(phi.stacks, plus.stacks, minus.stacks):
        recon = max(recon, float(np.max(np.abs(s - (p - q)))))
    min_eig = 0.0
    for part in (plus, minus):
        for s in part.stacks:
            min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(s))))
    return DecompositionResult(phi, plus, minus, pointwise_norm(phi),
                               pointwise_norm(plus), pointwise_norm(minus),
                               recon, min_eig)


def verify_norm_additivity(result: DecompositionResult) -> float:
    """max over nodes of | ||phi|| - ||phi_plus|| - ||phi_minus|| |."""
    return float(np.max(np.abs(result.norms - result.norms_plus
                               - result.norms_minus)))


def separator(rho: FunctionalRep, eps: float = 0.0,
              tols: Tolerances = DEFAULT_TOLS) -> Element:
    """Positive contraction nearly splitting the two parts of a functional.

    Returns the support projection K of the negative part: 0 <= K <= 1,
    the positive part pairs to zero with K and the negative part pairs to
    zero with 1 - K (exactly, by orthogonality of the spectral supports;
    ``eps`` is accepted for interface compatibility and only enters the
    contract as an upper bound).
    """
    del eps  # the finite construction achieves the bounds exactly
    return support_projection(rho, "minus", tols)


def default_test_elements(algebra: AlgebraDescriptor, seed=_TEST_ELEMENT_SEED):
    """Unit, a random contraction h with 0 <= h <= 1, and 1 - h."""
    one = algebra.unit()
    h = random_contraction(algebra, seed)
    one_minus_h = Element(algebra, [i - m for i, m in zip(one.blocks, h.blocks)],
                          selfadjoint=True)
    return [("unit", one), ("h", h), ("one_minus_h", one_minus_h)]


@dataclass(frozen=True)
class ContinuityReport:
    element_names: list
    jumps: np.ndarray        # (n_elements, 2, refinements + 1): plus/minus rows
    ratios: np.ndarray       # jump shrink factors between successive levels
    min_ratio: float
    passes: bool


def continuity_report(result: DecompositionResult, test_elements=None,
                      refinements: int = 3, min_factor: float = 1.5,
                      negligible: float = 1e-13) -> ContinuityReport:
    """Track edge jumps of the two parts under grid refinement.

    The input field is transferred to each refined grid by linear
    interpolation of the representing matrices and re-split there; for every
    test element the raw maximal edge jump of the evaluated parts must
    shrink by ``min_factor`` per level.  Levels whose jumps are negligible
    count as converged.
    """
    if test_elements is None:
        test_elements = default_test_elements(result.phi.algebra)
    names = [n for n, _ in test_elements]
    n_el = len(test_elements)
    jumps = np.zeros((n_el, 2, refinements + 1))

    grid, phi = result.phi.grid, result.phi
    for level in range(refinements + 1):
        dec = decompose_map(phi) if level else result
        for e, (_, x) in enumerate(test_elements):
            jumps[e, 0, level] = modulus_of_continuity(
                evaluate(dec.plus, x), grid).max_jump
            jumps[e, 1, level] = modulus_of_continuity(
                evaluate(dec.minus, x), grid).max_jump
        if level < refinements:
            grid, prolong = refine(grid)
            phi = refine_map_field(phi, grid, prolong)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = jumps[:, :, :-1] / jumps[:, :, 1:]
    converged = jumps[:, :, 1:] <= negligible
    ratios = np.where(converged, np.inf, ratios)
    min_ratio = float(np.min(ratios)) if ratios.size else np.inf
    return ContinuityReport(names, jumps, ratios, min_ratio,
                            bool(min_ratio >= min_factor))


@dataclass(frozen=True)
class DeltaContinuityReport:
    delta: float
    norm_modulus: float
    max_violation: float     # positive means the bound failed somewhere
    tightness: float         # largest jump / bound ratio observed
    passes: bool


def delta_continuity_report(phi: MapField, delta: float, test_elements=None,
                            tols: Tolerances = DEFAULT_TOLS) -> DeltaContinuityReport:
    """Check the edge-jump bound of the split parts against the budget.

    For every adjacent node pair and test element x the report compares
    ``|part(x)(s) - part(x)(t)|`` with ``delta ||x|| + w ||x|| + 1e-8``
    where w is the measured raw jump modulus of the norm field.  This is a
    report, not a guard: violations are returned, never raised.
    """
    from .algebra import op_norm

    result = decompose_map(phi, tols)
    if test_elements is None:
        test_elements = default_test_elements(phi.algebra)
    w = modulus_of_continuity(result.norms, phi.grid).max_jump
    edges = phi.grid.edges
    max_violation, tightness = -np.inf, 0.0
    for _, x in test_elements:
        bound = (delta + w) * op_norm(x) + 1e-8
        for part in (result.plus, result.minus):
            vals = evaluate(part, x)
            jump = float(np.max(np.abs(vals[edges[:, 0]] - vals[edges[:, 1]]))) \
                if edges.size else 0.0
            max_violation = max(max_violation, jump - bound)
            if bound > 0:
                tightness = max(tightness, jump / bound)
    return DeltaContinuityReport(delta, w, float(max_violation),
                                 float(tightness), bool(max_violation <= 0))


@dataclass(frozen=True)
class LocalityVerdict:
    passes: bool
    max_residual: float
    weights: np.ndarray       # c(t) read off the diagonal input
    weights_plus: np.ndarray
    weights_minus: np.ndarray


def locality_check(result: DecompositionResult,
                   tols: Tolerances = DEFAULT_TOLS) -> LocalityVerdict:
    """For diagonal inputs, the split must act by the split weights.

    Requires the algebra to be the functions on the grid itself and the
    node-t functional to be supported on coordinate t (multiplication by a
    weight field c).  Verifies that the two parts are the multiplications
    by the positive and negative parts of c.
    """
    phi = result.phi
    n = phi.grid.n
    if phi.algebra.blocks != (1,) * n:
        raise AlgebraError("locality check expects the grid's function algebra")
    weights = np.zeros(n)
    for t in range(n):
        row = np.array([phi.stacks[b][t, 0, 0] for b in range(n)])
        off = np.abs(np.delete(row, t)).max() if n > 1 else 0.0
        if off > tols.residual:
            raise AlgebraError(
                f"input not in diagonal form: off-diagonal weight {off:.3e} "
                f"at node {t}")
        weights[t] = row[t].real

    w_plus = np.maximum(weights, 0.0)
    w_minus = np.maximum(-weights, 0.0)
    resid = 0.0
    for t in range(n):
        p = result.plus.stacks[t][t, 0, 0].real
        q = result.minus.stacks[t][t, 0, 0].real
        resid = max(resid, abs(p - w_plus[t]), abs(q - w_minus[t]))
    return LocalityVerdict(bool(resid <= tols.residual), float(resid),
                           weights, w_plus, w_minus)
