"""Strict JSON encoding/decoding of instance files.

Every decoder validates its object shape (unknown keys rejected, required
keys named in errors) before any computation; complex matrices are stored
entrywise as [re, im] pairs.  Encoders emit plain Python types so that
``json.dumps(..., sort_keys=True)`` round-trips byte-identically.
"""

from __future__ import annotations

import numpy as np

from .algebra import AlgebraDescriptor, Element
from .errors import InputError
from .extension import ExtensionProblem
from .fields import MapField
from .grids import Grid
from .seminorms import (AugmentedGauge, BaseNorm, Gauge, InfConv,
                        MaxAbsLinear, PiecewiseNodes, QuotientBar,
                        QuotientTilde, ScaledByField, ScaledNorm,
                        SubspaceDistance, SumGauge, VectorSpaceModel)

FORMAT_VERSION = 1
INSTANCE_KINDS = ("decompose", "extend", "envelope", "verify", "generate")


def _expect(obj, required, optional=(), path="instance"):
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected an object, got {type(obj).__name__}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise InputError(f"{path}: missing keys {missing}")
    unknown = [k for k in obj if k not in required and k not in optional]
    if unknown:
        raise InputError(f"{path}: unknown keys {unknown}")
    return obj


def _floats(x, path):
    try:
        return np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{path}: expected numeric data")


# ---------------------------------------------------------------------------
# grids

def encode_grid(grid: Grid) -> dict:
    out = {
        "kind": grid.kind,
        "nodes": int(grid.n),
        "edges": [[int(i), int(j), float(w)]
                  for (i, j), w in zip(grid.edges, grid.lengths)],
        "infinity": [int(i) for i in grid.infinity],
    }
    if grid.positions is not None:
        out["positions"] = [float(p) for p in grid.positions]
    return out


def decode_grid(obj) -> Grid:
    _expect(obj, ("kind", "nodes", "edges", "infinity"), ("positions",),
            "grid")
    edges = obj["edges"]
    if not isinstance(edges, list) or any(len(e) != 3 for e in edges):
        raise InputError("grid.edges: expected [i, j, length] triples")
    pairs = [(e[0], e[1]) for e in edges]
    lengths = [e[2] for e in edges]
    try:
        return Grid(obj["kind"], obj["nodes"], pairs, lengths,
                    obj["infinity"], obj.get("positions"))
    except ValueError as exc:
        raise InputError(f"grid: {exc}")


# ---------------------------------------------------------------------------
# complex matrices, elements, map fields

def encode_complex_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def decode_complex_matrix(obj, path="matrix") -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InputError(f"{path}: expected entries as [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_element(x: Element) -> dict:
    return {"algebra": list(x.algebra.blocks),
            "blocks": [encode_complex_matrix(b) for b in x.blocks],
            "selfadjoint": bool(x.selfadjoint)}


def decode_element(obj, path="element") -> Element:
    _expect(obj, ("algebra", "blocks"), ("selfadjoint",), path)
    algebra = AlgebraDescriptor(tuple(obj["algebra"]))
    blocks = [decode_complex_matrix(b, f"{path}.blocks[{i}]")
              for i, b in enumerate(obj["blocks"])]
    try:
        return Element(algebra, blocks, bool(obj.get("selfadjoint", True)))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")


def encode_map_field(phi: MapField) -> dict:
    rho = []
    for t in range(phi.grid.n):
        rho.append([encode_complex_matrix(s[t]) for s in phi.stacks])
    return {"grid": encode_grid(phi.grid),
            "algebra": list(phi.algebra.blocks),
            "rho": rho}


def decode_map_field(obj, path="map") -> MapField:
    _expect(obj, ("grid", "algebra", "rho"), (), path)
    grid = decode_grid(obj["grid"])
    algebra = AlgebraDescriptor(tuple(obj["algebra"]))
    rho = obj["rho"]
    if not isinstance(rho, list) or len(rho) != grid.n:
        raise InputError(f"{path}.rho: need one entry per node")
    stacks = []
    for b, d in enumerate(algebra.blocks):
        mats = [decode_complex_matrix(rho[t][b], f"{path}.rho[{t}][{b}]")
                for t in range(grid.n)]
        stacks.append(np.stack(mats))
    try:
        return MapField(grid, algebra, stacks)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")


# ---------------------------------------------------------------------------
# norms, gauges, models

def encode_norm(norm: BaseNorm) -> dict:
    return {"p": ("inf" if norm.p == float("inf") else norm.p),
            "weights": None if norm.weights is None
            else [float(w) for w in norm.weights]}


def decode_norm(obj, path="norm") -> BaseNorm:
    _expect(obj, ("p",), ("weights",), path)
    p = float("inf") if obj["p"] == "inf" else float(obj["p"])
    try:
        return BaseNorm(p, obj.get("weights"))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")


def _field_or_scalar(x, path):
    if isinstance(x, (int, float)):
        return float(x)
    return _floats(x, path)


def encode_gauge(g: Gauge) -> dict:
    if isinstance(g, ScaledNorm):
        return {"kind": "scaled_norm", "dim": g.dim,
                "c": [float(v) for v in g.c], "norm": encode_norm(g.norm)}
    if isinstance(g, MaxAbsLinear):
        return {"kind": "max_abs_linear",
                "functionals": g.functionals.tolist(),
                "scale": [float(v) for v in g.scale]}
    if isinstance(g, SumGauge):
        return {"kind": "sum", "parts": [encode_gauge(p) for p in g.parts]}
    if isinstance(g, ScaledByField):
        return {"kind": "node_scaled", "factor": [float(v) for v in g.factor],
                "inner": encode_gauge(g.inner)}
    if isinstance(g, AugmentedGauge):
        terms = []
        for delta, dist in g.terms:
            if not isinstance(dist, SubspaceDistance):
                raise InputError(
                    "per-node quotient terms are not serializable")
            terms.append({"delta": float(delta),
                          "subspace": dist.basis.tolist(),
                          "norm": encode_norm(dist.norm)})
        return {"kind": "quotient_aug", "base": encode_gauge(g.base),
                "terms": terms}
    if isinstance(g, QuotientBar):
        return {"kind": "quotient_bar", "m": encode_gauge(g.core.m),
                "subspace": g.core.w.tolist(), "delta": g.core.delta,
                "norm": encode_norm(g.core.norm)}
    if isinstance(g, QuotientTilde):
        return {"kind": "quotient_tilde", "m": encode_gauge(g.core.m),
                "subspace": g.core.w.tolist(), "delta": g.core.delta,
                "norm": encode_norm(g.core.norm)}
    if isinstance(g, InfConv):
        return {"kind": "inf_conv", "m1": encode_gauge(g.m1),
                "m2": encode_gauge(g.m2), "subspace": g.f.tolist()}
    if isinstance(g, PiecewiseNodes):
        return {"kind": "piecewise_nodes", "mask": g.mask.astype(int).tolist(),
                "inside": encode_gauge(g.inside),
                "outside": encode_gauge(g.outside)}
    raise InputError(f"gauge kind {type(g).__name__} is not serializable")


def decode_gauge(obj, n_nodes: int, path="seminorm") -> Gauge:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputError(f"{path}: expected an object with a 'kind' tag")
    kind = obj["kind"]
    try:
        if kind == "scaled_norm":
            _expect(obj, ("kind", "dim", "c"), ("norm",), path)
            norm = decode_norm(obj["norm"], f"{path}.norm") \
                if "norm" in obj else BaseNorm()
            return ScaledNorm(_field_or_scalar(obj["c"], path), n_nodes,
                              int(obj["dim"]), norm)
        if kind == "max_abs_linear":
            _expect(obj, ("kind", "functionals"), ("scale",), path)
            return MaxAbsLinear(_floats(obj["functionals"], path), n_nodes,
                                obj.get("scale", 1.0))
        if kind == "sum":
            _expect(obj, ("kind", "parts"), (), path)
            return SumGauge([decode_gauge(p, n_nodes, f"{path}.parts[{i}]")
                             for i, p in enumerate(obj["parts"])])
        if kind == "node_scaled":
            _expect(obj, ("kind", "factor", "inner"), (), path)
            return ScaledByField(
                decode_gauge(obj["inner"], n_nodes, f"{path}.inner"),
                _floats(obj["factor"], path))
        if kind == "quotient_aug":
            _expect(obj, ("kind", "base", "terms"), (), path)
            base = decode_gauge(obj["base"], n_nodes, f"{path}.base")
            terms = []
            for i, term in enumerate(obj["terms"]):
                _expect(term, ("delta", "subspace", "norm"), (),
                        f"{path}.terms[{i}]")
                terms.append((float(term["delta"]), SubspaceDistance(
                    _floats(term["subspace"], path),
                    decode_norm(term["norm"], f"{path}.terms[{i}].norm"))))
            return AugmentedGauge(base, terms)
        if kind in ("quotient_bar", "quotient_tilde"):
            _expect(obj, ("kind", "m", "subspace", "delta", "norm"), (), path)
            cls = QuotientBar if kind == "quotient_bar" else QuotientTilde
            return cls(decode_gauge(obj["m"], n_nodes, f"{path}.m"),
                       _floats(obj["subspace"], path), float(obj["delta"]),
                       decode_norm(obj["norm"], f"{path}.norm"))
        if kind == "inf_conv":
            _expect(obj, ("kind", "m1", "m2", "subspace"), (), path)
            return InfConv(decode_gauge(obj["m1"], n_nodes, f"{path}.m1"),
                           decode_gauge(obj["m2"], n_nodes, f"{path}.m2"),
                           _floats(obj["subspace"], path))
        if kind == "piecewise_nodes":
            _expect(obj, ("kind", "mask", "inside", "outside"), (), path)
            return PiecewiseNodes(
                np.asarray(obj["mask"], dtype=bool),
                decode_gauge(obj["inside"], n_nodes, f"{path}.inside"),
                decode_gauge(obj["outside"], n_nodes, f"{path}.outside"))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")
    raise InputError(f"{path}: unknown gauge kind {kind!r}")


def encode_model(model: VectorSpaceModel) -> dict:
    out = {"dim": int(model.dim), "norm": encode_norm(model.norm),
           "subspace": model.subspace.tolist(),
           "complement": model.complement.tolist()}
    if model.nilspace is not None:
        if isinstance(model.nilspace, np.ndarray):
            out["nilspace"] = model.nilspace.tolist()
        else:
            raise InputError("per-node nilspaces are not serializable")
    return out


def decode_model(obj, path="space") -> VectorSpaceModel:
    _expect(obj, ("dim", "norm", "subspace", "complement"), ("nilspace",),
            path)
    nil = obj.get("nilspace")
    try:
        return VectorSpaceModel(
            int(obj["dim"]), decode_norm(obj["norm"], f"{path}.norm"),
            _floats(obj["subspace"], path), _floats(obj["complement"], path),
            None if nil is None else _floats(nil, path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")


# ---------------------------------------------------------------------------
# extension problems and instance files

def encode_extension_problem(problem: ExtensionProblem, order=None) -> dict:
    out = {"grid": encode_grid(problem.grid),
           "space": encode_model(problem.model),
           "phi": problem.phi.tolist(),
           "seminorm": encode_gauge(problem.gauge),
           "delta": float(problem.delta)}
    if order is not None:
        out["order"] = [int(i) for i in order]
    return out


def decode_extension_problem(obj, path="extend"):
    _expect(obj, ("grid", "space", "phi", "seminorm", "delta"), ("order",),
            path)
    grid = decode_grid(obj["grid"])
    model = decode_model(obj["space"], f"{path}.space")
    gauge = decode_gauge(obj["seminorm"], grid.n, f"{path}.seminorm")
    try:
        problem = ExtensionProblem(grid, model, gauge,
                                   _floats(obj["phi"], f"{path}.phi"),
                                   float(obj["delta"]))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}")
    return problem, obj.get("order")


def encode_instance(kind: str, payload: dict) -> dict:
    if kind not in INSTANCE_KINDS:
        raise InputError(f"unknown instance kind {kind!r}")
    return {"version": FORMAT_VERSION, "kind": kind, kind: payload}


def decode_instance(obj) -> tuple:
    _expect(obj, ("version", "kind"), INSTANCE_KINDS, "instance")
    if obj["version"] != FORMAT_VERSION:
        raise InputError(f"unsupported instance version {obj['version']!r}")
    kind = obj["kind"]
    if kind not in INSTANCE_KINDS:
        raise InputError(f"unknown instance kind {kind!r}")
    extra = [k for k in obj if k not in ("version", "kind", kind)]
    if extra:
        raise InputError(f"instance: unknown keys {extra}")
    if kind not in obj:
        raise InputError(f"instance: missing payload key {kind!r}")
    return kind, obj[kind]
