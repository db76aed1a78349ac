"""Diffusion and commute-time distances on full and reduced graphs.

Both distances are preserved (with exponential accuracy in the reduced
order) between target-subset vertices and their images in the reduced-order
graph.  The stagewise error decomposition splits the total polynomial and
pseudo-inverse approximation errors into the contributions of the three
reduction stages; the third stage is a unitary transform and contributes
exactly nothing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .graphs import GraphLaplacian, Normalization, TargetSubset, connected_components, scale_symmetric
from .linalg import EigenDecomposition, pinv_apply, sym_eig
from .reduced import Rogl, reduced_components
from .rom import RomState

DENSE_PINV_LIMIT = 500


def _apply_power(apply_a, v, p):
    """(I - A)^p v by repeated application."""
    out = v.copy()
    for _ in range(p):
        out = out - apply_a(out)
    return out


def diffusion_distance_full(a_sym, degrees, j, k, p) -> float:
    """Distance between the random-walk probability clouds of two vertices.

    Evaluated through the symmetric normalized form: the squared distance is
    the quadratic form of (I-A)^{2p} on sqrt(d_j) e_j - sqrt(d_k) e_k.
    """
    if p < 0:
        raise ValueError("diffusion time must be nonnegative")
    if j == k:
        return 0.0
    n = a_sym.shape[0]
    v = np.zeros(n)
    v[j] = math.sqrt(degrees[j])
    v[k] = -math.sqrt(degrees[k])
    w = _apply_power(lambda x: a_sym @ x, v, p)
    return float(np.linalg.norm(w))


def _pinv_quadratic_form(a_sym, v, null_vectors, tol=1e-10):
    """v^T A^+ v for symmetric PSD A, dense or via deflated CG."""
    n = a_sym.shape[0]
    if n <= DENSE_PINV_LIMIT:
        a = a_sym.toarray() if hasattr(a_sym, "toarray") else np.asarray(a_sym)
        eig = sym_eig(a)
        return float(v @ pinv_apply(eig, v, tol))

    def project(x):
        return x - null_vectors @ (null_vectors.T @ x)

    op = spla.LinearOperator((n, n), matvec=lambda x: project(a_sym @ project(x)))
    rhs = project(v)
    sol, info = spla.cg(op, rhs, rtol=1e-10, atol=0.0, maxiter=20 * n)
    if info != 0:
        raise RuntimeError(f"deflated CG did not converge (info={info})")
    return float(rhs @ project(sol))


def commute_distance_full(a_sym, degrees, j, k, component_labels=None,
                          null_vectors=None) -> float:
    """Commute-time distance via the pseudo-inverse of the normalized form.

    Vertices in different connected components are infinitely far apart and
    return ``math.inf``.
    """
    if j == k:
        return 0.0
    if component_labels is not None and component_labels[j] != component_labels[k]:
        return math.inf
    n = a_sym.shape[0]
    v = np.zeros(n)
    v[j] = 1.0 / math.sqrt(degrees[j])
    v[k] = -1.0 / math.sqrt(degrees[k])
    form = _pinv_quadratic_form(a_sym, v, null_vectors)
    return math.sqrt(max(form, 0.0))


def diffusion_distance_rogl(rogl: Rogl, j, k, p) -> float:
    """Diffusion distance between two reduced target vertices (j, k < m)."""
    if p < 0:
        raise ValueError("diffusion time must be nonnegative")
    if max(j, k) >= rogl.m:
        raise ValueError("indices must address the target block")
    if j == k:
        return 0.0
    a = rogl.a_tilde
    v = np.zeros(rogl.order)
    v[j] = math.sqrt(rogl.d_tilde[j])
    v[k] = -math.sqrt(rogl.d_tilde[k])
    w = _apply_power(lambda x: a @ x, v, p)
    return float(np.linalg.norm(w))


def commute_distance_rogl(rogl: Rogl, j, k) -> float:
    """Commute-time distance between two reduced target vertices."""
    if max(j, k) >= rogl.m:
        raise ValueError("indices must address the target block")
    if j == k:
        return 0.0
    labels = reduced_components(rogl.l_tilde)
    if labels[j] != labels[k]:
        return math.inf
    eig = sym_eig(rogl.a_tilde)
    v = np.zeros(rogl.order)
    v[j] = 1.0 / math.sqrt(rogl.d_tilde[j])
    v[k] = -1.0 / math.sqrt(rogl.d_tilde[k])
    form = float(v @ pinv_apply(eig, v))
    return math.sqrt(max(form, 0.0))


@dataclass(frozen=True)
class DistanceReport:
    """Full vs reduced distances over target pairs, with per-pair errors."""

    pairs: tuple                 # ((j, k), ...) target-subset positions
    full_values: np.ndarray
    reduced_values: np.ndarray
    kind: str                    # "diffusion" or "commute"
    p: int | None = None         # diffusion time, None for commute

    @property
    def abs_err(self) -> np.ndarray:
        out = np.empty(len(self.pairs))
        for i, (f, r) in enumerate(zip(self.full_values, self.reduced_values)):
            out[i] = 0.0 if (math.isinf(f) and math.isinf(r)) else abs(f - r)
        return out

    @property
    def rel_err(self) -> np.ndarray:
        out = np.full(len(self.pairs), np.nan)
        for i, (f, r) in enumerate(zip(self.full_values, self.reduced_values)):
            if math.isinf(f) and math.isinf(r):
                out[i] = 0.0
            elif f != 0:
                out[i] = abs(f - r) / abs(f)
            else:
                out[i] = abs(r)
        return out

    @property
    def max_rel_err(self) -> float:
        return float(np.nanmax(self.rel_err)) if len(self.pairs) else 0.0

    def rows(self):
        for i, (j, k) in enumerate(self.pairs):
            yield {
                "pair": [int(j), int(k)],
                "full": _jsonable(self.full_values[i]),
                "reduced": _jsonable(self.reduced_values[i]),
                "abs_err": _jsonable(self.abs_err[i]),
                "rel_err": _jsonable(self.rel_err[i]),
            }

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "rows": list(self.rows()),
            "max_rel_err": _jsonable(self.max_rel_err),
        }

    def to_text(self) -> str:
        def fmt(x, width, spec):
            return f"{x:>{width}}" if isinstance(x, str) else f"{x:>{width}{spec}}"

        head = f"# {self.kind} distances" + (f" at p={self.p}" if self.p is not None else "")
        lines = [head, f"{'pair':>10} {'full':>24} {'reduced':>24} {'abs_err':>12} {'rel_err':>12}"]
        for row in self.rows():
            j, k = row["pair"]
            lines.append(
                f"({j:>3},{k:>3}) " + fmt(row["full"], 24, ".16e") + " "
                + fmt(row["reduced"], 24, ".16e") + " "
                + fmt(row["abs_err"], 12, ".3e") + " " + fmt(row["rel_err"], 12, ".3e")
            )
        lines.append(f"max_rel_err {self.max_rel_err:.3e}")
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return float(x)


def all_target_pairs(m: int):
    return tuple((j, k) for j in range(m) for k in range(j + 1, m))


def distance_report(L: GraphLaplacian, weights: Normalization, subset: TargetSubset,
                    rogl: Rogl, kind: str, p: int | None = None,
                    pairs=None) -> DistanceReport:
    """Compare full-graph and reduced-graph distances over target pairs."""
    a = scale_symmetric(L, weights)
    labels = connected_components(L)
    null_vectors = _component_null_basis(weights, labels) if L.n > DENSE_PINV_LIMIT else None
    if pairs is None:
        pairs = all_target_pairs(subset.m)
    full_vals, red_vals = [], []
    for j, k in pairs:
        vj, vk = subset.indices[j], subset.indices[k]
        if kind == "diffusion":
            full_vals.append(diffusion_distance_full(a, weights.d, vj, vk, p))
            red_vals.append(diffusion_distance_rogl(rogl, j, k, p))
        elif kind == "commute":
            full_vals.append(
                commute_distance_full(a, weights.d, vj, vk, labels, null_vectors)
            )
            red_vals.append(commute_distance_rogl(rogl, j, k))
        else:
            raise ValueError(f"unknown distance kind {kind!r}")
    return DistanceReport(tuple(pairs), np.array(full_vals), np.array(red_vals),
                          kind, p)


def _component_null_basis(weights: Normalization, labels: np.ndarray) -> np.ndarray:
    comps = np.unique(labels)
    out = np.zeros((labels.size, comps.size))
    for i, c in enumerate(comps):
        mask = labels == c
        vec = np.where(mask, weights.sqrt, 0.0)
        out[:, i] = vec / np.linalg.norm(vec)
    return out


@dataclass(frozen=True)
class ErrorDecomposition:
    """Stagewise split of the polynomial (P) and pseudo-inverse (J) errors.

    Each field is an m x m matrix of errors between consecutive stage
    representations of the subset quadratic response:

      stage 1: full operator -> first Krylov projection,
      stage 2: first projection -> compressed model,
      stage 3: compressed model -> tridiagonal form (exactly zero).
    """

    delta1_p: np.ndarray
    delta2_p: np.ndarray
    delta3_p: np.ndarray
    delta1_j: np.ndarray
    delta2_j: np.ndarray
    delta3_j: np.ndarray
    p: int


def _subset_power_form(apply_a, inputs, p):
    """inputs^T (I - A)^{2p} inputs via repeated application."""
    x = inputs.copy()
    for _ in range(2 * p):
        x = x - apply_a(x)
    return inputs.T @ x


def _subset_pinv_form(mat, inputs, null_tol=1e-10):
    eig = sym_eig(mat)
    return inputs.T @ pinv_apply(eig, inputs, null_tol)


def error_decomposition(L: GraphLaplacian, weights: Normalization,
                        subset: TargetSubset, rom: RomState, rogl: Rogl,
                        p: int) -> ErrorDecomposition:
    """Compute the three-stage error split at diffusion exponent 2p.

    The full-graph terms use dense eigendecompositions and repeated sparse
    application, independent of the reduction path they are checking.
    """
    a = scale_symmetric(L, weights)
    b = subset.indicator_matrix(L.n)

    g0 = _subset_power_form(lambda x: a @ x, b, p)
    t1 = rom.stage1.tri.assemble()
    e1 = rom.stage1.e1
    g1 = _subset_power_form(lambda x: t1 @ x, e1, p)
    g2 = _subset_power_form(lambda x: rom.a12 @ x, rom.c12, p)
    a3 = rogl.a_tilde
    e1r = np.zeros((rogl.order, rogl.m))
    e1r[: rogl.m, : rogl.m] = np.eye(rogl.m)
    g3 = _subset_power_form(lambda x: a3 @ x, e1r, p)

    if L.n > DENSE_PINV_LIMIT:
        raise ValueError("error decomposition requires a dense-scale graph")
    j0 = _subset_pinv_form(a.toarray(), b)
    j1 = _subset_pinv_form(t1, e1)
    j2 = _subset_pinv_form(rom.a12, rom.c12)
    j3 = _subset_pinv_form(a3, e1r)

    return ErrorDecomposition(
        delta1_p=g0 - g1,
        delta2_p=g1 - g2,
        delta3_p=g2 - g3,
        delta1_j=j0 - j1,
        delta2_j=j1 - j2,
        delta3_j=j2 - j3,
        p=p,
    )


def reports_to_json(reports) -> str:
    return json.dumps([r.to_json() for r in reports], indent=1, sort_keys=True)
