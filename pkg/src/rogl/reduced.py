"""Transformation of the reduced model into reduced-order graph-Laplacian form.

A third (machine-precision deflated) block-Lanczos pass turns the reduced
matrix into block-tridiagonal form whose first block corresponds to the
target subset.  A diagonal scaling built from the projected weighted constant
vector then yields a symmetric positive-semidefinite matrix with zero row
sums: a small graph-Laplacian whose first m vertices stand for the original
target subset.  Off-diagonal entries of the reduced Laplacian may take either
sign; only symmetry, PSD-ness, and zero row sums are guaranteed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import NullspaceCaptureError, ScalingError
from .lanczos import MACHINE_DEFLATION, BlockTridiagonal, deflated_block_lanczos
from .linalg import nullspace_basis, orthonormal_columns, sym_eig
from .rom import RomState

ASSUMPTION2_RTOL = 1e-12
COMPONENT_EDGE_RTOL = 1e-12


@dataclass
class Rogl:
    """Reduced-order graph-Laplacian and the transform that produced it."""

    tri: BlockTridiagonal       # block-tridiagonal reduced normalized matrix
    q_tilde: np.ndarray         # orthogonal transform from the ROM coordinates
    z0: np.ndarray              # scaling vector (signed square roots of d_tilde)
    d_tilde: np.ndarray         # positive diagonal weights
    l_tilde: np.ndarray         # symmetric PSD, zero row sums
    m: int                      # target subset size (first m reduced vertices)
    m0: int

    @property
    def order(self) -> int:
        return self.l_tilde.shape[0]

    @property
    def reduced_target(self) -> np.ndarray:
        return np.arange(self.m)

    @cached_property
    def a_tilde(self) -> np.ndarray:
        return self.tri.assemble()

    @property
    def d_hat(self) -> np.ndarray:
        """Weights of the target block (match the original subset weights)."""
        return self.d_tilde[: self.m]

    @property
    def ghost_diagnostic(self) -> np.ndarray:
        """diag(L~)/D~ ratio; strong nonuniformity marks ghost-cluster-prone runs."""
        return np.diag(self.l_tilde) / self.d_tilde

    def row_sum_residual(self) -> float:
        scale = max(np.abs(self.l_tilde).max(), 1e-300)
        return float(np.max(np.abs(self.l_tilde.sum(axis=1))) / scale)

    def assumption2_margin(self) -> float:
        return float(np.min(np.abs(self.z0)) / np.max(np.abs(self.z0)))


def tridiagonalize_rom(rom: RomState):
    """Orthogonal transform of the reduced matrix to block-tridiagonal form.

    The start block is the projected, weight-normalized input
    C = Q12^T D^{1/2} B Dhat^{-1/2}; deflation runs at machine precision so
    the transform is size-preserving.  Returns ``(tri, q_tilde)`` with
    q_tilde @ E1 = C.
    """
    d_hat = rom.d_hat
    c = rom.q12_input_block()
    if not orthonormal_columns(c, 1e-10):
        raise NullspaceCaptureError(
            "projected input block is not orthonormal; the reduction basis is "
            "inconsistent with the supplied vertex weights"
        )
    a12 = rom.a12
    tri, basis = deflated_block_lanczos(
        lambda x: a12 @ x, c, max_steps=rom.order, eps=MACHINE_DEFLATION,
        reorth="full",
    )
    return tri, basis.matrix()


def compute_z0(rom: RomState, q_tilde: np.ndarray,
               assum2_rtol: float = ASSUMPTION2_RTOL) -> np.ndarray:
    """Scaling vector: the weighted constant vector in tridiagonal coordinates.

    z0 = Qtilde^T Q12^T D^{1/2} 1.  Its first m entries equal the square
    roots of the subset weights; every entry must be nonzero for the
    Laplacian scaling to exist (raises ScalingError otherwise, carrying the
    first offending index).
    """
    w = rom.stage1.q1.T @ rom.weights.sqrt
    z0 = q_tilde.T @ (rom.basis2.T @ w)
    floor = assum2_rtol * np.max(np.abs(z0))
    bad = np.where(np.abs(z0) <= floor)[0]
    if bad.size:
        raise ScalingError(
            f"scaling vector entry {int(bad[0])} is numerically zero "
            f"(|z0[{int(bad[0])}]| <= {floor:.3e})",
            index=int(bad[0]),
        )
    return z0


def nullspace_coefficients(tri_or_dense, z0: np.ndarray, m0: int,
                           tol: float = 1e-8):
    """Expansion of z0 in the nullspace basis of the tridiagonal matrix.

    Solves the m0 x m0 system picking the first m0 rows; a singular system
    means the zero eigenvalue was not captured consistently.  Returns
    ``(coefficients, residual)`` where residual is the relative distance of
    z0 from the nullspace span.
    """
    a = tri_or_dense.assemble() if isinstance(tri_or_dense, BlockTridiagonal) else tri_or_dense
    eig = sym_eig(a)
    z_basis = nullspace_basis(eig, tol)
    if z_basis.shape[1] != m0:
        raise NullspaceCaptureError(
            f"tridiagonal form has {z_basis.shape[1]} near-null directions, expected {m0}"
        )
    lead = z_basis[:m0, :]
    try:
        coeffs = np.linalg.solve(lead, z0[:m0])
    except np.linalg.LinAlgError as exc:
        raise NullspaceCaptureError(
            "leading nullspace block is singular; zero eigenvalue not captured"
        ) from exc
    resid = np.linalg.norm(z_basis @ (z_basis.T @ z0) - z0) / np.linalg.norm(z0)
    return coeffs, float(resid)


def scale_to_laplacian(tri_or_dense, z0: np.ndarray):
    """Diagonal scaling to zero-row-sum PSD form.

    With S = diag(z0) (signed), D~ = S^2 and L~ = S A~ S.  Returns
    ``(d_tilde, l_tilde)``.
    """
    a = tri_or_dense.assemble() if isinstance(tri_or_dense, BlockTridiagonal) else np.asarray(tri_or_dense)
    if np.any(z0 == 0.0):
        raise ScalingError("scaling vector has a zero entry",
                           index=int(np.where(z0 == 0.0)[0][0]))
    l_tilde = z0[:, None] * a * z0[None, :]
    l_tilde = 0.5 * (l_tilde + l_tilde.T)
    return z0**2, l_tilde


def build_rogl(rom: RomState, assum2_rtol: float = ASSUMPTION2_RTOL) -> Rogl:
    """Full third-stage pipeline: tridiagonalize, scale, package."""
    tri, q_tilde = tridiagonalize_rom(rom)
    z0 = compute_z0(rom, q_tilde, assum2_rtol)
    d_tilde, l_tilde = scale_to_laplacian(tri, z0)
    return Rogl(
        tri=tri,
        q_tilde=q_tilde,
        z0=z0,
        d_tilde=d_tilde,
        l_tilde=l_tilde,
        m=rom.m,
        m0=rom.m0,
    )


def reduced_components(l_tilde: np.ndarray,
                       edge_rtol: float = COMPONENT_EDGE_RTOL) -> np.ndarray:
    """Component labels of the reduced graph (entries above the noise floor)."""
    scale = np.abs(l_tilde).max()
    adj = np.abs(l_tilde.copy())
    np.fill_diagonal(adj, 0.0)
    adj[adj <= edge_rtol * scale] = 0.0
    _, labels = csgraph.connected_components(sp.csr_matrix(adj), directed=False)
    return labels


def indicator_nullspace_residuals(l_tilde: np.ndarray, labels=None) -> np.ndarray:
    """Relative residual ||L~ 1_c|| / ||L~|| per reduced component indicator."""
    if labels is None:
        labels = reduced_components(l_tilde)
    scale = np.linalg.norm(l_tilde, 2)
    out = []
    for c in np.unique(labels):
        ind = (labels == c).astype(float)
        out.append(np.linalg.norm(l_tilde @ ind) / max(scale, 1e-300))
    return np.array(out)


@dataclass(frozen=True)
class OptimalGrid1D:
    """Primary/dual grid steps of the equivalent staggered difference scheme.

    A scalar-target (m=1) reduced Laplacian is plain tridiagonal; with unit
    conductivity its off-diagonals encode reciprocal primary steps between
    consecutive grid nodes (n-1 of them) and the weights encode the n dual
    steps.  All steps must be strictly positive.
    """

    h: np.ndarray          # primary steps, length n-1
    h_hat: np.ndarray      # dual steps, length n
    sigma: np.ndarray      # conductivity at primary nodes (unit by default)
    sigma_hat: np.ndarray  # conductivity at dual nodes (unit by default)


def extract_optimal_grid(l_tilde: np.ndarray, d_tilde: np.ndarray) -> OptimalGrid1D:
    """Read the finite-difference grid embedded in a scalar-target reduction."""
    n = l_tilde.shape[0]
    band = np.abs(l_tilde - np.diag(np.diag(l_tilde)))
    band[np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]) == 1] = 0.0
    if band.max() > 1e-10 * max(np.abs(l_tilde).max(), 1e-300):
        raise ValueError("reduced Laplacian is not tridiagonal (target size must be 1)")
    off = np.diag(l_tilde, 1)
    if np.any(off == 0.0):
        raise ValueError("zero off-diagonal entry: grid chain is decoupled")
    h = -1.0 / off
    h_hat = d_tilde.copy()
    if np.any(h <= 0) or np.any(h_hat <= 0):
        raise ScalingError("extracted grid steps are not all positive")
    return OptimalGrid1D(h, h_hat, np.ones(n - 1), np.ones(n))


def export_rogl(rogl: Rogl, vertex_ids=None, drop_rtol: float = 0.0) -> dict:
    """JSON-ready dict with the reduced Laplacian in coordinate form.

    Fields: ``format`` (version tag), ``n``/``m``/``m0`` sizes,
    ``block_sizes`` (tridiagonal ladder), ``d_tilde`` weights, ``l_tilde``
    as parallel ``rows/cols/values`` arrays (upper triangle incl. diagonal),
    ``target_map`` from reduced vertex to original external vertex id, and
    diagnostics (row-sum residual, scaling margin, ghost ratio vector).
    """
    lt = rogl.l_tilde
    scale = np.abs(lt).max()
    rows, cols, vals = [], [], []
    for i in range(rogl.order):
        for j in range(i, rogl.order):
            if abs(lt[i, j]) > drop_rtol * scale:
                rows.append(i)
                cols.append(j)
                vals.append(float(lt[i, j]))
    if vertex_ids is None:
        target_map = {int(i): int(i) for i in range(rogl.m)}
    else:
        target_map = {int(i): int(vertex_ids[i]) for i in range(rogl.m)}
    return {
        "format": "rogl-v1",
        "n": rogl.order,
        "m": rogl.m,
        "m0": rogl.m0,
        "block_sizes": list(rogl.tri.block_sizes),
        "d_tilde": [float(x) for x in rogl.d_tilde],
        "l_tilde": {"rows": rows, "cols": cols, "values": vals},
        "target_map": target_map,
        "diagnostics": {
            "row_sum_residual": rogl.row_sum_residual(),
            "assumption2_margin": rogl.assumption2_margin(),
            "ghost_ratio": [float(x) for x in rogl.ghost_diagnostic],
        },
    }


def save_rogl(path, rogl: Rogl, vertex_ids=None) -> None:
    with open(path, "w") as fh:
        json.dump(export_rogl(rogl, vertex_ids), fh, indent=1, sort_keys=True)


def load_rogl_matrices(path):
    """Rebuild (d_tilde, l_tilde, target_map) from an exported container."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "rogl-v1":
        raise ValueError(f"unsupported container format {doc.get('format')!r}")
    n = doc["n"]
    lt = np.zeros((n, n))
    co = doc["l_tilde"]
    for i, j, v in zip(co["rows"], co["cols"], co["values"]):
        lt[i, j] = v
        lt[j, i] = v
    return np.array(doc["d_tilde"]), lt, {int(k): v for k, v in doc["target_map"].items()}


def laplace_transfer_reduced(tri_or_dense, d_hat: np.ndarray, lam: float,
                             m: int) -> np.ndarray:
    """Resolvent transfer of the tridiagonal form at frequency lam.

    Dhat^{1/2} E1^T (lam I - A~)^{-1} E1 Dhat^{1/2}; used to verify that the
    tridiagonalization preserved the reduced transfer function.
    """
    a = tri_or_dense.assemble() if isinstance(tri_or_dense, BlockTridiagonal) else np.asarray(tri_or_dense)
    n = a.shape[0]
    rhs = np.zeros((n, m))
    rhs[:m, :m] = np.eye(m)
    sol = np.linalg.solve(lam * np.eye(n) - a, rhs)
    root = np.sqrt(d_hat)
    return root[:, None] * sol[:m, :] * root[None, :]
