"""Deflated block-Lanczos tridiagonalization of symmetric operators.

Given a symmetric operator M and a start block C with orthonormal columns,
the process builds an orthonormal basis Q of the block Krylov subspace
span{C, MC, M^2 C, ...} such that Q^T M Q is block tridiagonal.  Residual
blocks are compressed by an SVD at every step; singular values below a
relative threshold are truncated, which lets the block width shrink
(deflation) and the process terminate early on invariant subspaces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import thin_svd

MACHINE_DEFLATION = 64 * np.finfo(float).eps
SELECTIVE_THRESHOLD = np.sqrt(np.finfo(float).eps)


@dataclass(frozen=True)
class BlockTridiagonal:
    """Symmetric block-tridiagonal matrix stored as diagonal/subdiagonal blocks.

    ``alphas[j]`` is the (m_j x m_j) symmetric diagonal block of level j and
    ``betas[j]`` the (m_{j+1} x m_j) coupling of level j+1 to level j.
    Block sizes may shrink with j but never grow.
    """

    alphas: tuple
    betas: tuple

    @property
    def block_sizes(self) -> tuple:
        return tuple(a.shape[0] for a in self.alphas)

    @property
    def total_dim(self) -> int:
        return sum(self.block_sizes)

    def assemble(self) -> np.ndarray:
        """Dense symmetric matrix with alphas on the diagonal band."""
        sizes = self.block_sizes
        if len(self.betas) != max(len(sizes) - 1, 0):
            raise ValueError("inconsistent alpha/beta block counts")
        for j, b in enumerate(self.betas):
            if b.shape != (sizes[j + 1], sizes[j]):
                raise ValueError(
                    f"beta[{j}] has shape {b.shape}, expected {(sizes[j + 1], sizes[j])}"
                )
        n = self.total_dim
        out = np.zeros((n, n))
        offs = np.concatenate([[0], np.cumsum(sizes)])
        for j, a in enumerate(self.alphas):
            s = offs[j]
            out[s : s + sizes[j], s : s + sizes[j]] = 0.5 * (a + a.T)
        for j, b in enumerate(self.betas):
            r, c = offs[j + 1], offs[j]
            out[r : r + sizes[j + 1], c : c + sizes[j]] = b
            out[c : c + sizes[j], r : r + sizes[j + 1]] = b.T
        return out


@dataclass(frozen=True)
class LanczosBasis:
    """Orthonormal Krylov basis grouped by Lanczos level."""

    blocks: tuple

    @property
    def block_sizes(self) -> tuple:
        return tuple(b.shape[1] for b in self.blocks)

    @property
    def total_dim(self) -> int:
        return sum(self.block_sizes)

    def matrix(self) -> np.ndarray:
        return np.hstack(self.blocks)


def deflated_block_lanczos(apply_m, c, max_steps, eps, reorth="full",
                           selective_threshold=SELECTIVE_THRESHOLD,
                           orthogonalize_against=None):
    """Run the deflated block-Lanczos process.

    Parameters
    ----------
    apply_m : callable
        Maps an (n x w) block to M @ block for the symmetric operator M.
    c : ndarray, shape (n, m)
        Start block with orthonormal columns (checked to 1e-10).
    max_steps : int
        Maximum number of Lanczos levels.  The process stops earlier when the
        residual block deflates to zero width or the basis exhausts R^n.
    eps : float
        Relative truncation threshold: singular values of the residual block
        are discarded when strictly below ``eps`` times the largest singular
        value of the *first* residual block (scale reference).
    reorth : {"full", "selective", "none"}
        Reorthogonalization policy for new blocks against all previous ones.
        "selective" only corrects when the measured overlap exceeds
        ``selective_threshold``.
    orthogonalize_against : ndarray, optional
        Extra orthonormal block the basis must stay orthogonal to (used when
        the operator acts on a known invariant complement, e.g. a captured
        nullspace).  Included in every reorthogonalization pass.

    Returns
    -------
    (BlockTridiagonal, LanczosBasis)
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        raise ValueError("start block must be a 2-d array")
    n, m = c.shape
    if m == 0 or m > n:
        raise ValueError(f"start block of width {m} invalid for dimension {n}")
    if np.any(np.linalg.norm(c, axis=0) < 1e-14):
        raise ValueError("start block has a zero column")
    if np.max(np.abs(c.T @ c - np.eye(m))) > 1e-10:
        raise ValueError("start block columns are not orthonormal")
    if eps <= 0:
        raise ValueError("truncation tolerance must be positive")
    if reorth not in ("full", "selective", "none"):
        raise ValueError(f"unknown reorthogonalization policy {reorth!r}")

    blocks = [c]
    alphas = []
    betas = []
    scale = None
    op_scale = 0.0
    total = m

    for j in range(max_steps):
        q = blocks[j]
        r = np.asarray(apply_m(q), dtype=float)
        if r.shape != q.shape:
            raise ValueError(
                f"operator returned shape {r.shape}, expected {q.shape}"
            )
        a = q.T @ r
        a = 0.5 * (a + a.T)
        alphas.append(a)
        op_scale = max(op_scale, float(np.max(np.abs(a))) if a.size else 0.0)
        if j + 1 >= max_steps or total >= n:
            break
        r = r - q @ a
        if j > 0:
            r = r - blocks[j - 1] @ betas[j - 1].T
        u, s, w = thin_svd(r)
        if scale is None:
            scale = float(s[0]) if s.size else 0.0
        # Machine-level floor guards against a (numerically) invariant start
        # block, where the relative scale reference itself is roundoff.
        floor = MACHINE_DEFLATION * max(op_scale, scale)
        if scale <= floor:
            break
        keep = int(np.sum((s / scale >= eps) & (s > floor)))
        keep = min(keep, n - total)
        if keep == 0:
            break
        u = u[:, :keep]
        beta = s[:keep, None] * w[:, :keep].T

        if reorth != "none":
            prev = np.hstack(blocks)
            if orthogonalize_against is not None and orthogonalize_against.size:
                prev = np.hstack([orthogonalize_against, prev])
            overlap = prev.T @ u
            if reorth == "full" or np.max(np.abs(overlap)) > selective_threshold:
                u = u - prev @ overlap
                u, rr = np.linalg.qr(u)
                # pin QR signs so a tiny correction leaves the block unchanged
                sgn = np.sign(np.diag(rr))
                sgn[sgn == 0] = 1.0
                u = u * sgn
                beta = (sgn[:, None] * rr) @ beta

        blocks.append(u)
        betas.append(beta)
        total += keep

    return BlockTridiagonal(tuple(alphas), tuple(betas)), LanczosBasis(tuple(blocks))
