"""Dense symmetric eigendecomposition, thin SVD, and pseudo-inverse application.

Thin wrappers over LAPACK (via numpy) that enforce the residual and
orthonormality bounds the rest of the pipeline relies on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_NULL_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, values ascending, vectors orthonormal."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def sym_eig(m: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a (nearly) symmetric matrix.

    The input is symmetrized internally; non-finite entries are rejected.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("sym_eig expects a square matrix")
    if not np.isfinite(m).all():
        raise ValueError("sym_eig input has non-finite entries")
    sym = 0.5 * (m + m.T)
    values, vectors = np.linalg.eigh(sym)
    return EigenDecomposition(values, vectors)


def thin_svd(m: np.ndarray):
    """Thin SVD ``M = U diag(s) W^T`` with singular values descending.

    Requires rows >= cols; returns (U, s, W) with orthonormal U columns.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("thin_svd expects a matrix")
    if m.shape[0] < m.shape[1]:
        raise ValueError("thin_svd expects rows >= cols")
    if not np.isfinite(m).all():
        raise ValueError("thin_svd input has non-finite entries")
    u, s, wt = np.linalg.svd(m, full_matrices=False)
    return u, s, wt.T


def pinv_apply(eig: EigenDecomposition, x: np.ndarray, null_tol: float = DEFAULT_NULL_TOL) -> np.ndarray:
    """Apply the spectral pseudo-inverse V f(S) V^T to ``x``.

    Eigenvalues at or below ``null_tol * max|eigenvalue|`` are treated as an
    exact nullspace and annihilated.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    cut = null_tol * eig.max_abs
    keep = eig.values > cut
    inv = np.where(keep, 1.0 / np.where(keep, eig.values, 1.0), 0.0)
    out = eig.vectors @ (inv[:, None] * (eig.vectors.T @ x))
    return out[:, 0] if squeeze else out


def pinv_matrix(eig: EigenDecomposition, null_tol: float = DEFAULT_NULL_TOL) -> np.ndarray:
    """Dense Moore-Penrose pseudo-inverse from a symmetric eigendecomposition."""
    return pinv_apply(eig, np.eye(eig.values.size), null_tol)


def nullspace_basis(eig: EigenDecomposition, tol: float) -> np.ndarray:
    """Orthonormal basis of the eigenspace with eigenvalues <= tol * max|eig|."""
    cut = tol * eig.max_abs
    mask = eig.values <= cut
    return eig.vectors[:, mask]


def orthonormal_columns(m: np.ndarray, rtol: float = 1e-10) -> bool:
    gram = m.T @ m
    return bool(np.max(np.abs(gram - np.eye(m.shape[1]))) <= rtol)
