"""Two-stage Krylov-subspace model reduction of a normalized graph-Laplacian.

Stage 1 projects the symmetric normalized Laplacian A onto the block Krylov
subspace generated by the target-subset indicator block B, giving a block
tridiagonal T1.  Stage 2 compresses further with a Krylov space of the
pseudo-inverse of T1 started from the nullspace-deflected input block, which
realizes a matrix Pade interpolation of the subset transfer function at the
origin (late diffusion times).  The reduced model reproduces the subset
transfer function

    F(p) = B^T D (I - tau D^{-1} L)^p B

with exponential accuracy in the reduced order.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NullspaceCaptureError, NullspaceMismatchWarning
from .graphs import GraphLaplacian, Normalization, TargetSubset, scale_symmetric
from .lanczos import MACHINE_DEFLATION, BlockTridiagonal, deflated_block_lanczos
from .linalg import EigenDecomposition, nullspace_basis, pinv_apply, sym_eig, thin_svd

DEFAULT_NULLSPACE_TOL = 1e-8
RITZ_MATERIALIZE_LIMIT = 10_000


@dataclass(frozen=True)
class StageOne:
    """First-stage Krylov basis and projected operator."""

    q1: np.ndarray              # N x n1 orthonormal, first m columns = B
    tri: BlockTridiagonal       # T1 = Q1^T A Q1
    subset: TargetSubset

    @property
    def n1(self) -> int:
        return self.q1.shape[1]

    @property
    def m(self) -> int:
        return self.subset.m

    @property
    def e1(self) -> np.ndarray:
        """Projected input Q1^T B: exactly the first m identity columns."""
        out = np.zeros((self.n1, self.m))
        out[: self.m, : self.m] = np.eye(self.m)
        return out

    @property
    def deflated(self) -> bool:
        return len(set(self.tri.block_sizes)) > 1 or self.tri.block_sizes[0] < self.m


@dataclass
class RomState:
    """Assembled reduced-order model.

    The stage-2 range basis spans the seed block (the nullspace-deflected
    target inputs) plus k2 pseudo-inverse Krylov levels; the seed level keeps
    the target inputs inside the span (the Laplacian-form transform needs
    them) while the inverse levels realize the interpolation at the origin.
    ``n2`` reports the inverse-level dimension (m*k2 when nothing deflates,
    the convention used in all size accounting); the actual reduced matrices
    have size ``order = seed_width + n2 + m0``.
    """

    subset: TargetSubset
    weights: Normalization
    stage1: StageOne
    basis2: np.ndarray          # n1 x order, [Q2, Z1]
    a12: np.ndarray             # order x order, block-diag(positive, 0)
    ritz_values: np.ndarray     # ascending, first m0 exactly zero
    ritz_coeffs: np.ndarray     # order x order eigenvector coordinates
    c12: np.ndarray             # order x m projected input Q12^T B
    m0: int
    seed_width: int

    @property
    def m(self) -> int:
        return self.subset.m

    @property
    def n1(self) -> int:
        return self.stage1.n1

    @property
    def n2(self) -> int:
        return self.basis2.shape[1] - self.m0 - self.seed_width

    @property
    def order(self) -> int:
        return self.basis2.shape[1]

    @property
    def d_hat(self) -> np.ndarray:
        """Subset weights diag(B^T D B)."""
        return self.weights.d[self.subset.indices]

    @cached_property
    def q12(self) -> np.ndarray:
        """Projection basis lifted to vertex space (N x order)."""
        return self.stage1.q1 @ self.basis2

    @cached_property
    def ritz_vectors(self) -> np.ndarray:
        """Ritz vectors in vertex space; materialized only at moderate N."""
        if self.stage1.q1.shape[0] > RITZ_MATERIALIZE_LIMIT:
            raise ValueError(
                "graph too large to materialize full Ritz vectors; "
                "use ritz_rows() on sampling vertices instead"
            )
        return self.q12 @ self.ritz_coeffs

    def ritz_rows(self, vertices) -> np.ndarray:
        """Rows of the Ritz-vector matrix at the given vertices."""
        rows = self.stage1.q1[np.asarray(vertices)] @ self.basis2
        return rows @ self.ritz_coeffs

    @property
    def residues(self) -> np.ndarray:
        """Transfer-function residue vectors r_j as columns of an m x order array."""
        return np.sqrt(self.d_hat)[:, None] * (self.c12.T @ self.ritz_coeffs)

    def q12_input_block(self) -> np.ndarray:
        """Weight-normalized projected input Q12^T D^{1/2} B Dhat^{-1/2}.

        Coincides with c12 when the reduction basis and the vertex weights
        are consistent; its orthonormality is checked before the third stage.
        """
        root = np.sqrt(self.d_hat)
        scaled = self.stage1.q1[self.subset.indices, :].T * root[None, :]
        return (self.basis2.T @ scaled) / root[None, :]


@dataclass(frozen=True)
class TransferSamples:
    """Subset-to-subset diffusion response at a list of discrete times."""

    p_values: tuple
    matrices: np.ndarray        # len(p) x m x m, each symmetric
    tau: float

    def __post_init__(self):
        for f in self.matrices:
            scale = max(np.abs(f).max(), 1e-300)
            if np.max(np.abs(f - f.T)) > 1e-10 * scale:
                raise ValueError("transfer sample is not symmetric")


def stage_one(a_sym, subset: TargetSubset, k1: int, eps: float,
              reorth: str = "selective") -> StageOne:
    """Project A onto the block Krylov subspace spanned from the subset block."""
    n = a_sym.shape[0]
    subset.check_against(n)
    b = subset.indicator_matrix(n)
    tri, basis = deflated_block_lanczos(lambda x: a_sym @ x, b, k1, eps, reorth=reorth)
    q1 = basis.matrix()
    s1 = StageOne(q1=q1, tri=tri, subset=subset)
    top = q1[subset.indices, : q1.shape[1]]
    # selective reorthogonalization tolerates sqrt(eps)-level drift
    if np.max(np.abs(top - s1.e1.T)) > 1e-6:
        raise AssertionError("stage-1 basis lost the identity input embedding")
    return s1


def nullspace_block(tri, tol: float = DEFAULT_NULLSPACE_TOL):
    """Orthonormal basis of the (near-)nullspace of the projected operator.

    Returns ``(Z1, m0)``.  For a sufficiently deep first stage, m0 equals the
    number of connected components intersecting the target subset.
    """
    t = tri.assemble() if isinstance(tri, BlockTridiagonal) else np.asarray(tri)
    eig = sym_eig(t)
    z1 = nullspace_basis(eig, tol)
    return z1, z1.shape[1]


def _seed_block(s1: StageOne, z1: np.ndarray, m0: int):
    """Orthonormalized nullspace-deflected input block (I - Z1 Z1^T) E1."""
    b_perp = s1.e1 - z1 @ (z1.T @ s1.e1) if m0 else s1.e1.copy()
    u, s, _ = thin_svd(b_perp)
    rank = int(np.sum(s > MACHINE_DEFLATION * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        raise NullspaceCaptureError(
            "target subset block lies entirely in the captured nullspace"
        )
    return u[:, :rank]


def stage_two(s1: StageOne, z1: np.ndarray, m0: int, k2: int, eps: float,
              reorth: str = "full", nullspace_tol: float = DEFAULT_NULLSPACE_TOL):
    """Pseudo-inverse Krylov compression seeded by the deflected input block.

    Builds an orthonormal basis of span{B_perp, T1^+ B_perp, ...,
    (T1^+)^{k2} B_perp}, all orthogonal to the nullspace basis Z1 (re-projected
    at every application).  The k2 inverse levels realize the interpolation
    of the transfer function at the origin, matching its first 2*k2 moments;
    the seed level keeps the target inputs inside the span, which the later
    transform to Laplacian form requires.  Returns ``(Q2, n2)`` where n2
    counts the inverse-level dimensions (m*k2 when nothing deflates).
    """
    if k2 < 1:
        raise ValueError("k2 must be at least 1")
    t1 = s1.tri.assemble()
    eig1 = sym_eig(t1)

    def drop_null(x):
        return x - z1 @ (z1.T @ x) if m0 else x

    start = _seed_block(s1, z1, m0)

    def op(x):
        return drop_null(pinv_apply(eig1, drop_null(x), nullspace_tol))

    _, basis = deflated_block_lanczos(op, start, k2 + 1, eps, reorth=reorth,
                                      orthogonalize_against=z1 if m0 else None)
    q2 = basis.matrix()
    return q2, q2.shape[1] - start.shape[1]


def assemble_rom(s1: StageOne, z1: np.ndarray, q2: np.ndarray,
                 weights: Normalization) -> RomState:
    """Combine the stage-2 range basis with the nullspace block into the ROM.

    The nullspace coupling is set to exact zero (the interpolation conditions
    require the zero eigenvalue to be matched exactly), so the reduced matrix
    is block diagonal with exactly m0 zero Ritz values.
    """
    m0 = z1.shape[1]
    n_range = q2.shape[1]
    order = n_range + m0
    seed_width = _seed_block(s1, z1, m0).shape[1]
    t1 = s1.tri.assemble()
    basis2 = np.hstack([q2, z1]) if m0 else q2.copy()

    m22 = q2.T @ t1 @ q2
    m22 = 0.5 * (m22 + m22.T)
    a12 = np.zeros((order, order))
    a12[:n_range, :n_range] = m22

    eig22 = sym_eig(m22)
    values = np.concatenate([np.zeros(m0), eig22.values])
    coeffs = np.zeros((order, order))
    for i in range(m0):
        coeffs[n_range + i, i] = 1.0
    coeffs[:n_range, m0:] = eig22.vectors

    c12 = basis2[: s1.m, :].T
    return RomState(
        subset=s1.subset,
        weights=weights,
        stage1=s1,
        basis2=basis2,
        a12=a12,
        ritz_values=values,
        ritz_coeffs=coeffs,
        c12=c12,
        m0=m0,
        seed_width=seed_width,
    )


def build_rom(a_sym, weights: Normalization, subset: TargetSubset, k1: int,
              k2: int, eps: float, reorth_stage1: str = "selective",
              nullspace_tol: float = DEFAULT_NULLSPACE_TOL,
              expected_m0: int | None = None) -> RomState:
    """Run both reduction stages and assemble the reduced model."""
    s1 = stage_one(a_sym, subset, k1, eps, reorth=reorth_stage1)
    z1, m0 = nullspace_block(s1.tri, nullspace_tol)
    if expected_m0 is not None and m0 != expected_m0:
        warnings.warn(
            f"captured nullspace multiplicity {m0} != component count "
            f"{expected_m0}; k1 is likely too small",
            NullspaceMismatchWarning,
        )
    q2, _ = stage_two(s1, z1, m0, k2, eps, nullspace_tol=nullspace_tol)
    return assemble_rom(s1, z1, q2, weights)


def transfer_full(L: GraphLaplacian, weights: Normalization, subset: TargetSubset,
                  tau: float, p_values) -> TransferSamples:
    """Exact transfer samples by repeated sparse application (never powers)."""
    subset.check_against(L.n)
    a = scale_symmetric(L, weights)
    gersh = float(np.max(np.asarray(abs(a).sum(axis=1))))
    if tau * 0.5 * gersh > 1.0:
        from .graphs import stability_step

        if tau > stability_step(a) * (1 + 1e-9):
            warnings.warn(
                f"time step {tau} exceeds the stability bound; powers may grow",
                RuntimeWarning,
            )
    ps = sorted(int(p) for p in p_values)
    if ps and ps[0] < 0:
        raise ValueError("discrete times must be nonnegative")
    x0 = np.zeros((L.n, subset.m))
    x0[subset.indices, np.arange(subset.m)] = weights.sqrt[subset.indices]
    mats = []
    x = x0.copy()
    step = 0
    for p in ps:
        while step < p:
            x = x - tau * (a @ x)
            step += 1
        f = x0.T @ x
        mats.append(0.5 * (f + f.T))
    return TransferSamples(tuple(ps), np.array(mats), tau)


def transfer_rom(rom: RomState, d_hat, tau: float, p_values) -> TransferSamples:
    """Reduced transfer samples from the Ritz expansion."""
    ps = sorted(int(p) for p in p_values)
    r = np.sqrt(np.asarray(d_hat))[:, None] * (rom.c12.T @ rom.ritz_coeffs)
    decay = 1.0 - tau * rom.ritz_values
    mats = []
    for p in ps:
        f = (r * decay**p) @ r.T
        mats.append(0.5 * (f + f.T))
    return TransferSamples(tuple(ps), np.array(mats), tau)


def laplace_transfer_full(eig: EigenDecomposition, weights: Normalization,
                          subset: TargetSubset, lam: float,
                          null_tol: float = 1e-10) -> np.ndarray:
    """Resolvent transfer sum r_j r_j^T / (lam - lambda_j) from dense eigenpairs."""
    r = weights.sqrt[subset.indices][:, None] * eig.vectors[subset.indices, :]
    return (r / (lam - eig.values)) @ r.T


def laplace_transfer_rom(rom: RomState, lam: float) -> np.ndarray:
    """Reduced resolvent transfer sum at a complex/real frequency lam != poles."""
    r = rom.residues
    return (r / (lam - rom.ritz_values)) @ r.T


def save_rom(path, rom: RomState) -> None:
    """Serialize the reduced model to a versioned npz container.

    Stores everything clustering needs (stage-1 basis rows, the combined
    stage-2 basis, Ritz data, weights) so downstream steps can run without
    re-projection.
    """
    tri = rom.stage1.tri
    payload = {
        "format_version": np.array([1]),
        "subset": rom.subset.indices,
        "weights_d": rom.weights.d,
        "weights_kind": np.array([rom.weights.kind]),
        "q1": rom.stage1.q1,
        "basis2": rom.basis2,
        "a12": rom.a12,
        "ritz_values": rom.ritz_values,
        "ritz_coeffs": rom.ritz_coeffs,
        "c12": rom.c12,
        "m0": np.array([rom.m0]),
        "seed_width": np.array([rom.seed_width]),
        "n_alphas": np.array([len(tri.alphas)]),
    }
    for i, a in enumerate(tri.alphas):
        payload[f"t1_alpha_{i}"] = a
    for i, b in enumerate(tri.betas):
        payload[f"t1_beta_{i}"] = b
    np.savez(path, **payload)


def load_rom(path) -> RomState:
    with np.load(path, allow_pickle=False) as data:
        if int(data["format_version"][0]) != 1:
            raise ValueError("unsupported reduced-model container version")
        n_alphas = int(data["n_alphas"][0])
        tri = BlockTridiagonal(
            tuple(data[f"t1_alpha_{i}"] for i in range(n_alphas)),
            tuple(data[f"t1_beta_{i}"] for i in range(n_alphas - 1)),
        )
        subset = TargetSubset(data["subset"])
        weights = Normalization(data["weights_d"], kind=str(data["weights_kind"][0]))
        s1 = StageOne(q1=data["q1"], tri=tri, subset=subset)
        return RomState(
            subset=subset,
            weights=weights,
            stage1=s1,
            basis2=data["basis2"],
            a12=data["a12"],
            ritz_values=data["ritz_values"],
            ritz_coeffs=data["ritz_coeffs"],
            c12=data["c12"],
            m0=int(data["m0"][0]),
            seed_width=int(data["seed_width"][0]),
        )


def moment_errors(rom: RomState, a_dense, n_moments: int,
                  null_tol: float = DEFAULT_NULLSPACE_TOL) -> np.ndarray:
    """Relative mismatch of the first transfer-function moments at the origin.

    Moment i compares sum_j r_j r_j^T / lambda_j^{i+1} over the positive
    spectrum between the full operator (dense eigendecomposition, an
    independent oracle path) and the reduced model.  Returns one relative
    error per i = 0..n_moments-1.
    """
    eig = sym_eig(np.asarray(a_dense))
    keep = eig.values > null_tol * eig.max_abs
    sqrt_d = rom.weights.sqrt[rom.subset.indices]
    r_full = (sqrt_d[:, None] * eig.vectors[rom.subset.indices][:, keep])
    lam_full = eig.values[keep]

    r_rom = rom.residues[:, rom.m0 :]
    lam_rom = rom.ritz_values[rom.m0 :]

    errs = []
    for i in range(n_moments):
        m_full = (r_full / lam_full ** (i + 1)) @ r_full.T
        m_rom = (r_rom / lam_rom ** (i + 1)) @ r_rom.T
        scale = max(np.abs(m_full).max(), 1e-300)
        errs.append(np.abs(m_full - m_rom).max() / scale)
    return np.array(errs)
