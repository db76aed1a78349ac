"""Graph-Laplacian construction, normalization, and synthetic point clouds.

A graph-Laplacian here is a symmetric positive-semidefinite matrix with zero
row sums and nonpositive off-diagonal entries.  All construction routines
return a :class:`GraphLaplacian` whose invariants have been checked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import GraphValidationError

ROWSUM_RTOL = 1e-12


@dataclass(frozen=True)
class GraphLaplacian:
    """Sparse symmetric graph-Laplacian with bookkeeping for vertex identity.

    ``vertex_ids[i]`` is the external id of internal (0-based) vertex ``i``.
    Instances are immutable by convention; never modify ``matrix`` in place.
    """

    matrix: sp.csr_matrix
    vertex_ids: np.ndarray
    dropped_self_loops: int = 0
    removed_isolated: tuple = ()

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Diagonal entries L_ii (weighted degrees)."""
        return self.matrix.diagonal()

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def internal_index(self, external_ids) -> np.ndarray:
        """Map external vertex ids to internal 0-based indices."""
        lookup = {int(v): i for i, v in enumerate(self.vertex_ids)}
        try:
            return np.array([lookup[int(v)] for v in np.atleast_1d(external_ids)])
        except KeyError as exc:
            raise GraphValidationError(f"unknown vertex id {exc.args[0]}") from exc

    def validate(self) -> None:
        """Check symmetry, zero row sums, and off-diagonal sign structure."""
        m = self.matrix
        asym = abs(m - m.T)
        scale = max(abs(m).max(), 1.0) if m.nnz else 1.0
        if asym.nnz and asym.max() > 1e-10 * scale:
            raise GraphValidationError("Laplacian is not symmetric")
        rowsums = np.asarray(m.sum(axis=1)).ravel()
        if np.any(np.abs(rowsums) > 10 * ROWSUM_RTOL * scale):
            worst = int(np.argmax(np.abs(rowsums)))
            raise GraphValidationError(
                f"row {worst} sums to {rowsums[worst]:.3e}, expected 0"
            )
        off = m - sp.diags(m.diagonal())
        if off.nnz and off.max() > 1e-12 * scale:
            raise GraphValidationError("positive off-diagonal entry found")
        if m.diagonal().min(initial=0.0) < -1e-12 * scale:
            raise GraphValidationError("negative diagonal entry found")


@dataclass(frozen=True)
class Normalization:
    """Positive diagonal weighting used to normalize a Laplacian."""

    d: np.ndarray
    kind: str = "random_walk"

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise GraphValidationError("normalization weights must be positive finite")
        object.__setattr__(self, "d", d)

    @property
    def sqrt(self) -> np.ndarray:
        return np.sqrt(self.d)


@dataclass(frozen=True)
class TargetSubset:
    """Ordered subset of (internal, 0-based) vertex indices to preserve."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise GraphValidationError("target subset must be a nonempty 1-d index list")
        if len(set(idx.tolist())) != idx.size:
            raise GraphValidationError("target subset indices must be distinct")
        if idx.min() < 0:
            raise GraphValidationError("target subset indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.indices.size

    def check_against(self, n: int) -> None:
        if self.indices.max() >= n:
            raise GraphValidationError(
                f"target index {self.indices.max()} out of range for n={n}"
            )

    def indicator_matrix(self, n: int) -> np.ndarray:
        """Dense N x m one-hot matrix whose columns select the subset."""
        self.check_against(n)
        b = np.zeros((n, self.m))
        b[self.indices, np.arange(self.m)] = 1.0
        return b


@dataclass(frozen=True)
class PointCloud2D:
    """Planar point cloud plus the kernel width used to build its graph."""

    points: np.ndarray
    tau: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise GraphValidationError("need at least two 2-d points")
        if not np.isfinite(pts).all():
            raise GraphValidationError("point coordinates must be finite")
        if self.tau <= 0:
            raise GraphValidationError("kernel width tau must be positive")
        object.__setattr__(self, "points", pts)


def laplacian_from_edges(edges, *, drop_isolated=True) -> GraphLaplacian:
    """Build a graph-Laplacian from an edge list.

    ``edges`` is an iterable of ``(u, v)`` or ``(u, v, w)`` with external
    integer vertex ids and positive weights (default 1).  Each line is an
    undirected edge; duplicates (including reversed orientation) are merged
    by summing weights, and self-loops are dropped (and counted).
    """
    us, vs, ws = [], [], []
    mentioned = set()
    n_self = 0
    for edge in edges:
        if len(edge) == 2:
            u, v = edge
            w = 1.0
        else:
            u, v, w = edge
            w = float(w)
        if w <= 0:
            raise GraphValidationError(f"edge ({u},{v}) has nonpositive weight {w}")
        mentioned.add(int(u))
        mentioned.add(int(v))
        if u == v:
            n_self += 1
            continue
        us.append(int(u))
        vs.append(int(v))
        ws.append(w)
    if not us:
        raise GraphValidationError("edge list is empty (after self-loop removal)")

    ids = np.array(sorted(mentioned))
    remap = {int(v): i for i, v in enumerate(ids)}
    rows = np.array([remap[u] for u in us])
    cols = np.array([remap[v] for v in vs])
    n = ids.size
    w_dir = sp.coo_matrix((ws, (rows, cols)), shape=(n, n)).tocsr()
    w_sym = w_dir + w_dir.T

    removed = ()
    deg = np.asarray(w_sym.sum(axis=1)).ravel()
    isolated = np.where(deg == 0)[0]
    if isolated.size and drop_isolated:
        keep = np.setdiff1d(np.arange(n), isolated)
        removed = tuple(int(ids[i]) for i in isolated)
        w_sym = w_sym[keep][:, keep]
        ids = ids[keep]
        deg = np.asarray(w_sym.sum(axis=1)).ravel()

    lap = sp.diags(deg) - w_sym
    out = GraphLaplacian(
        lap.tocsr(), ids, dropped_self_loops=n_self, removed_isolated=removed
    )
    out.validate()
    return out


def laplacian_from_affinity(weights: np.ndarray) -> GraphLaplacian:
    """Build a Laplacian from a dense symmetric nonnegative affinity matrix."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise GraphValidationError("affinity matrix must be square")
    if np.any(w < 0):
        raise GraphValidationError("affinity weights must be nonnegative")
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    lap = np.diag(w.sum(axis=1)) - w
    out = GraphLaplacian(sp.csr_matrix(lap), np.arange(w.shape[0]))
    out.validate()
    return out


def heat_kernel_laplacian(cloud: PointCloud2D) -> GraphLaplacian:
    """Fully connected Laplacian with weights exp(-|x_i - x_j|^2 / tau^2)."""
    pts = cloud.points
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    w = np.exp(-d2 / cloud.tau**2)
    np.fill_diagonal(w, 0.0)
    return laplacian_from_affinity(w)


def two_circle_cloud(n_points=100, radius=1.0, separation=3.5, seed=0,
                     tau=0.6) -> PointCloud2D:
    """Two equally sized circular clouds of points, side by side on the x axis.

    Each cloud is a uniformly filled disc of the given radius; cloud centers
    sit at (-separation/2, 0) and (+separation/2, 0).  The first two points
    of each cloud are pinned to its two opposite extremes on the x axis (see
    :func:`two_cloud_targets`), the rest are drawn from the seeded generator.
    The first ``n_points // 2`` points belong to the left cloud.
    """
    if n_points < 8 or n_points % 2:
        raise GraphValidationError("n_points must be an even number >= 8")
    rng = np.random.default_rng(seed)
    per = n_points // 2
    pts = []
    for cx in (-separation / 2.0, separation / 2.0):
        theta = rng.uniform(0.0, 2 * np.pi, per - 2)
        rad = radius * np.sqrt(rng.uniform(0.0, 1.0, per - 2))
        fill = np.column_stack([cx + rad * np.cos(theta), rad * np.sin(theta)])
        ends = np.array([[cx - radius, 0.0], [cx + radius, 0.0]])
        pts.append(np.vstack([ends, fill]))
    return PointCloud2D(np.vstack(pts), tau=tau)


def two_cloud_targets(n_points=100) -> TargetSubset:
    """The canonical target subset for the two-cloud data: two opposite
    points per cloud (the pinned extreme points of :func:`two_circle_cloud`)."""
    per = n_points // 2
    return TargetSubset([0, 1, per, per + 1])


def random_walk_normalization(L: GraphLaplacian, *, keep_isolated=False):
    """Random-walk weights d_i = L_ii and the symmetric normalized matrix.

    Returns ``(Normalization, A)`` with ``A = D^{-1/2} L D^{-1/2}`` whose
    spectrum lies in [0, 2].  Vertices with zero degree are rejected unless
    ``keep_isolated`` assigns them unit weight.
    """
    d = L.degrees.astype(float).copy()
    zero = np.where(d <= 0)[0]
    if zero.size:
        if not keep_isolated:
            raise GraphValidationError(
                f"isolated vertex (zero diagonal) at internal index {int(zero[0])}; "
                "remove it or pass keep_isolated=True"
            )
        d[zero] = 1.0
    norm = Normalization(d, kind="random_walk")
    a = scale_symmetric(L, norm)
    return norm, a


def scale_symmetric(L: GraphLaplacian, norm: Normalization) -> sp.csr_matrix:
    """Symmetric similarity scaling D^{-1/2} L D^{-1/2} for positive diagonal D."""
    if norm.d.size != L.n:
        raise GraphValidationError("normalization length does not match graph size")
    inv_sqrt = 1.0 / norm.sqrt
    scaler = sp.diags(inv_sqrt)
    return (scaler @ L.matrix @ scaler).tocsr()


def connected_components(L: GraphLaplacian) -> np.ndarray:
    """Component label per vertex, from the nonzero off-diagonal pattern."""
    adj = abs(L.matrix - sp.diags(L.matrix.diagonal()))
    _, labels = csgraph.connected_components(adj, directed=False)
    return labels


def components_touching(labels: np.ndarray, subset: TargetSubset) -> np.ndarray:
    """Sorted labels of the components that intersect the target subset."""
    return np.unique(labels[subset.indices])


def stability_step(a_sym, tol=1e-6, max_iter=20000) -> float:
    """Largest stable time step 2 / ||A||_2, via power iteration.

    For a random-walk normalized Laplacian ``||A|| <= 2`` holds, so callers
    in that setting may simply fix the step to 1.
    """
    n = a_sym.shape[0]
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = a_sym @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise GraphValidationError("operator norm is zero (edgeless graph)")
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            lam = lam_new
            break
        lam = lam_new
    if lam <= 0:
        raise GraphValidationError("power iteration failed to find a positive norm")
    return 2.0 / lam


def load_edge_list(path) -> GraphLaplacian:
    """Read a whitespace-separated edge list file: ``u v [w]``, '#' comments."""
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 2:
                edges.append((int(parts[0]), int(parts[1])))
            elif len(parts) >= 3:
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
            else:
                raise GraphValidationError(f"bad edge line: {line!r}")
    return laplacian_from_edges(edges)


def save_edge_list(path, L: GraphLaplacian) -> None:
    """Write the weighted upper-triangle edge list of -L's off-diagonal."""
    coo = (sp.diags(L.degrees) - L.matrix).tocoo()
    with open(path, "w") as fh:
        for i, j, w in zip(coo.row, coo.col, coo.data):
            if i < j and w != 0.0:
                fh.write(f"{int(L.vertex_ids[i])} {int(L.vertex_ids[j])} {float(w)!r}\n")


def load_points(path, tau: float) -> PointCloud2D:
    """Read an ``x y`` per-line point file into a cloud with kernel width tau."""
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            x, y = line.split()[:2]
            pts.append((float(x), float(y)))
    return PointCloud2D(np.array(pts), tau=tau)


def save_points(path, cloud: PointCloud2D) -> None:
    with open(path, "w") as fh:
        for x, y in cloud.points:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
