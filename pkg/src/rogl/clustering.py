"""Clustering front end: k-means++, full-graph spectral reference, and the
two reduced-model subset clustering algorithms.

``rvsc`` samples Ritz vectors of the reduced model at the target subset plus
randomly drawn auxiliary vertices and clusters the sample matrix.  ``roglc``
clusters the reduced-order graph-Laplacian itself, sweeping the number of
auxiliary clusters and picking the most stable plateau.  Both intersect the
resulting clusters with the target subset, which keeps the partition
consistent with full-graph spectral clustering.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graphs import GraphLaplacian, Normalization, TargetSubset, connected_components
from .linalg import sym_eig
from .reduced import Rogl
from .rom import RomState
from .seeds import substream, substream_seed

DEFAULT_RESTARTS = 8
DEFAULT_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterAssignment:
    """Labels plus the bookkeeping needed to audit a k-means run."""

    labels: np.ndarray
    n_clusters: int
    inertia: float
    seed: int
    n_iter: int
    inertia_history: tuple

    @property
    def occupied(self) -> int:
        return len(set(self.labels.tolist()))


def _plus_plus_seeding(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(x, centers, max_iter):
    n, k = x.shape[0], centers.shape[0]
    labels = np.full(n, -1)
    history = []
    for it in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # repopulate empty clusters with the farthest points
        for j in range(k):
            if not np.any(new_labels == j):
                far = d2[np.arange(n), new_labels].argmax()
                new_labels[far] = j
                d2[far, :] = np.inf
                d2[far, j] = 0.0
        inertia = float(d2[np.arange(n), new_labels].sum())
        history.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = x[labels == j].mean(axis=0)
    return labels, history


def kmeans_pp(points, k, seed=0, max_iter=DEFAULT_MAX_ITER,
              restarts=DEFAULT_RESTARTS) -> ClusterAssignment:
    """k-means++ seeding followed by Lloyd iterations, best inertia over restarts.

    Deterministic for a fixed seed: each restart draws from its own named
    substream of the seed.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-d array")
    if not (1 <= k <= x.shape[0]):
        raise ValueError(f"k={k} invalid for {x.shape[0]} points")
    best = None
    for r in range(restarts):
        rng = substream(seed, f"kmeans-restart-{r}")
        centers = _plus_plus_seeding(x, k, rng)
        labels, history = _lloyd(x, centers.copy(), max_iter)
        if best is None or history[-1] < best.inertia:
            best = ClusterAssignment(
                labels=labels,
                n_clusters=k,
                inertia=history[-1],
                seed=seed,
                n_iter=len(history),
                inertia_history=tuple(history),
            )
    return best


def spectral_embedding(a_sym, weights: Normalization, dim: int) -> np.ndarray:
    """Rows are vertices embedded by the lowest eigenvectors of D^{-1} L.

    Computed from the symmetric form and unscaled by D^{1/2}; rows are not
    renormalized (random-walk variant).
    """
    a = a_sym.toarray() if hasattr(a_sym, "toarray") else np.asarray(a_sym)
    eig = sym_eig(a)
    return eig.vectors[:, :dim] / weights.sqrt[:, None]


def rwnsc_full(a_sym, weights: Normalization, n_clusters: int, embed_dim: int,
               seed: int = 0, restarts: int = DEFAULT_RESTARTS,
               warm_components: np.ndarray | None = None) -> ClusterAssignment:
    """Reference full-graph spectral clustering on the random-walk embedding.

    ``warm_components`` optionally forces the k-means++ seeding to start with
    one center per known connected component, which keeps components from
    being merged when n_clusters is large.
    """
    emb = spectral_embedding(a_sym, weights, embed_dim)
    if warm_components is None:
        return kmeans_pp(emb, n_clusters, seed=seed, restarts=restarts)

    comps, counts = np.unique(warm_components, return_counts=True)
    picks = []
    for c in comps[np.argsort(-counts)][:n_clusters]:
        members = np.where(warm_components == c)[0]
        picks.append(members[0])
    best = None
    for r in range(restarts):
        rng = substream(seed, f"rwnsc-restart-{r}")
        centers = np.empty((n_clusters, emb.shape[1]))
        centers[: len(picks)] = emb[picks]
        if len(picks) < n_clusters:
            d2 = ((emb[:, None, :] - centers[None, : len(picks), :]) ** 2).sum(2).min(1)
            for j in range(len(picks), n_clusters):
                total = d2.sum()
                idx = rng.choice(len(emb), p=d2 / total) if total > 0 else rng.integers(len(emb))
                centers[j] = emb[idx]
                d2 = np.minimum(d2, ((emb - centers[j]) ** 2).sum(axis=1))
        labels, history = _lloyd(emb, centers.copy(), DEFAULT_MAX_ITER)
        if best is None or history[-1] < best.inertia:
            best = ClusterAssignment(labels, n_clusters, history[-1], seed,
                                     len(history), tuple(history))
    return best


def sample_vertices(L: GraphLaplacian, subset: TargetSubset, n_samples: int,
                    seed: int = 0) -> np.ndarray:
    """Target subset first, then uniform draws from the reachable components."""
    if n_samples < subset.m:
        raise ValueError("need at least as many samples as target vertices")
    labels = connected_components(L)
    reachable = np.isin(labels, np.unique(labels[subset.indices]))
    pool = np.setdiff1d(np.where(reachable)[0], subset.indices)
    extra = n_samples - subset.m
    if extra > pool.size:
        warnings.warn(
            f"requested {n_samples} samples but only {pool.size + subset.m} "
            "vertices are reachable from the target subset; clamping",
        )
        extra = pool.size
    rng = substream(seed, "vertex-sampling")
    drawn = rng.choice(pool, size=extra, replace=False) if extra else np.empty(0, int)
    return np.concatenate([subset.indices, np.sort(drawn)])


@dataclass(frozen=True)
class SubsetClusters:
    """Partition of the target subset produced by a reduced-model algorithm."""

    target_labels: np.ndarray     # one label per target vertex, dense 0..k-1
    sample_vertices: np.ndarray
    assignment: ClusterAssignment

    @property
    def n_found(self) -> int:
        return len(set(self.target_labels.tolist()))


def _densify_labels(raw_labels):
    order = {}
    out = np.empty(len(raw_labels), dtype=int)
    for i, lab in enumerate(raw_labels):
        out[i] = order.setdefault(int(lab), len(order))
    return out


def rvsc(L: GraphLaplacian, rom: RomState, n_clusters: int, embed_dim: int,
         seed: int = 0, n_samples: int | None = None,
         restarts: int = DEFAULT_RESTARTS) -> SubsetClusters:
    """Ritz-vector sampling clustering of the target subset.

    Builds the sample matrix H[j, k] = (Ritz vector k)[sample vertex j] for
    the ``embed_dim`` lowest Ritz pairs, clusters the samples, and intersects
    the clusters with the target subset (the first m samples).
    """
    if embed_dim > rom.order:
        raise ValueError(f"embedding dimension {embed_dim} exceeds order {rom.order}")
    if n_samples is None:
        n_samples = rom.order
    q = sample_vertices(L, rom.subset, n_samples, seed=seed)
    h = rom.ritz_rows(q)[:, :embed_dim]
    assignment = kmeans_pp(h, n_clusters, seed=substream_seed(seed, "rvsc-kmeans"),
                           restarts=restarts)
    target = _densify_labels(assignment.labels[: rom.subset.m])
    return SubsetClusters(target, q, assignment)


@dataclass(frozen=True)
class PlateauResult:
    """Chosen plateau of the auxiliary-cluster sweep."""

    n_t_star: int
    n_g_star: int
    plateau: tuple                # n_t values of the chosen plateau
    table: tuple                  # ((n_t, n_g), ...) over the full grid


def plateau_search(counts, n_clusters: int) -> PlateauResult:
    """Pick the auxiliary-cluster count from the plateaus of n_g(n_t).

    ``counts`` maps trial n_t -> observed n_g (need not be monotone).  Among
    maximal runs of constant n_g, the plateau whose n_g is closest to the
    requested cluster count wins; ties prefer smaller n_g, then longer
    plateaus.  The returned n_t is the plateau midpoint (lower median).
    """
    if not counts:
        raise ValueError("empty trial grid")
    items = sorted((int(nt), int(ng)) for nt, ng in dict(counts).items())
    plateaus = []
    run = [items[0]]
    for nt, ng in items[1:]:
        if ng == run[-1][1]:
            run.append((nt, ng))
        else:
            plateaus.append(run)
            run = [(nt, ng)]
    plateaus.append(run)

    def score(run):
        ng = run[0][1]
        return (abs(ng - n_clusters), ng, -len(run))

    best = min(plateaus, key=score)
    mid = best[(len(best) - 1) // 2][0]
    return PlateauResult(mid, best[0][1], tuple(nt for nt, _ in best), tuple(items))


def default_trial_grid(n_clusters: int, order: int, m: int) -> range:
    """Trial n_t values bracketing the observed auxiliary/target ratios."""
    upper = min(4 * n_clusters * int(np.ceil(order / m)), order - 1)
    return range(n_clusters, max(upper, n_clusters) + 1)


@dataclass(frozen=True)
class RoglcResult:
    """Outcome of reduced-Laplacian clustering."""

    target_labels: np.ndarray
    plateau: PlateauResult
    assignment: ClusterAssignment     # clustering at the chosen n_t

    @property
    def n_g_star(self) -> int:
        return self.plateau.n_g_star

    @property
    def n_t_star(self) -> int:
        return self.plateau.n_t_star


def roglc(rogl: Rogl, n_clusters: int, embed_dim: int, trial_grid=None,
          seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> RoglcResult:
    """Cluster the reduced-order graph-Laplacian and intersect with the target.

    For each trial auxiliary-cluster count the reduced vertices are clustered
    on the spectral embedding of the reduced normalized Laplacian; n_g counts
    the clusters that touch the target block.  The plateau search picks the
    stable n_t; the clusters at that n_t restricted to the target block are
    returned.
    """
    eig = sym_eig(rogl.a_tilde)
    emb = eig.vectors[:, :embed_dim] / rogl.z0[:, None]
    if trial_grid is None:
        trial_grid = default_trial_grid(n_clusters, rogl.order, rogl.m)
    trial_grid = [int(t) for t in trial_grid]
    if not trial_grid:
        raise ValueError("empty trial grid")

    counts = {}
    assignments = {}
    for nt in trial_grid:
        if nt > rogl.order:
            continue
        a = kmeans_pp(emb, nt, seed=substream_seed(seed, f"roglc-nt-{nt}"),
                      restarts=restarts)
        assignments[nt] = a
        counts[nt] = len(set(a.labels[: rogl.m].tolist()))
    plateau = plateau_search(counts, n_clusters)
    chosen = assignments[plateau.n_t_star]
    target = _densify_labels(chosen.labels[: rogl.m])
    return RoglcResult(target, plateau, chosen)


def partitions_equal(labels_a, labels_b) -> bool:
    """True when two labelings induce the same partition (up to relabeling)."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        return False
    groups_a = {tuple(np.where(a == lab)[0]) for lab in set(a.tolist())}
    groups_b = {tuple(np.where(b == lab)[0]) for lab in set(b.tolist())}
    return groups_a == groups_b


def recovered_groups(target_labels, truth_labels) -> int:
    """Count ground-truth groups reproduced exactly as (parts of) clusters.

    A group counts as recovered when all its members share one cluster and
    that cluster contains no members of other groups.
    """
    target_labels = np.asarray(target_labels)
    truth_labels = np.asarray(truth_labels)
    count = 0
    for g in set(truth_labels.tolist()):
        members = np.where(truth_labels == g)[0]
        labs = set(target_labels[members].tolist())
        if len(labs) != 1:
            continue
        lab = labs.pop()
        if np.array_equal(np.sort(np.where(target_labels == lab)[0]), members):
            count += 1
    return count
