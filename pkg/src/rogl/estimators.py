"""Scikit-learn style estimators wrapping the reduction and clustering ops.

All estimators accept a graph-Laplacian as ``X`` in ``fit``: a
:class:`~rogl.graphs.GraphLaplacian`, a scipy sparse matrix, or a dense
array (validated for Laplacian structure).  Target subsets are constructor
parameters, mirroring how sklearn's clusterers carry ``n_clusters``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from .clustering import roglc, rvsc, rwnsc_full
from .graphs import (
    GraphLaplacian,
    TargetSubset,
    connected_components,
    components_touching,
    random_walk_normalization,
)
from .reduced import build_rogl
from .rom import build_rom


def as_laplacian(x) -> GraphLaplacian:
    """Validate and coerce input into a GraphLaplacian."""
    if isinstance(x, GraphLaplacian):
        return x
    mat = sp.csr_matrix(x) if not sp.issparse(x) else x.tocsr()
    out = GraphLaplacian(mat.astype(float), np.arange(mat.shape[0]))
    out.validate()
    return out


class GraphReducer(BaseEstimator):
    """Compress a graph-Laplacian around a target vertex subset.

    ``fit`` runs the two reduction stages plus the Laplacian-form transform;
    ``transform`` returns the reduced Laplacian matrix.  Fitted attributes:
    ``rom_`` (reduced model), ``rogl_`` (reduced-order graph-Laplacian),
    ``weights_`` (random-walk normalization).
    """

    def __init__(self, targets=None, k1=20, k2=4, eps=1e-8,
                 nullspace_tol=1e-8, reorth_stage1="selective"):
        self.targets = targets
        self.k1 = k1
        self.k2 = k2
        self.eps = eps
        self.nullspace_tol = nullspace_tol
        self.reorth_stage1 = reorth_stage1

    def fit(self, X, y=None):
        L = as_laplacian(X)
        if self.targets is None:
            raise ValueError("targets must be set before fitting")
        subset = TargetSubset(np.asarray(self.targets))
        subset.check_against(L.n)
        weights, a = random_walk_normalization(L)
        expected = len(components_touching(connected_components(L), subset))
        self.rom_ = build_rom(
            a, weights, subset, self.k1, self.k2, self.eps,
            reorth_stage1=self.reorth_stage1,
            nullspace_tol=self.nullspace_tol,
            expected_m0=expected,
        )
        self.rogl_ = build_rogl(self.rom_)
        self.weights_ = weights
        self.graph_ = L
        return self

    def transform(self, X=None):
        if not hasattr(self, "rogl_"):
            raise NotFittedError("GraphReducer is not fitted")
        return self.rogl_.l_tilde

    def fit_transform(self, X, y=None):
        return self.fit(X).transform()


class FullSpectralClustering(BaseEstimator, ClusterMixin):
    """Reference full-graph spectral clustering (random-walk embedding).

    Fitted attribute ``labels_`` has one entry per graph vertex.
    """

    def __init__(self, n_clusters=2, embed_dim=None, seed=0, restarts=8,
                 component_warm_start=False):
        self.n_clusters = n_clusters
        self.embed_dim = embed_dim
        self.seed = seed
        self.restarts = restarts
        self.component_warm_start = component_warm_start

    def fit(self, X, y=None):
        L = as_laplacian(X)
        weights, a = random_walk_normalization(L)
        dim = self.embed_dim if self.embed_dim is not None else self.n_clusters
        warm = connected_components(L) if self.component_warm_start else None
        self.assignment_ = rwnsc_full(
            a, weights, self.n_clusters, dim, seed=self.seed,
            restarts=self.restarts, warm_components=warm,
        )
        self.labels_ = self.assignment_.labels
        return self


class RitzSamplingClustering(BaseEstimator, ClusterMixin):
    """Target-subset clustering by sampling reduced-model Ritz vectors.

    ``labels_`` has one entry per target vertex (in target order).
    """

    def __init__(self, targets=None, n_clusters=2, embed_dim=2, k1=20, k2=4,
                 eps=1e-8, n_samples=None, seed=0, restarts=8):
        self.targets = targets
        self.n_clusters = n_clusters
        self.embed_dim = embed_dim
        self.k1 = k1
        self.k2 = k2
        self.eps = eps
        self.n_samples = n_samples
        self.seed = seed
        self.restarts = restarts

    def fit(self, X, y=None):
        reducer = GraphReducer(targets=self.targets, k1=self.k1, k2=self.k2,
                               eps=self.eps).fit(X)
        self.rom_ = reducer.rom_
        result = rvsc(reducer.graph_, self.rom_, self.n_clusters,
                      self.embed_dim, seed=self.seed,
                      n_samples=self.n_samples, restarts=self.restarts)
        self.result_ = result
        self.labels_ = result.target_labels
        return self


class ReducedLaplacianClustering(BaseEstimator, ClusterMixin):
    """Target-subset clustering on the reduced-order graph-Laplacian.

    Sweeps auxiliary cluster counts and picks the most stable plateau.
    ``labels_`` has one entry per target vertex; ``n_t_star_``/``n_g_star_``
    expose the plateau choice.
    """

    def __init__(self, targets=None, n_clusters=2, embed_dim=2, k1=20, k2=4,
                 eps=1e-8, trial_grid=None, seed=0, restarts=8):
        self.targets = targets
        self.n_clusters = n_clusters
        self.embed_dim = embed_dim
        self.k1 = k1
        self.k2 = k2
        self.eps = eps
        self.trial_grid = trial_grid
        self.seed = seed
        self.restarts = restarts

    def fit(self, X, y=None):
        reducer = GraphReducer(targets=self.targets, k1=self.k1, k2=self.k2,
                               eps=self.eps).fit(X)
        self.rom_ = reducer.rom_
        self.rogl_ = reducer.rogl_
        result = roglc(self.rogl_, self.n_clusters, self.embed_dim,
                       trial_grid=self.trial_grid, seed=self.seed,
                       restarts=self.restarts)
        self.result_ = result
        self.labels_ = result.target_labels
        self.n_t_star_ = result.n_t_star
        self.n_g_star_ = result.n_g_star
        return self
