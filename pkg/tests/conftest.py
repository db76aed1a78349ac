import numpy as np
import pytest

from rogl.graphs import laplacian_from_edges


def random_connected_graph(n, extra_edges, seed, w_lo=0.5, w_hi=1.5):
    """Random spanning tree plus extra random edges: connected by construction."""
    rng = np.random.default_rng(seed)
    edges = []
    perm = rng.permutation(n)
    for i in range(1, n):
        j = rng.integers(0, i)
        edges.append((int(perm[i]), int(perm[j]), float(rng.uniform(w_lo, w_hi))))
    for _ in range(extra_edges):
        u, v = rng.integers(0, n, 2)
        if u != v:
            edges.append((int(u), int(v), float(rng.uniform(w_lo, w_hi))))
    return laplacian_from_edges(edges)


def modular_graph(sizes, p_in, p_out, seed, w=(0.8, 1.2)):
    """Planted-community graph: per-block ring (connectivity) + random edges."""
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = []
    for b, s in enumerate(sizes):
        base = offsets[b]
        for i in range(s):
            edges.append((base + i, base + (i + 1) % s, float(rng.uniform(*w))))
        for i in range(s):
            for j in range(i + 2, s):
                if rng.uniform() < p_in:
                    edges.append((base + i, base + j, float(rng.uniform(*w))))
    for b1 in range(len(sizes)):
        for b2 in range(b1 + 1, len(sizes)):
            mask = rng.uniform(size=(sizes[b1], sizes[b2])) < p_out
            for i, j in zip(*np.nonzero(mask)):
                edges.append((offsets[b1] + int(i), offsets[b2] + int(j),
                              float(rng.uniform(*w))))
    return laplacian_from_edges(edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
