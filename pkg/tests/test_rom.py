import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_connected_graph
from rogl.errors import NullspaceMismatchWarning
from rogl.graphs import (
    GraphLaplacian,
    Normalization,
    TargetSubset,
    heat_kernel_laplacian,
    laplacian_from_edges,
    random_walk_normalization,
    scale_symmetric,
    two_circle_cloud,
    two_cloud_targets,
)
from rogl.linalg import sym_eig
from rogl.rom import (
    assemble_rom,
    build_rom,
    load_rom,
    moment_errors,
    nullspace_block,
    save_rom,
    stage_one,
    stage_two,
    transfer_full,
    transfer_rom,
)


def flagship():
    cloud = two_circle_cloud(seed=0)
    L = heat_kernel_laplacian(cloud)
    weights, a = random_walk_normalization(L)
    return L, weights, a, two_cloud_targets()


class TestStageOne:
    def test_flagship_dimensions(self):
        # benchmark run: 4 targets, 20 steps, no deflation
        _, _, a, sub = flagship()
        s1 = stage_one(a, sub, k1=20, eps=1e-8)
        assert s1.n1 == 80
        assert not s1.deflated
        assert s1.tri.block_sizes == (4,) * 20

    def test_large_subset_no_deflation(self):
        # 84 targets, 10 steps on a big random graph
        L = random_connected_graph(900, 4500, seed=2)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(np.arange(0, 840, 10))
        s1 = stage_one(a, sub, k1=10, eps=1e-8)
        assert s1.n1 == 840

    def test_krylov_confined_to_component(self):
        edges = [(0, 1), (1, 2)] + [(i, i + 1) for i in range(10, 30)]
        L = laplacian_from_edges(edges)
        _, a = random_walk_normalization(L)
        sub = TargetSubset(L.internal_index([1]))
        s1 = stage_one(a, sub, k1=10, eps=1e-10)
        assert s1.n1 <= 3
        # basis supported only on the 3-vertex component
        outside = np.setdiff1d(np.arange(L.n), L.internal_index([0, 1, 2]))
        assert np.abs(s1.q1[outside, :]).max() < 1e-12

    def test_projection_identity(self):
        L = random_connected_graph(40, 80, seed=3)
        _, a = random_walk_normalization(L)
        sub = TargetSubset([0, 7])
        s1 = stage_one(a, sub, k1=5, eps=1e-10, reorth="full")
        t = s1.tri.assemble()
        oracle = s1.q1.T @ (a @ s1.q1)
        assert np.abs(t - oracle).max() < 1e-9


class TestNullspaceBlock:
    def test_connected_graph(self):
        L = random_connected_graph(30, 60, seed=4)
        _, a = random_walk_normalization(L)
        s1 = stage_one(a, TargetSubset([0, 5]), k1=15, eps=1e-10, reorth="full")
        _, m0 = nullspace_block(s1.tri)
        assert m0 == 1

    def test_two_components(self):
        edges = [(0, 1), (1, 2), (0, 2), (10, 11), (11, 12)]
        L = laplacian_from_edges(edges)
        _, a = random_walk_normalization(L)
        sub = TargetSubset(L.internal_index([0, 11]))
        s1 = stage_one(a, sub, k1=3, eps=1e-10, reorth="full")
        _, m0 = nullspace_block(s1.tri)
        assert m0 == 2

    def test_five_of_seven_components(self):
        # Oracle: count components intersecting the subset by construction.
        edges = []
        for c in range(7):
            base = 10 * c
            edges += [(base, base + 1), (base + 1, base + 2), (base, base + 2)]
        L = laplacian_from_edges(edges)
        _, a = random_walk_normalization(L)
        sub = TargetSubset(L.internal_index([0, 10, 20, 30, 40]))
        s1 = stage_one(a, sub, k1=3, eps=1e-10, reorth="full")
        _, m0 = nullspace_block(s1.tri)
        assert m0 == 5

    def test_mismatch_warns(self):
        L = random_connected_graph(80, 240, seed=5)
        weights, a = random_walk_normalization(L)
        with pytest.warns(NullspaceMismatchWarning):
            build_rom(a, weights, TargetSubset([0]), k1=3, k2=1, eps=1e-8,
                      expected_m0=1)


class TestStageTwo:
    def test_flagship_n2(self):
        _, weights, a, sub = flagship()
        rom = build_rom(a, weights, sub, k1=20, k2=4, eps=1e-8)
        assert rom.n2 == 16
        assert rom.seed_width == 4
        assert rom.order == 16 + 4 + 1
        assert rom.m0 == 1

    def test_large_subset_n2(self):
        L = random_connected_graph(900, 4500, seed=2)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(np.arange(0, 840, 10))
        rom = build_rom(a, weights, sub, k1=10, k2=3, eps=1e-8)
        assert rom.n2 == 252

    def test_small_component_deflates_strictly(self):
        edges = [(i, (i + 3) % 40) for i in range(40)] + [(i, i + 1) for i in range(39)]
        edges += [(100, 101), (101, 102)]
        L = laplacian_from_edges(edges)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(L.internal_index([0, 101]))
        k1, k2 = 50, 3
        rom = build_rom(a, weights, sub, k1=k1, k2=k2, eps=1e-8,
                        reorth_stage1="full", expected_m0=2)
        assert rom.n1 < 2 * k1
        assert rom.n2 < 2 * k2
        assert rom.m0 == 2


class TestAssembleRom:
    def test_full_space_projection_is_exact(self):
        L = random_connected_graph(12, 30, seed=6)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(np.arange(12))  # B = I
        rom = build_rom(a, weights, sub, k1=1, k2=2, eps=1e-10,
                        reorth_stage1="full")
        assert rom.order == 12
        q12 = rom.q12
        assert np.abs(q12.T @ q12 - np.eye(12)).max() < 1e-8
        tf = transfer_full(L, weights, sub, 1.0, [0, 3, 9])
        tr = transfer_rom(rom, rom.d_hat, 1.0, [0, 3, 9])
        assert np.abs(tf.matrices - tr.matrices).max() < 1e-9

    def test_two_state_toy_exact(self):
        # Oracle: closed-form 2x2; the Krylov space exhausts the whole space.
        L = laplacian_from_edges([(0, 1, 1.0)])
        d = Normalization(np.array([1.0, 2.0]), kind="custom")
        a_mat = scale_symmetric(L, d)
        sub = TargetSubset([0])
        rom = build_rom(sp.csr_matrix(a_mat), d, sub, k1=2, k2=2, eps=1e-12,
                        reorth_stage1="full")
        assert rom.order == 2
        tf = transfer_full(L, d, sub, 0.5, [1, 2, 5])
        tr = transfer_rom(rom, rom.d_hat, 0.5, [1, 2, 5])
        assert np.abs(tf.matrices - tr.matrices).max() < 1e-12

    def test_exactly_m0_zero_ritz_values(self):
        edges = [(0, 1), (1, 2), (0, 2), (10, 11), (11, 12), (12, 13)]
        L = laplacian_from_edges(edges)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(L.internal_index([0, 11]))
        rom = build_rom(a, weights, sub, k1=4, k2=2, eps=1e-10,
                        reorth_stage1="full")
        assert rom.m0 == 2
        assert np.all(rom.ritz_values[:2] == 0.0)
        assert np.all(rom.ritz_values[2:] > 1e-8)

    def test_ritz_values_interlace(self):
        L = random_connected_graph(60, 150, seed=7)
        weights, a = random_walk_normalization(L)
        rom = build_rom(a, weights, TargetSubset([0, 9, 33]), k1=12, k2=3,
                        eps=1e-8, reorth_stage1="full")
        lam_max = float(np.linalg.eigvalsh(a.toarray()).max())
        assert rom.ritz_values.min() >= -1e-10
        assert rom.ritz_values.max() <= lam_max + 1e-8

    def test_ritz_rows_match_materialized_vectors(self):
        _, weights, a, sub = flagship()
        rom = build_rom(a, weights, sub, k1=10, k2=2, eps=1e-8)
        rows = rom.ritz_rows([3, 50, 99])
        assert np.abs(rows - rom.ritz_vectors[[3, 50, 99], :]).max() < 1e-12


class TestTransfer:
    def test_edgeless_single_vertex(self):
        L = GraphLaplacian(sp.csr_matrix((1, 1)), np.array([0]))
        d = Normalization(np.array([3.0]), kind="custom")
        tf = transfer_full(L, d, TargetSubset([0]), 1.0, [0, 1, 5])
        assert np.allclose(tf.matrices, 3.0)

    def test_walk_probability_weighting(self):
        # With the random-walk step, F(p) entries are degree-weighted walk
        # probabilities.  Oracle: dense power of the transition matrix.
        L = random_connected_graph(15, 30, seed=8)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset([2, 7, 11])
        p = 4
        tf = transfer_full(L, weights, sub, 1.0, [p])
        walk = np.eye(15) - np.diag(1.0 / weights.d) @ L.dense()
        powp = np.linalg.matrix_power(walk, p)
        oracle = np.diag(weights.d) @ powp
        expected = oracle[np.ix_(sub.indices, sub.indices)]
        assert np.abs(tf.matrices[0] - expected).max() < 1e-10

    def test_path3_explicit_power(self):
        # Oracle: explicit 3x3 multiplication.
        L = laplacian_from_edges([(0, 1), (1, 2)])
        weights, a = random_walk_normalization(L)
        sub = TargetSubset([0])
        tf = transfer_full(L, weights, sub, 1.0, [2])
        m = np.eye(3) - a.toarray()
        x0 = np.zeros(3)
        x0[0] = np.sqrt(weights.d[0])
        val = x0 @ (m @ (m @ x0))
        assert np.isclose(tf.matrices[0][0, 0], val, atol=1e-14)

    def test_unstable_step_warns(self):
        L = laplacian_from_edges([(0, 1)])
        weights, a = random_walk_normalization(L)
        with pytest.warns(RuntimeWarning, match="stability"):
            transfer_full(L, weights, TargetSubset([0]), 1.5, [3])

    def test_rom_infinite_time_limit(self):
        _, weights, a, sub = flagship()
        rom = build_rom(a, weights, sub, k1=20, k2=4, eps=1e-8)
        r0 = rom.residues[:, : rom.m0]
        limit = r0 @ r0.T
        # pick p so every transient mode has decayed below 1e-12
        decay = np.abs(1.0 - rom.ritz_values[rom.m0 :]).max()
        p = int(np.ceil(np.log(1e-12) / np.log(decay)))
        tr = transfer_rom(rom, rom.d_hat, 1.0, [p])
        assert np.abs(tr.matrices[0] - limit).max() < 1e-10 * max(limit.max(), 1.0)

    def test_flagship_late_time_accuracy(self):
        # Oracle: exact transfer by repeated sparse application.
        L, weights, a, sub = flagship()
        rom = build_rom(a, weights, sub, k1=20, k2=4, eps=1e-8)
        tf = transfer_full(L, weights, sub, 1.0, [100])
        tr = transfer_rom(rom, rom.d_hat, 1.0, [100])
        rel = np.abs(tf.matrices[0] - tr.matrices[0]).max() / np.abs(tf.matrices[0]).max()
        assert rel < 1e-6

    def test_error_decreases_with_k2(self):
        # convergence shape: monotone up to 10% jitter at fixed deep stage 1
        L = random_connected_graph(120, 600, seed=9)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset([0, 40, 80])
        tf = transfer_full(L, weights, sub, 1.0, [60])
        errs = []
        for k2 in (1, 2, 3, 4, 5):
            rom = build_rom(a, weights, sub, k1=40, k2=k2, eps=1e-10,
                            reorth_stage1="full")
            tr = transfer_rom(rom, rom.d_hat, 1.0, [60])
            errs.append(np.abs(tf.matrices[0] - tr.matrices[0]).max()
                        / np.abs(tf.matrices[0]).max())
        for a_err, b_err in zip(errs, errs[1:]):
            assert b_err <= 1.1 * a_err


class TestMoments:
    def test_toy_first_two_moments(self):
        # Oracle: dense spectral sums on a 12-vertex graph.
        L = random_connected_graph(12, 24, seed=10)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset([0])
        rom = build_rom(a, weights, sub, k1=12, k2=1, eps=1e-12,
                        reorth_stage1="full")
        errs = moment_errors(rom, a.toarray(), 2)
        assert np.all(errs < 1e-8)

    def test_exact_projection_all_moments(self):
        L = random_connected_graph(10, 20, seed=11)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset(np.arange(10))
        rom = build_rom(a, weights, sub, k1=1, k2=1, eps=1e-12,
                        reorth_stage1="full")
        errs = moment_errors(rom, a.toarray(), 6)
        assert np.all(errs < 1e-12)

    def test_fifty_vertex_six_moments(self):
        L = random_connected_graph(50, 150, seed=12)
        weights, a = random_walk_normalization(L)
        sub = TargetSubset([3, 27])
        rom = build_rom(a, weights, sub, k1=25, k2=3, eps=1e-12,
                        reorth_stage1="full")
        errs = moment_errors(rom, a.toarray(), 6)
        assert np.all(errs < 1e-7)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        _, weights, a, sub = flagship()
        rom = build_rom(a, weights, sub, k1=8, k2=2, eps=1e-8)
        path = tmp_path / "rom.npz"
        save_rom(path, rom)
        back = load_rom(path)
        assert back.n1 == rom.n1 and back.n2 == rom.n2 and back.m0 == rom.m0
        assert np.array_equal(back.subset.indices, rom.subset.indices)
        assert np.abs(back.ritz_values - rom.ritz_values).max() == 0.0
        tr1 = transfer_rom(rom, rom.d_hat, 1.0, [7])
        tr2 = transfer_rom(back, back.d_hat, 1.0, [7])
        assert np.array_equal(tr1.matrices, tr2.matrices)
