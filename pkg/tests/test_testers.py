import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matvecprobe import testers as T
from matvecprobe.numerics import Field, Matrix, make_rng, random_orthonormal, row_norms_exact
from matvecprobe.oracle import FieldMismatch, MatVecOracle, NotSquare, Side
from matvecprobe.testers import Decision, RankVerdict, ToleranceConfig

ACCEPT, REJECT = Decision.ACCEPT, Decision.REJECT


def real(a, **kw):
    return MatVecOracle(np.asarray(a, dtype=float), **kw)


def gf2(a, **kw):
    return MatVecOracle(Matrix(np.asarray(a, dtype=np.uint8), Field.GF2), **kw)


def bits(k, n):
    return np.array([(k >> i) & 1 for i in range(n)], dtype=np.uint8)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(eps=0), dict(eps=1), dict(numeric_tol=0),
                                    dict(jl_constant=-1), dict(krylov_constant=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ToleranceConfig(**kw)

    def test_round_formulas(self):
        assert T.symmetric_rounds(0.001) == math.ceil(math.log(1000) / math.log(4 / 3)) == 25
        assert T.diagonal_rounds(0.01) == 7
        assert T.identical_rows_rounds(16, 0.01) == 15
        assert T.identical_rows_rounds(64, 0.01) == 19
        assert T.all_ones_row_rounds(8, 0.01) == 10
        assert T.jl_query_count(64, 0.25) == math.ceil(8 * math.log(64) / 0.0625)
        assert T.krylov_steps(128, 0.05) == math.ceil(4 * math.log(128) / math.sqrt(0.05))
        assert T.krylov_steps(4, 0.05) == 4

    def test_exact_powers_do_not_overshoot(self):
        assert T.diagonal_rounds(0.25) == 2
        assert T.diagonal_rounds(0.5) == 1


class TestSymmetric:
    def test_identity(self):
        out = T.test_symmetric(real(np.eye(4)), rng=0)
        assert out.result is ACCEPT and out.queries_used == 2 * T.symmetric_rounds(0.01)

    def test_zero(self):
        assert T.test_symmetric(real(np.zeros((3, 3))), rng=0).accepted

    def test_enumeration_6_of_16(self):
        m = np.array([[0, 1], [0, 0]])
        hits = sum(int(u @ m @ v % 2 != v @ m @ u % 2)
                   for u in map(lambda k: bits(k, 2), range(4))
                   for v in map(lambda k: bits(k, 2), range(4)))
        assert hits == 6

    def test_gf2_single_round_rate(self):
        o = gf2([[0, 1], [0, 0]])
        rej = sum(not T.test_symmetric(o, rng=s, rounds=1).accepted for s in range(4000))
        assert abs(rej / 4000 - 6 / 16) < 0.03

    def test_real_random_nonsymmetric_rejected(self):
        a = make_rng(0).standard_normal((6, 6))
        assert T.test_symmetric(real(a), rng=1).result is REJECT

    def test_real_symmetric_never_rejected(self):
        for s in range(50):
            g = make_rng(s).standard_normal((10, 10)) * 100
            assert T.test_symmetric(real(g + g.T), rng=s).accepted

    def test_not_square(self):
        with pytest.raises(NotSquare):
            T.test_symmetric(real(np.ones((2, 3))))


class TestDiagonal:
    def test_diag(self):
        eps = 0.01
        out = T.test_diagonal(real(np.diag([2, 3, 5])), ToleranceConfig(eps=eps), rng=0)
        assert out.accepted and out.queries_used == 1 + math.ceil(math.log2(1 / eps))

    def test_zero(self):
        assert T.test_diagonal(real(np.zeros((3, 3))), rng=0).accepted

    def test_enumeration_2_of_4(self):
        m = np.array([[1, 1], [0, 1]])
        d = m.sum(axis=1)
        exposed = sum(int(np.any(m @ bits(k, 2) != d * bits(k, 2))) for k in range(4))
        assert exposed == 2

    @pytest.mark.parametrize("make", [real, gf2])
    def test_single_round_rate(self, make):
        o = make([[1, 1], [0, 1]])
        hits = sum(not T.test_diagonal(o, rng=s, rounds=1).accepted for s in range(4000))
        assert abs(hits / 4000 - 0.5) < 0.03

    def test_gf2_diagonal_accepted(self):
        for s in range(50):
            d = make_rng(s).integers(0, 2, 7)
            assert T.test_diagonal(gf2(np.diag(d)), rng=s).accepted

    def test_gf2_exhaustive_small(self):
        # every 2x2 and 3x3 GF2 matrix: diagonal ones always accepted, others caught
        for n in (2, 3):
            for k in range(2 ** (n * n)):
                a = bits(k, n * n).reshape(n, n)
                diag = not np.any(a - np.diag(np.diag(a)))
                out = T.test_diagonal(gf2(a), ToleranceConfig(eps=1e-6), rng=k)
                assert out.accepted == diag

    def test_witness(self):
        out = T.test_diagonal(real([[1, 0, 0], [0, 1, 4], [0, 0, 1]]), rng=3)
        assert out.result is REJECT and out.witness[1] == 1


class TestUnitary:
    def test_examples(self):
        assert T.test_unitary(real(np.eye(5)), rng=0).accepted
        out = T.test_unitary(real(2 * np.eye(2)), rng=0)
        assert out.result is REJECT and out.queries_used == 1

    def test_scaled_column(self):
        q = random_orthonormal(make_rng(0), 6).entries
        assert T.test_unitary(real(q), rng=0).accepted
        q2 = q.copy()
        q2[:, 0] *= 1.01
        assert sum(T.test_unitary(real(q2), rng=s).result is REJECT for s in range(1000)) >= 990

    def test_gf2_rejected(self):
        with pytest.raises(FieldMismatch):
            T.test_unitary(gf2(np.eye(2)))


class TestRank:
    def test_examples(self):
        assert T.decide_rank_threshold(real(np.zeros((4, 4))), 2, rng=0).result is RankVerdict.AT_MOST_P
        out = T.decide_rank_threshold(real(np.eye(4)), 2, rng=0)
        assert out.result is RankVerdict.AT_LEAST_P1 and out.queries_used == 3 and out.witness == 3
        u, v = make_rng(1).standard_normal((2, 5))
        assert T.decide_rank_threshold(real(np.outer(u, v)), 1, rng=0).result is RankVerdict.AT_MOST_P

    def test_bad_p(self):
        with pytest.raises(ValueError):
            T.decide_rank_threshold(real(np.eye(3)), 3)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_p(self, seed, k):
        # same seed: the p'-block extends the p-block, so AT_MOST_P at p stays at p' > p
        rng = make_rng(seed)
        a = rng.standard_normal((8, k)) @ rng.standard_normal((k, 8))
        first = None
        for p in range(8):
            out = T.decide_rank_threshold(real(a), p, rng=seed)
            if out.result is RankVerdict.AT_MOST_P and first is None:
                first = p
            if first is not None:
                assert out.result is RankVerdict.AT_MOST_P
        assert first == k

    def test_prefix_extension(self):
        a = make_rng(0).standard_normal((6, 6))
        o1, o2 = real(a, record=True), real(a, record=True)
        T.decide_rank_threshold(o1, 1, rng=5)
        T.decide_rank_threshold(o2, 3, rng=5)
        for r1, r2 in zip(o1.transcript, o2.transcript):
            assert np.array_equal(r1.query, r2.query)


class TestMaxEigenvalue:
    def test_diag(self):
        out = T.approx_max_eigenvalue(real(np.diag([1, 0.5, 0.25])), eps=0.01, rng=0)
        assert 0.99 <= out.result <= 1.0 + 1e-12

    def test_path_laplacian(self):
        n = 8
        lap = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        lap[0, 0] = lap[-1, -1] = 1
        lam = np.linalg.eigvalsh(lap)[-1]
        assert abs(lam - (2 - 2 * math.cos(7 * math.pi / 8))) < 1e-12
        out = T.approx_max_eigenvalue(real(lap), eps=0.05, rng=0)
        assert (1 - 0.05) * lam <= out.result <= lam * (1 + 1e-8)

    def test_identity_one_step(self):
        out = T.approx_max_eigenvalue(real(np.eye(10)), rng=0)
        assert out.result == pytest.approx(1.0, abs=1e-14) and out.queries_used == 1

    def test_monotone_and_bounded(self):
        g = make_rng(3).standard_normal((40, 40))
        a = g @ g.T
        lam = np.linalg.eigvalsh(a)[-1]
        ritz = T.approx_max_eigenvalue(real(a), rng=1).witness
        assert all(x <= y + 1e-9 * lam for x, y in zip(ritz, ritz[1:]))
        assert max(ritz) <= lam * (1 + 1e-8)

    def test_power_method(self):
        a = np.diag([3.0, 1.0, 0.5])
        out = T.approx_max_eigenvalue(real(a), rng=0, method="power", steps=40)
        assert out.result == pytest.approx(3.0, rel=1e-3)

    def test_nonfinite(self):
        from matvecprobe.oracle import NonFiniteResponse

        with pytest.raises(NonFiniteResponse):
            T.approx_max_eigenvalue(real(np.diag([np.inf, 1.0])), rng=0)


class TestTrace:
    def test_identity_exact(self):
        out = T.estimate_trace_hutchinson(real(np.eye(10)), 7, rng=0)
        assert out.result == 10 and out.queries_used == 7

    def test_diag_concentrates(self):
        ok = sum(abs(T.estimate_trace_hutchinson(real(np.diag(np.arange(1.0, 9))), 2000, rng=s).result - 36) <= 1.8
                 for s in range(40))
        assert ok == 40

    def test_zero_diag(self):
        g = make_rng(0).standard_normal((6, 6))
        a = g + g.T
        np.fill_diagonal(a, 0)
        est = T.estimate_trace_hutchinson(real(a), 4000, rng=1).result
        assert abs(est) < 5 * np.linalg.norm(a) * math.sqrt(2 / 4000)


class TestAllOnes:
    def test_row_real(self):
        a = np.zeros((4, 5))
        a[1] = 1
        out = T.all_ones_row_real(real(a))
        assert out.accepted and out.witness == 1 and out.queries_used == 1
        assert T.all_ones_row_real(real(np.zeros((3, 3)))).result is REJECT
        assert T.all_ones_row_real(real(np.ones((3, 4)))).witness == 0

    def test_row_gf2_enumeration(self):
        # row (1, 0) survives a round iff the query's second bit is 0: 2 of 4
        survive = sum(int((np.array([1, 0]) @ bits(k, 2)) % 2 == bits(k, 2).sum() % 2) for k in range(4))
        assert survive == 2
        survive_zero = sum(int(0 == bits(k, 3).sum() % 2) for k in range(8))
        assert survive_zero == 4

    def test_row_gf2(self):
        a = make_rng(0).integers(0, 2, (8, 12), dtype=np.uint8)
        a[5] = 1
        out = T.all_ones_row_gf2(gf2(a), rng=1)
        assert out.accepted and out.queries_used == T.all_ones_row_rounds(8, 0.01)
        assert 5 in [out.witness] or out.witness < 5

    def test_row_gf2_single_round_survival(self):
        o = gf2([[1, 0]])
        alive = sum(T.all_ones_row_gf2(o, rng=s, rounds=1).accepted for s in range(4000))
        assert abs(alive / 4000 - 0.5) < 0.03

    def test_column_naive(self):
        a = np.zeros((3, 5))
        a[:, 2] = 1
        out = T.all_ones_column_naive(real(a))
        assert out.witness == 2 and out.queries_used == 5
        assert T.all_ones_column_naive(real(np.zeros((2, 2)))).result is REJECT

    def test_column_left(self):
        a = np.zeros((3, 5))
        a[:, 4] = 1
        out = T.all_ones_column_left(real(a, side=Side.BOTH))
        assert out.witness == 4 and out.queries_used == 1


class TestIdentical:
    def test_rows_planted(self):
        a = make_rng(0).integers(0, 2, (6, 30), dtype=np.uint8)
        a[3] = a[0]
        out = T.identical_rows(gf2(a), rng=0)
        assert (0, 3) in out.witness and out.queries_used == T.identical_rows_rounds(6, 0.01)

    def test_rows_count_m16(self):
        out = T.identical_rows(gf2(np.eye(16)), rng=0)
        assert out.queries_used == 15

    def test_one_bit_collision_rate(self):
        a = np.array([[1, 0, 1], [1, 1, 1]])
        same = sum(T.identical_rows(gf2(a), rng=s, rounds=1).accepted for s in range(4000))
        assert abs(same / 4000 - 0.5) < 0.03

    def test_rows_real(self):
        a = make_rng(1).standard_normal((5, 4))
        a[4] = a[2]
        assert T.identical_rows(real(a), rng=0).witness == [(2, 4)]

    def test_columns_naive(self):
        a = make_rng(0).integers(0, 2, (20, 6), dtype=np.uint8)
        a[:, 5] = a[:, 2]
        out = T.identical_columns_naive(gf2(a))
        assert (2, 5) in out.witness and out.queries_used == 6
        assert T.identical_columns_naive(gf2(np.eye(4))).result is REJECT
        assert T.identical_columns_naive(real(np.ones((2, 3)))).witness == [(0, 1, 2)]


class TestNormsAndHeavy:
    def test_identity(self):
        out = T.row_norms_jl(real(np.eye(16)), ToleranceConfig(eps=0.25), rng=0)
        assert np.all(np.abs(out.result - 1) <= 0.25)
        assert out.queries_used == T.jl_query_count(16, 0.25)

    def test_zero_row(self):
        a = make_rng(0).standard_normal((4, 6))
        a[2] = 0
        assert T.row_norms_jl(real(a), rng=0, eps=0.5).result[2] == 0.0

    def test_linear_scaling(self):
        a = make_rng(0).standard_normal((8, 5))
        e1 = T.row_norms_jl(real(a), rng=3, eps=0.5).result
        e2 = T.row_norms_jl(real(4.0 * a), rng=3, eps=0.5).result
        assert np.allclose(e2, 4.0 * e1, rtol=1e-13)

    def test_random_32x64(self):
        a = make_rng(0).standard_normal((32, 64))
        exact = row_norms_exact(a)
        good = sum(np.max(np.abs(T.row_norms_jl(real(a), rng=s, eps=0.25).result / exact - 1)) <= 0.25
                   for s in range(100))
        assert good >= 90

    def test_heavy_single(self):
        a = 1e-3 * make_rng(0).standard_normal((20, 10))
        a[0, 0] = 10
        assert T.heavy_hitters(real(a), rng=0).result == {0}

    def test_heavy_equal_rows(self):
        a = np.tile(make_rng(0).standard_normal(6), (30, 1))
        assert T.heavy_hitters(real(a), rng=0).result == frozenset()

    def test_threshold_gap(self):
        assert (1 - 0.01) ** 2 / 10 > 1 / 15 > (1 + 0.01) ** 2 / 20


def brute_majority(a):
    return np.array([int(2 * r.sum() > a.shape[1]) for r in a], dtype=np.uint8)


class TestMajorityParity:
    def test_majority_examples(self):
        assert T.majority_rows(real([[1, 1, 1, 0, 0]])).result.tolist() == [1]
        assert T.majority_rows(real([[1, 1, 0, 0]])).result.tolist() == [0]
        assert T.majority_rows(real([[0, 0, 0]])).result.tolist() == [0]

    def test_parity_examples(self):
        assert T.parity_rows_gf2(gf2([[1, 1, 0]])).result.tolist() == [0]
        assert T.parity_rows_gf2(gf2(np.eye(3))).result.tolist() == [1, 1, 1]
        out = T.parity_columns_gf2(gf2(np.eye(3)))
        assert out.result.tolist() == [1, 1, 1] and out.queries_used == 3
        assert T.parity_columns_gf2(gf2(np.zeros((2, 4)))).result.tolist() == [0, 0, 0, 0]

    def test_parity_random_8x8(self):
        a = make_rng(0).integers(0, 2, (8, 8), dtype=np.uint8)
        assert T.parity_rows_gf2(gf2(a)).result.tolist() == [int(np.bitwise_xor.reduce(r)) for r in a]
        assert T.parity_columns_gf2(gf2(a)).result.tolist() == [int(np.bitwise_xor.reduce(c)) for c in a.T]

    def test_left_variants(self):
        a = make_rng(1).integers(0, 2, (5, 4), dtype=np.uint8)
        out = T.parity_columns_left(gf2(a, side=Side.BOTH))
        assert out.queries_used == 1 and out.result.tolist() == (a.sum(axis=0) % 2).tolist()
        out = T.majority_columns_left(real(a, side=Side.BOTH))
        assert out.queries_used == 1 and out.result.tolist() == brute_majority(a.T).tolist()

    def test_field_checks(self):
        with pytest.raises(FieldMismatch):
            T.parity_rows_gf2(real(np.eye(2)))
        with pytest.raises(FieldMismatch):
            T.majority_rows(gf2(np.eye(2)))


class TestGraphs:
    def test_bipartite(self):
        assert T.connectivity_bipartite_naive(real(np.ones((3, 3)))).result is True
        a = np.ones((3, 3))
        a[:, 1] = 0
        out = T.connectivity_bipartite_naive(real(a))
        assert out.result is False and out.queries_used == 3

    def test_bipartite_vs_bfs(self):
        from collections import deque

        for s in range(30):
            a = (make_rng(s).random((6, 6)) < 0.3).astype(float)
            adj = {v: set() for v in range(12)}
            for i, j in zip(*np.nonzero(a)):
                adj[i].add(6 + j)
                adj[6 + j].add(i)
            seen, todo = {0}, deque([0])
            while todo:
                for w in adj[todo.popleft()] - seen:
                    seen.add(w)
                    todo.append(w)
            assert T.connectivity_bipartite_naive(real(a)).result == (len(seen) == 12)

    def test_triangles(self):
        k3 = np.ones((3, 3)) - np.eye(3)
        base = real(k3)
        out = T.count_triangles_exact(base)
        assert out.result == 1 and base.queries_used == 9
        p4 = np.eye(4, k=1) + np.eye(4, k=-1)
        assert T.count_triangles_exact(real(p4)).result == 0

    def test_triangles_gnp(self):
        for s in range(20):
            rng = make_rng(s)
            a = np.triu(rng.random((12, 12)) < 0.5, 1)
            a = (a | a.T).astype(float)
            brute = sum(a[i, j] * a[j, k] * a[i, k] for i, j, k in itertools.combinations(range(12), 3))
            assert T.count_triangles_exact(real(a)).result == brute
