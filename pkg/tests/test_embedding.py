"""t-SNE components against brute-force evaluation of their defining formulas."""

import math

import numpy as np
import pytest

from mptsne import embedding as emb


def brute_conditional(sq_d, sigma_sq):
    """Direct evaluation of the Gaussian conditional row formula."""
    n = sq_d.shape[0]
    p = np.zeros_like(sq_d)
    for i in range(n):
        denom = sum(math.exp(-sq_d[i, k] / (2 * sigma_sq[i])) for k in range(n) if k != i)
        for j in range(n):
            if j != i:
                p[i, j] = math.exp(-sq_d[i, j] / (2 * sigma_sq[i])) / denom
    return p


def brute_student(Y):
    n = Y.shape[0]
    num = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            if k != l:
                num[k, l] = 1.0 / (1.0 + np.sum((Y[k] - Y[l]) ** 2))
    return num / num.sum()


def rand_sq_dists(rng, n, scale=10.0):
    X = rng.uniform(-scale, scale, (n, 3))
    diff = X[:, None, :] - X[None, :, :]
    d = (diff ** 2).sum(-1)
    np.fill_diagonal(d, 0.0)
    return d


class TestSigmaSearch:
    def test_equal_distances_uniform(self):
        # all off-diagonal distances equal -> uniform conditionals at any sigma
        row = np.full(7, 4.0)
        s2 = emb.sigma_search(row, perplexity=7.0)
        assert emb._row_entropy_bits(row - row.min(), s2) == pytest.approx(np.log2(7))
        assert emb._row_entropy_bits(row - row.min(), s2 * 13.7) == pytest.approx(np.log2(7))

    def test_entropy_matches_perplexity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            row = rng.uniform(0.5, 20.0, 3)  # N=4 row without the self entry
            s2 = emb.sigma_search(row, perplexity=2.0)
            shifted = row - row.min()
            assert emb._row_entropy_bits(shifted, s2) == pytest.approx(1.0, abs=1e-5)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            row = rng.uniform(0.1, 50.0, 12)
            c2 = rng.uniform(0.25, 16.0)
            base = emb.sigma_search(row, 8.0)
            scaled = emb.sigma_search(c2 * row, 8.0)
            assert scaled == pytest.approx(c2 * base, rel=1e-9)

    def test_exclude_self_entry(self):
        row = np.array([0.0, 1.0, 2.0, 3.0])
        direct = emb.sigma_search(row[1:], 2.0)
        via_exclude = emb.sigma_search(row, 2.0, exclude=0)
        assert direct == via_exclude

    def test_degenerate_row_rejected(self):
        with pytest.raises(ValueError):
            emb.sigma_search(np.array([1.0]), 2.0)


class TestConditionalProbs:
    def test_two_points(self):
        d = np.array([[0.0, 5.0], [5.0, 0.0]])
        p = emb.conditional_probs(d, emb.Bandwidths(np.array([1.0, 1.0])))
        assert p.values[0, 1] == 1.0 and p.values[1, 0] == 1.0

    def test_row_shift_invariance(self):
        rng = np.random.default_rng(2)
        d = rand_sq_dists(rng, 8)
        bw = emb.calibrate_bandwidths(d, 3.0)
        shifted = d + rng.uniform(0, 100, (8, 1))
        np.fill_diagonal(shifted, 0.0)
        p0 = emb.conditional_probs(d, bw)
        p1 = emb.conditional_probs(shifted, bw)
        assert np.max(np.abs(p0.values - p1.values)) <= 1e-12

    def test_against_brute_force(self):
        rng = np.random.default_rng(3)
        d = rand_sq_dists(rng, 6)
        bw = emb.calibrate_bandwidths(d, 2.0)
        p = emb.conditional_probs(d, bw)
        expected = brute_conditional(d, bw.sigma_sq)
        np.testing.assert_allclose(p.values, expected, atol=1e-12)
        p.validate()

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(4)
        d = rand_sq_dists(rng, 10)
        p = emb.conditional_probs(d, emb.calibrate_bandwidths(d, 3.0))
        np.testing.assert_allclose(p.values.sum(axis=1), 1.0, atol=1e-12)


class TestSymmetrize:
    def test_two_points(self):
        cond = emb.ProbabilityMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), "conditional")
        sym = emb.symmetrize(cond)
        assert sym.values[0, 1] == 0.5 and sym.values[1, 0] == 0.5

    def test_total_mass(self):
        rng = np.random.default_rng(5)
        d = rand_sq_dists(rng, 9)
        sym = emb.joint_probabilities(d, 2.0)
        assert sym.values.sum() == pytest.approx(1.0, abs=1e-12)
        sym.validate()

    def test_elementwise_formula(self):
        rng = np.random.default_rng(6)
        d = rand_sq_dists(rng, 7)
        cond = emb.conditional_probs(d, emb.calibrate_bandwidths(d, 2.0))
        sym = emb.symmetrize(cond)
        n = 7
        for i in range(n):
            for j in range(n):
                expected = (cond.values[i, j] + cond.values[j, i]) / (2 * n)
                assert sym.values[i, j] == pytest.approx(expected, abs=1e-15)

    def test_rejects_wrong_kind(self):
        sym = emb.ProbabilityMatrix(np.array([[0.0, 0.5], [0.5, 0.0]]), "symmetric")
        with pytest.raises(ValueError):
            emb.symmetrize(sym)


class TestLowDimAffinities:
    def test_coincident_points_uniform(self):
        Y = np.zeros((5, 2))
        Q, _ = emb.low_dim_affinities(Y)
        off = Q[~np.eye(5, dtype=bool)]
        np.testing.assert_allclose(off, 1.0 / 20.0)

    def test_sums_to_one(self):
        rng = np.random.default_rng(7)
        Q, _ = emb.low_dim_affinities(rng.normal(size=(12, 2)))
        assert Q.sum() == pytest.approx(1.0, abs=1e-12)

    def test_against_brute_force(self):
        rng = np.random.default_rng(8)
        Y = rng.normal(size=(6, 2))
        Q, _ = emb.low_dim_affinities(Y)
        np.testing.assert_allclose(Q, brute_student(Y), atol=1e-14)


class TestKlDivergence:
    def test_identity(self):
        rng = np.random.default_rng(9)
        Q, _ = emb.low_dim_affinities(rng.normal(size=(6, 2)))
        assert emb.kl_divergence(Q, Q) == pytest.approx(0.0, abs=1e-14)

    def test_nonnegative(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            p = rng.uniform(0, 1, (5, 5))
            np.fill_diagonal(p, 0.0)
            p /= p.sum()
            q = rng.uniform(0, 1, (5, 5))
            np.fill_diagonal(q, 0.0)
            q /= q.sum()
            assert emb.kl_divergence(p, q) >= -1e-12

    def test_against_brute_force(self):
        rng = np.random.default_rng(11)
        p = rng.uniform(0, 1, (5, 5))
        np.fill_diagonal(p, 0.0)
        p /= p.sum()
        q = rng.uniform(0.01, 1, (5, 5))
        np.fill_diagonal(q, 0.0)
        q /= q.sum()
        expected = sum(
            p[i, j] * math.log(p[i, j] / q[i, j])
            for i in range(5) for j in range(5) if p[i, j] > 0 and i != j
        )
        assert emb.kl_divergence(p, q) == pytest.approx(expected, rel=1e-12)


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        for _ in range(3):
            d = rand_sq_dists(rng, 8)
            P = emb.joint_probabilities(d, 2.0).values
            Y = rng.normal(size=(8, 2))
            Q, student = emb.low_dim_affinities(Y)
            grad = emb.kl_gradient(Y, P, Q, student)
            eps = 1e-6
            for i in range(8):
                for k in range(2):
                    up, down = Y.copy(), Y.copy()
                    up[i, k] += eps
                    down[i, k] -= eps
                    qu, _ = emb.low_dim_affinities(up)
                    qd, _ = emb.low_dim_affinities(down)
                    numeric = (emb.kl_divergence(P, qu) - emb.kl_divergence(P, qd)) / (2 * eps)
                    assert grad[i, k] == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_zero_at_global_minimum(self):
        rng = np.random.default_rng(13)
        Y = rng.normal(size=(9, 2))
        Q, student = emb.low_dim_affinities(Y)
        grad = emb.kl_gradient(Y, Q, Q, student)
        assert np.max(np.abs(grad)) < 1e-14

    def test_step_recenters(self):
        rng = np.random.default_rng(14)
        d = rand_sq_dists(rng, 8)
        P = emb.joint_probabilities(d, 2.0)
        state = emb.EmbeddingState(rng.normal(size=(8, 2)), np.zeros((8, 2)), np.ones((8, 2)))
        nxt = emb.gradient_step(state, P, emb.TsneConfig(perplexity=2))
        np.testing.assert_allclose(nxt.Y.mean(axis=0), 0.0, atol=1e-12)
        assert nxt.iteration == 1


class TestRunTsne:
    def make_problem(self, seed=0):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(0, 0.3, (8, 3)), rng.normal(4, 0.3, (8, 3))])
        diff = X[:, None, :] - X[None, :, :]
        d = (diff ** 2).sum(-1)
        np.fill_diagonal(d, 0.0)
        return emb.joint_probabilities(d, 4.0)

    def test_deterministic(self):
        P = self.make_problem()
        cfg = emb.TsneConfig(perplexity=4, iterations=120, exaggeration_iters=40,
                             momentum_switch_iter=40, init_seed=7)
        a = emb.run_tsne(P, cfg)
        b = emb.run_tsne(P, cfg)
        assert np.array_equal(a.Y, b.Y) and np.array_equal(a.kl_trace, b.kl_trace)

    def test_kl_trace_non_increasing_post_exaggeration(self):
        P = self.make_problem(1)
        cfg = emb.TsneConfig(perplexity=4, iterations=300, exaggeration_iters=80,
                             momentum_switch_iter=80, init_seed=3)
        res = emb.run_tsne(P, cfg)
        assert np.all(np.diff(res.kl_trace[80:]) <= 1e-8)

    def test_permutation_equivariance_short_horizon(self):
        P = self.make_problem(2)
        rng = np.random.default_rng(4)
        pi = rng.permutation(16)
        init = rng.normal(0, 1e-4, (16, 2))
        cfg = emb.TsneConfig(perplexity=4, iterations=50, exaggeration_iters=20,
                             momentum_switch_iter=20)
        base = emb.run_tsne(P, cfg, init=init)
        permuted = emb.run_tsne(P.values[np.ix_(pi, pi)], cfg, init=init[pi])
        np.testing.assert_allclose(permuted.Y, base.Y[pi], atol=1e-9)

    def test_conditional_probs_permutation_exact(self):
        # conjugate-permuted distances give conjugate-permuted conditionals,
        # bitwise, thanks to order-canonical row reductions
        rng = np.random.default_rng(5)
        d = rand_sq_dists(rng, 10)
        pi = rng.permutation(10)
        dp = d[np.ix_(pi, pi)]
        bw = emb.calibrate_bandwidths(d, 3.0)
        bwp = emb.calibrate_bandwidths(dp, 3.0)
        assert np.array_equal(bwp.sigma_sq, bw.sigma_sq[pi])
        p = emb.conditional_probs(d, bw).values
        pp = emb.conditional_probs(dp, bwp).values
        assert np.array_equal(pp, p[np.ix_(pi, pi)])

    def test_perplexity_validation(self):
        P = self.make_problem()
        with pytest.raises(ValueError):
            emb.run_tsne(P, emb.TsneConfig(perplexity=10, iterations=10))

    def test_kl_trace_csv_export(self):
        P = self.make_problem()
        cfg = emb.TsneConfig(perplexity=4, iterations=20, exaggeration_iters=5,
                             momentum_switch_iter=5)
        res = emb.run_tsne(P, cfg)
        lines = res.kl_trace_csv().strip().splitlines()
        assert lines[0] == "iteration,kl"
        assert len(lines) == 21
        assert float(lines[1].split(",")[1]) == pytest.approx(res.kl_trace[0])

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_divergence_detected(self):
        P = self.make_problem()
        cfg = emb.TsneConfig(perplexity=4, iterations=30, learning_rate=1e305,
                             exaggeration_iters=30)
        with pytest.raises(emb.DivergenceError):
            emb.run_tsne(P, cfg)
