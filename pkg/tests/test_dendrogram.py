import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from ffcover.dendrogram import (
    ChainDiagnostics,
    GibbsState,
    ModelConfig,
    acf,
    birth_acceptance,
    death_acceptance,
    ess,
    gibbs_run,
    log_joint,
    marginal_log_likelihood,
    move_probabilities,
    niw_posterior,
    prune,
    read_data_csv,
    rj_run,
    similarity_matrix,
    spr_acceptance,
    spr_run,
    update_assignments,
    update_params,
    update_tree,
    update_weights,
)
from ffcover.dendrogram.baselines import rj_tree_move, spr_tree_move
from ffcover.dendrogram.model import assignment_log_probs, tree_edge_weights
from ffcover.dendrogram.prune import ReducedDendrogram
from ffcover.errors import IngestError, ValidationError, ZeroVariance
from ffcover.graph import validate_graph
from ffcover.oracle import enumerate_rooted_trees, gof_test
from ffcover.samplers import KappaPolicy
from ffcover.tree import SpanningTree


def _state(parent, mu, z=(), sigma=None, weights=None):
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    mu = mu.T if mu.shape[0] == 1 and len(parent) > 1 else mu
    m, d = mu.shape
    return GibbsState(SpanningTree(0, np.asarray(parent)), np.asarray(z, dtype=np.int64), mu,
                      np.eye(d) if sigma is None else np.atleast_2d(sigma),
                      np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float))


def _planted(n_per, d, rng, sep=3.0, spread=0.3):
    y = np.vstack([rng.normal(-sep, spread, (n_per, d)), rng.normal(sep, spread, (n_per, d))])
    return (y - y.mean(axis=0)) / y.std(axis=0, ddof=1)


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig.default(120, 2)
        assert cfg.m_tilde == 30 and cfg.nu == 120 and cfg.lam == 0.25 and cfg.alpha_dir == 0.1
        assert np.allclose(cfg.sigma0, 0.04 * np.eye(2))

    @pytest.mark.parametrize("kw", [dict(m_tilde=1), dict(lam=0.0), dict(nu=0.5), dict(alpha_dir=-1),
                                    dict(sigma0=-np.eye(2))])
    def test_invalid(self, kw):
        base = dict(m_tilde=4, nu=3.0, sigma0=np.eye(2))
        base.update(kw)
        with pytest.raises(ValidationError):
            ModelConfig(**base)


class TestUpdateTree:
    def test_two_nodes(self):
        cfg = ModelConfig(2, nu=2.0, sigma0=np.eye(1))
        st = _state([-1, 0], [0.0, 50.0])
        assert update_tree(st, cfg, np.random.default_rng(0)).parent.tolist() == [-1, 0]

    def test_identical_means_uniform(self):
        cfg = ModelConfig(3, nu=2.0, sigma0=np.eye(1), kappa=KappaPolicy.fixed(1))
        st = _state([-1, 0, 0], [0.0, 0.0, 0.0])
        rng = np.random.default_rng(1)
        counts = Counter(update_tree(st, cfg, rng).key for _ in range(6000))
        law = enumerate_rooted_trees(validate_graph(tree_edge_weights(st.mu, st.sigma, cfg.lam)), 0)
        assert np.allclose(law.probs, 1 / 3)
        assert gof_test(law, counts).pvalue >= 1e-3

    @pytest.mark.slow
    def test_gaussian_kernel_law(self):
        cfg = ModelConfig(3, lam=1.0, nu=2.0, sigma0=np.eye(1), kappa=KappaPolicy.fixed(1))
        st = _state([-1, 0, 0], [0.0, 0.0, 10.0])
        w = np.exp(-0.5 * np.array([[0, 0, 100], [0, 0, 100], [100, 100, 0.0]]))
        np.fill_diagonal(w, 0)
        law = enumerate_rooted_trees(validate_graph(w), 0)
        rng = np.random.default_rng(2)
        counts = Counter(update_tree(st, cfg, rng).key for _ in range(100_000))
        assert gof_test(law, counts).pvalue >= 1e-3

    def test_weights_are_shifted_and_floored(self):
        w = tree_edge_weights(np.array([[0.0], [1.0], [1e4]]), np.eye(1), 1.0)
        assert np.isclose(w.max(), 1.0) and np.all(w[~np.eye(3, dtype=bool)] > 0)


class TestAssignments:
    def test_single_component(self):
        st = _state([-1, 0], [0.0, 3.0], weights=[1.0, 0.0])
        z = update_assignments(st, np.linspace(-5, 5, 20)[:, None], np.random.default_rng(0))
        assert np.all(z == 0)

    def test_equidistant(self):
        lp = assignment_log_probs(np.array([[0.5]]), np.array([[0.0], [1.0]]), np.eye(1), np.array([0.5, 0.5]))
        assert np.allclose(np.exp(lp), 0.5)

    def test_five_sigma(self):
        lp = assignment_log_probs(np.array([[0.0]]), np.array([[0.0], [5.0]]), np.eye(1), np.array([0.5, 0.5]))
        assert np.isclose(np.exp(lp[0, 0]), 1 / (1 + math.exp(-12.5)), rtol=1e-12)

    def test_inactive_never_chosen(self):
        st = _state([-1, 0, 0], [0.0, 0.0, 0.0])
        active = np.array([True, False, True])
        z = update_assignments(st, np.zeros((500, 1)), np.random.default_rng(0), active)
        assert not np.any(z == 1)

    def test_empirical_frequency(self):
        st = _state([-1, 0], [0.0, 1.0])
        z = update_assignments(st, np.full((40_000, 1), 0.5), np.random.default_rng(3))
        assert abs(z.mean() - 0.5) <= 3 * math.sqrt(0.25 / 40_000)


class TestWeights:
    def test_posterior_mean(self):
        cfg = ModelConfig(3, nu=2.0, sigma0=np.eye(1))
        rng = np.random.default_rng(0)
        draws = np.array([update_weights([0, 0, 2], cfg, rng) for _ in range(20_000)])
        assert np.allclose(draws.sum(axis=1), 1.0)
        assert abs(draws[:, 0].mean() - 2.1 / 3.3) < 0.01
        a = np.array([2.1, 0.1, 1.1])
        var0 = a[0] * (a.sum() - a[0]) / (a.sum() ** 2 * (a.sum() + 1))
        assert abs(draws[:, 0].var() - var0) < 0.01

    def test_prior(self):
        cfg = ModelConfig(4, nu=2.0, sigma0=np.eye(1))
        draws = np.array([update_weights([], cfg, np.random.default_rng(i)) for i in range(4000)])
        assert np.allclose(draws.mean(axis=0), 0.25, atol=0.03)


class TestParams:
    def test_no_data_single_edge(self):
        cfg = ModelConfig(2, lam=1.0, nu=5.0, sigma0=np.eye(1))
        st = _state([-1, 0], [0.0, 0.0])
        rng = np.random.default_rng(0)
        mus, sigmas = [], []
        for _ in range(20_000):
            mu, sigma = update_params(st, np.zeros((0, 1)), cfg, rng)
            assert mu[0, 0] == 0.0
            mus.append(mu[1, 0] / math.sqrt(sigma[0, 0]))
            sigmas.append(sigma[0, 0])
        # mu_2 / sqrt(sigma) is standard normal; sigma follows the prior IW(5, 1) = InvGamma(2.5, 0.5)
        assert stats.kstest(mus, "norm").pvalue >= 1e-3
        assert stats.kstest(sigmas, stats.invgamma(2.5, scale=0.5).cdf).pvalue >= 1e-3

    def test_large_cluster_mean(self):
        rng = np.random.default_rng(1)
        y = rng.normal(2.0, 1.0, (5000, 1))
        cfg = ModelConfig(2, lam=1.0, nu=3.0, sigma0=np.eye(1))
        st = _state([-1, 0], [0.0, 0.0], z=np.ones(5000))
        draws = np.array([update_params(st, y, cfg, rng)[0][1, 0] for _ in range(400)])
        assert abs(draws.mean() - y.mean()) < 0.01

    def test_niw_matches_joint_density(self):
        # the conditional density and the model's joint density differ by a constant
        rng = np.random.default_rng(2)
        y = rng.normal(size=(15, 2))
        cfg = ModelConfig(4, lam=0.5, nu=4.0, sigma0=0.3 * np.eye(2))
        st = _state([-1, 0, 1, 0], np.zeros((4, 2)), z=rng.integers(0, 4, 15))
        post = niw_posterior(st, y, cfg)
        diffs = []
        for _ in range(5):
            mu, sigma = update_params(st, y, cfg, rng)
            st.mu, st.sigma = mu, sigma
            diffs.append(log_joint(st, y, cfg) - post.logpdf(mu[post.nodes], sigma))
        assert np.ptp(diffs) < 1e-8


class TestPrune:
    def test_chain(self):
        d = prune(SpanningTree(0, np.array([-1, 0, 1])), [1, 0, 3])
        assert d.parent == {0: -1, 2: 0} and d.lengths[2] == 2

    def test_empty_leaf(self):
        d = prune(SpanningTree(0, np.array([-1, 0])), [2, 0])
        assert d.parent == {0: -1}

    def test_star(self):
        d = prune(SpanningTree(0, np.array([-1, 0, 0, 0])), [1, 0, 0, 4])
        assert d.parent == {0: -1, 3: 0}

    def test_fixpoint(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            m = 12
            parent = np.array([-1] + [int(rng.integers(0, v)) for v in range(1, m)])
            counts = rng.integers(0, 2, m) * rng.integers(0, 3, m)
            d = prune(SpanningTree(0, parent), counts)
            kids = d.children()
            for v in d.parent:
                if v != 0 and d.counts[v] == 0:
                    assert len(kids[v]) >= 2

    def test_likelihood_preserved(self):
        # explicit Gaussian integration over every non-root mean of the full tree
        rng = np.random.default_rng(6)
        lam, sigma = 0.7, 1.3
        for _ in range(10):
            m = 7
            parent = np.array([-1] + [int(rng.integers(0, v)) for v in range(1, m)])
            z = rng.choice([0, 2, 5, 6], size=6)
            y = rng.normal(size=6)
            tree = SpanningTree(0, parent)
            counts = np.bincount(z, minlength=m)
            lap = np.zeros((m, m))
            for j, l in tree.edges:
                lap[[j, l], [j, l]] += 1
                lap[j, l] -= 1
                lap[l, j] -= 1
            prec = lam * lap[1:, 1:]
            design = np.zeros((6, m - 1))
            for i, k in enumerate(z):
                if k > 0:
                    design[i, k - 1] = 1.0
            cov = sigma * (design @ np.linalg.inv(prec) @ design.T + np.eye(6))
            exact = stats.multivariate_normal(np.zeros(6), cov).logpdf(y)
            reduced = prune(tree, counts, z)
            assert abs(marginal_log_likelihood(reduced, y, sigma, lam) - exact) <= 1e-9


class TestSimilarity:
    def _dendro(self, parent, z):
        parent = dict(parent)
        return ReducedDendrogram(0, parent, {v: (0 if p < 0 else 1) for v, p in parent.items()},
                                 {v: 1 for v in parent}, np.asarray(z))

    def test_all_under_one_node(self):
        d = self._dendro({0: -1, 1: 0, 2: 1}, [1, 2, 2, 1])
        assert np.array_equal(similarity_matrix([d], 1), np.ones((4, 4)))

    def test_root_points_never_pair(self):
        d = self._dendro({0: -1, 1: 0}, [0, 0, 1])
        s = similarity_matrix([d], 1)
        assert s[0, 1] == 0 and np.all(np.diag(s) == 1)

    def test_averaging(self):
        a = self._dendro({0: -1, 1: 0, 2: 0}, [1, 1])
        b = self._dendro({0: -1, 1: 0, 2: 0}, [1, 2])
        assert similarity_matrix([a, b], 1)[0, 1] == 0.5

    def test_depth_two(self):
        d = self._dendro({0: -1, 1: 0, 2: 1, 3: 1}, [2, 3, 1])
        s = similarity_matrix([d], 2)
        assert s[0, 1] == 0 and s[0, 2] == 0
        assert np.array_equal(similarity_matrix([d], 1), np.ones((3, 3)))


class TestESS:
    def test_iid(self):
        x = np.random.default_rng(0).normal(size=10_000)
        assert 0.8 <= ess(x) / len(x) <= 1.2

    def test_ar1(self):
        rng = np.random.default_rng(1)
        n = 100_000
        e = rng.normal(size=n)
        x = np.empty(n)
        x[0] = e[0]
        for t in range(1, n):
            x[t] = 0.9 * x[t - 1] + e[t]
        assert abs(ess(x) / n - 0.1 / 1.9) <= 0.2 * 0.1 / 1.9

    def test_constant(self):
        with pytest.raises(ZeroVariance):
            ess(np.ones(50))
        diag = ChainDiagnostics.from_traces({"a": np.ones(50), "b": np.arange(5)})
        assert diag.status == {"a": "zero_variance", "b": "too_short"}
        assert diag.ess_per_iter["a"] == 1 / 50

    def test_short(self):
        with pytest.raises(ValidationError):
            ess(np.arange(5.0))

    def test_acf(self):
        r = acf(np.random.default_rng(2).normal(size=500), 10)
        assert r[0] == pytest.approx(1.0) and len(r) == 11

    def test_bounds(self):
        x = np.tile([0.0, 1.0], 100)
        diag = ChainDiagnostics.from_traces({"alt": x})
        assert 0 < diag.ess_per_iter["alt"] <= 1


class TestGibbs:
    def test_small_planted(self):
        rng = np.random.default_rng(0)
        y = _planted(4, 1, rng)
        cfg = ModelConfig.default(8, 1, m_tilde=3)
        samples, _ = gibbs_run(y, cfg, 1500, 500, 5, 0)
        s = similarity_matrix(samples, 1)
        within = np.r_[s[:4, :4][~np.eye(4, dtype=bool)], s[4:, 4:][~np.eye(4, dtype=bool)]]
        assert within.mean() >= 0.9

    def test_iters_equal_burnin(self):
        cfg = ModelConfig.default(10, 1)
        samples, diag = gibbs_run(np.arange(10.0), cfg, 5, 5, 1, 0)
        assert samples == [] and diag.status["n_leaves"] == "too_short"

    def test_retained_count(self):
        cfg = ModelConfig.default(12, 1)
        samples, _ = gibbs_run(np.linspace(-1, 1, 12), cfg, 60, 30, 10, 0)
        assert len(samples) == 3

    def test_determinism(self):
        y = _planted(10, 2, np.random.default_rng(4))
        cfg = ModelConfig.default(20, 2)
        _, a = gibbs_run(y, cfg, 40, 10, 1, 77)
        _, b = gibbs_run(y, cfg, 40, 10, 1, 77)
        for k in a.traces:
            assert np.array_equal(a.traces[k], b.traces[k])

    def test_invariants_hold(self):
        y = _planted(10, 2, np.random.default_rng(5))
        cfg = ModelConfig.default(20, 2)
        samples, _ = gibbs_run(y, cfg, 30, 0, 1, 3)
        for d in samples:
            kids = d.children()
            for v in d.parent:
                if v != d.root and d.counts[v] == 0:
                    assert len(kids[v]) >= 2
            assert sum(d.counts.values()) == 20


class TestReversibleJump:
    def test_birth_example(self):
        assert birth_acceptance(3, 1, 0.1, 0.9) == pytest.approx(0.27)

    def test_death_is_inverse(self):
        p_birth, p_death = 0.1, 0.9
        a = birth_acceptance(3, 2, p_birth, p_death)
        b = death_acceptance(3, 2, p_birth, p_death)
        assert min(a, 1.0) == a and (a == 1.0 or b == 1.0)

    def test_boundaries(self):
        assert move_probabilities(1, 10) == (0.1, 0.0)
        assert move_probabilities(10, 10) == (0.0, 0.9)

    def test_death_without_empty_leaves_skipped(self):
        cfg = ModelConfig(3, nu=2.0, sigma0=np.eye(1))
        st = _state([-1, 0, -1], [0.0, 1.0, 0.0], z=[0, 1])
        active = np.array([True, True, False])

        class Draws:
            def random(self):
                return 0.5  # above p0, so a death is proposed

            def integers(self, n):
                return 0

        assert rj_tree_move(st, active, cfg, Draws()) == "skipped"

    def test_chain_runs(self):
        y = _planted(15, 2, np.random.default_rng(6))
        samples, diag = rj_run(y, ModelConfig.default(30, 2), 60, 20, 0)
        assert len(samples) == 40
        assert set(diag.ess_per_iter) >= {"n_leaves", "max_depth", "max_degree"}
        for d in samples:
            assert d.root == 0 and all(v < 7 for v in d.parent)


class TestSPR:
    def test_identical_likelihood(self):
        st = _state([-1, 0, 0], [[0.0], [1.0], [0.0]])
        cfg = ModelConfig(3, nu=2.0, sigma0=np.eye(1))
        assert spr_acceptance(st, 1, 2, cfg) == 1.0

    def test_root_never_pruned_and_tree_valid(self):
        cfg = ModelConfig(6, nu=2.0, sigma0=np.eye(1))
        rng = np.random.default_rng(0)
        st = _state([-1, 0, 0, 1, 1, 2], rng.normal(size=(6, 1)))
        for _ in range(200):
            spr_tree_move(st, cfg, rng)
            assert st.tree.parent[0] == -1
            st.tree.depths()

    def test_two_nodes_constant(self):
        y = np.linspace(-1, 1, 8)
        samples, diag = spr_run(y, ModelConfig.default(8, 1), 30, 10, 0)
        assert diag.status["max_depth"] in ("ok", "zero_variance")


class TestIngest:
    def test_log_and_standardize(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c\n1,10,x\n2,20,y\n4,40,z\n")
        data, names = read_data_csv(path, ["a", "b"], log_transform=True, standardize=True)
        assert names == ["a", "b"]
        assert np.allclose(data.mean(axis=0), 0) and np.allclose(data.std(axis=0, ddof=1), 1)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(IngestError, match="'q'"):
            read_data_csv(path, ["a", "q"])

    def test_bad_cell_names_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(IngestError, match=r":3: column 'b'"):
            read_data_csv(path)

    def test_log_needs_positive(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a\n1\n0\n")
        with pytest.raises(IngestError):
            read_data_csv(path, log_transform=True)

    def test_min_columns(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(IngestError):
            read_data_csv(path, ["a"], min_columns=2)
