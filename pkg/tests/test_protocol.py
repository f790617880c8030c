import math

import numpy as np
import pytest

from hypertree.hyperbolic import sarkar_embed
from hypertree.protocol import (
    ProtocolConfig,
    SampleBatch,
    calibrate_sample_complexity,
    child_marginal_report,
    depthwise_estimate,
    fano_constants,
    kl_plugin_estimate,
    random_theta,
    risk,
    sample,
    separation_experiment,
    vg_packing,
)
from hypertree.trees import build_galton_watson, build_mary


class TestSample:
    def test_near_noiseless_flip_rate(self):
        cfg = ProtocolConfig(m=3, R=4, rho=1e-9)
        rng = np.random.default_rng(0)
        theta = np.array([0, 1, 2, 1])
        batch = sample(cfg, theta, rng, n=1_000_000)
        y_star = batch.child == theta[batch.depths]
        flips = (batch.y.astype(bool) != y_star).mean()
        assert flips <= 1e-6

    def test_oracle_child_uniform(self):
        cfg = ProtocolConfig(m=4, R=3, rho=0.2)
        rng = np.random.default_rng(1)
        batch = sample(cfg, np.array([0, 1, 2]), rng, n=1_000_000)
        n = len(batch.child)
        sigma = math.sqrt(0.25 * 0.75 / n)
        for c in range(4):
            assert abs((batch.child == c).mean() - 0.25) <= 3 * sigma

    def test_protocol_child_marginal_exact_combinatorics(self):
        # complete m-ary tree: at depth i exactly m^{R-i} of the m^{R-i+1}
        # admissible leaves sit in each child, so P(ch_I(V)=theta_I | I) = 1/m
        cfg = ProtocolConfig(m=3, R=4, rho=0.1, mode="protocol")
        rng = np.random.default_rng(2)
        theta = np.array([2, 0, 1, 1])
        batch = sample(cfg, theta, rng, n=600_000)
        for i in range(4):
            sel = batch.depths == i
            hit = (batch.child[sel] == theta[i]).mean()
            sigma = math.sqrt((1 / 3) * (2 / 3) / sel.sum())
            assert abs(hit - 1.0 / 3.0) <= 4 * sigma

    def test_protocol_leaves_respect_prefix(self):
        cfg = ProtocolConfig(m=2, R=5, rho=0.1, mode="protocol")
        rng = np.random.default_rng(3)
        theta = np.array([1, 0, 1, 1, 0])
        tree = build_mary(2, 5, 1.0)
        batch = sample(cfg, theta, rng, n=2000)
        for d, leaf in zip(batch.depths, batch.leaf):
            path = []
            v = int(leaf)
            while v:
                kids = list(tree.children[int(tree.parent[v])])
                path.append(kids.index(v))
                v = int(tree.parent[v])
            path = path[::-1]
            assert path[:d] == list(theta[:d])

    def test_gw_tree_sampling_and_marginals(self):
        res = build_galton_watson({2: 0.5, 3: 0.5}, R=4, lam=1.0, seed=5)
        tree = res.tree
        cfg = ProtocolConfig(m=2, R=4, rho=0.1, mode="protocol", tree=tree)
        rng = np.random.default_rng(4)
        theta = np.array([0, 1, 0, 1])
        batch = sample(cfg, theta, rng, n=500)
        assert batch.leaf is not None
        rows, worst = child_marginal_report(tree, theta)
        assert all(abs(r.sum() - 1.0) < 1e-12 for r in rows)
        assert 0.0 <= worst < 1.0

    def test_rho_validation(self):
        with pytest.raises(ValueError):
            ProtocolConfig(m=2, R=3, rho=0.5)
        with pytest.raises(ValueError):
            ProtocolConfig(m=2, R=3, rho=0.0)


class TestDepthwiseEstimate:
    def test_noiseless_one_sample_per_cell(self):
        m, R = 3, 4
        cfg = ProtocolConfig(m=m, R=R, rho=0.01)
        theta = np.array([1, 2, 0, 1])
        depths = np.repeat(np.arange(R), m)
        child = np.tile(np.arange(m), R)
        y = (child == theta[depths]).astype(np.int8)
        est = depthwise_estimate(cfg, SampleBatch(depths=depths, child=child, y=y))
        assert np.array_equal(est.theta_hat, theta)
        assert not est.starved.any()

    def test_tie_breaks_to_smallest_index(self):
        cfg = ProtocolConfig(m=3, R=1, rho=0.1)
        batch = SampleBatch(depths=np.zeros(3, dtype=np.int64),
                            child=np.array([0, 1, 2]),
                            y=np.array([0, 1, 1], dtype=np.int8))
        est = depthwise_estimate(cfg, batch)
        assert est.theta_hat[0] == 1  # children 1 and 2 tie at mean 1

    def test_starved_depths_flagged(self):
        cfg = ProtocolConfig(m=2, R=3, rho=0.1)
        batch = SampleBatch(depths=np.array([0, 0]), child=np.array([0, 1]),
                            y=np.array([1, 0], dtype=np.int8))
        est = depthwise_estimate(cfg, batch)
        assert est.starved.tolist() == [False, True, True]
        assert est.theta_hat[1] == 0 and est.theta_hat[2] == 0

    def test_permutation_equivariance(self):
        cfg = ProtocolConfig(m=4, R=5, rho=0.15)
        rng = np.random.default_rng(9)
        theta = random_theta(4, 5, rng)
        batch = sample(cfg, theta, rng, n=4000)
        perm = np.array([2, 3, 1, 0])
        permuted = SampleBatch(depths=batch.depths, child=perm[batch.child],
                               y=batch.y)
        a = depthwise_estimate(cfg, batch).theta_hat
        b = depthwise_estimate(cfg, permuted).theta_hat
        assert np.array_equal(perm[a], b)

    def test_protocol_mode_requires_hyperbolic(self):
        cfg = ProtocolConfig(m=2, R=3, rho=0.1, mode="protocol")
        rng = np.random.default_rng(0)
        batch = sample(cfg, np.array([0, 1, 0]), rng, n=100)
        with pytest.raises(ValueError):
            depthwise_estimate(cfg, batch)

    def test_protocol_pipeline_with_cone_recovery(self):
        tree = build_mary(3, 4, 1.0)
        emb = sarkar_embed(tree, k=2, kappa=64.0)
        cfg = ProtocolConfig(m=3, R=4, rho=0.05, mode="protocol",
                             representation=emb)
        rng = np.random.default_rng(12)
        hits = 0
        for _ in range(25):
            theta = random_theta(3, 4, rng)
            batch = sample(cfg, theta, rng, n=900)
            est = depthwise_estimate(cfg, batch)
            hits += bool(np.array_equal(est.theta_hat, theta))
        assert hits >= 23


class TestRisk:
    def test_perfect_recovery(self):
        cfg = ProtocolConfig(m=4, R=6, rho=0.1)
        theta = np.array([0, 1, 2, 3, 0, 1])
        rep = risk(cfg, theta, theta)
        assert rep.average == 0.0 and rep.hamming == 0

    def test_single_wrong_coordinate(self):
        cfg = ProtocolConfig(m=4, R=5, rho=0.1)
        theta = np.array([0, 1, 2, 3, 0])
        theta_hat = theta.copy()
        theta_hat[2] = 0
        rep = risk(cfg, theta_hat, theta)
        assert rep.per_depth[2] == pytest.approx(2.0 / 4.0)
        assert rep.average == pytest.approx(2.0 / 4.0 / 5.0)
        assert rep.hamming == 1

    def test_all_wrong_binary(self):
        cfg = ProtocolConfig(m=2, R=4, rho=0.1)
        theta = np.array([0, 0, 1, 1])
        rep = risk(cfg, 1 - theta, theta)
        assert np.allclose(rep.per_depth, 1.0)
        assert rep.average == 1.0


class TestFano:
    def test_beta_quarter(self):
        rep = fano_constants(2, 8, 0.25)
        assert rep.beta == pytest.approx(0.5 * math.log(3.0), rel=1e-12)
        assert rep.beta == pytest.approx(0.549306, abs=1e-6)

    def test_blowup_near_half(self):
        values = [fano_constants(2, 8, rho).n_lower
                  for rho in (0.25, 0.4, 0.49, 0.4999)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert fano_constants(2, 8, 0.4999999999).n_lower > 1e9

    def test_rejects_boundary_rho(self):
        for rho in (0.0, 0.5, -0.1, 0.7):
            with pytest.raises(ValueError):
                fano_constants(2, 8, rho)

    def test_kl_plugin_below_cap(self):
        # adjacent parameters: the exact KL equals the cap (2/(mR)) * beta,
        # so the plug-in estimate must sit within 3 standard errors of it
        m, R, rho = 4, 6, 0.2
        theta = np.zeros(R, dtype=np.int64)
        theta_p = theta.copy()
        theta_p[3] = 1
        est, se = kl_plugin_estimate(m, R, rho, theta, theta_p, n=200_000, seed=3)
        cap = fano_constants(m, R, rho).kl_cap_adjacent
        assert est <= cap + 3 * se
        assert est == pytest.approx(cap, abs=4 * se)

    def test_kl_zero_for_identical(self):
        est, se = kl_plugin_estimate(3, 4, 0.1, np.zeros(4, dtype=np.int64),
                                     np.zeros(4, dtype=np.int64), n=10_000)
        assert est == 0.0


class TestVGPacking:
    def test_floor_case_r8(self):
        pack = vg_packing(2, 8, seed=0, candidates=512)
        assert pack.min_distance == 1
        book = pack.codebook
        for i in range(len(book)):
            for j in range(i + 1, len(book)):
                assert (book[i] != book[j]).sum() >= 1

    def test_post_validation_holds(self):
        pack = vg_packing(3, 16, seed=1, candidates=1024)
        assert pack.achieved_min_distance >= pack.min_distance == 2

    def test_two_seed_runs_comparable(self):
        a = vg_packing(2, 16, seed=0, candidates=1024)
        b = vg_packing(2, 16, seed=99, candidates=1024)
        assert a.log_size <= 2 * b.log_size
        assert b.log_size <= 2 * a.log_size

    def test_small_depth_floor(self):
        pack = vg_packing(2, 4, seed=0, candidates=128)
        assert pack.min_distance == 1


class TestCalibration:
    def test_small_case_succeeds(self):
        res = calibrate_sample_complexity(2, 4, rho=0.1, delta=0.1, trials=120,
                                          seed=0)
        assert math.isfinite(res.n_star)
        assert res.success_rate >= 0.9
        assert res.bracket[0] == 8

    def test_deterministic(self):
        a = calibrate_sample_complexity(2, 4, rho=0.1, delta=0.1, trials=60, seed=5)
        b = calibrate_sample_complexity(2, 4, rho=0.1, delta=0.1, trials=60, seed=5)
        assert a.n_star == b.n_star
        assert a.probes == b.probes

    def test_grows_with_branching(self):
        # scaled-down version of the linear-in-m growth check
        ns = [calibrate_sample_complexity(m, 4, rho=0.1, delta=0.1, trials=150,
                                          seed=1).n_star for m in (2, 4, 8)]
        assert ns[0] < ns[1] < ns[2]
        assert ns[2] >= 2.0 * ns[0]

    def test_protocol_mode_calibration(self):
        tree = build_mary(2, 4, 1.0)
        emb = sarkar_embed(tree, k=2, kappa=36.0)
        cfg = ProtocolConfig(m=2, R=4, rho=0.1, mode="protocol",
                             representation=emb)
        res = calibrate_sample_complexity(2, 4, rho=0.1, delta=0.1, trials=60,
                                          seed=2, cfg=cfg)
        assert math.isfinite(res.n_star)
        assert res.success_rate >= 0.9


class TestSeparationExperiment:
    def test_rows_and_monotone_lipschitz(self):
        rows = separation_experiment([4, 6, 8], m=2, k=2, B=1.0, rho=0.1,
                                     delta=0.1, eta=0.1, seed=0, trials=60)
        assert [r["R"] for r in rows] == [4, 6, 8]
        for r in rows:
            assert math.isfinite(r["n_star"])
            assert r["corr_dist"] >= r["R"]
        assert rows[-1]["lip_lower_bound"] > rows[0]["lip_lower_bound"]

    def test_protocol_mode_small(self):
        rows = separation_experiment([3], m=2, k=2, rho=0.1, delta=0.1,
                                     eta=0.1, seed=3, trials=40, mode="protocol")
        assert math.isfinite(rows[0]["n_star"])


class TestStatisticalInvariants:
    def test_oracle_y_marginals(self):
        # P(Y=1 | C = theta_I) = 1 - rho and P(Y=1 | C != theta_I) = rho
        cfg = ProtocolConfig(m=3, R=5, rho=0.2)
        rng = np.random.default_rng(21)
        theta = random_theta(3, 5, rng)
        batch = sample(cfg, theta, rng, n=1_000_000)
        on = batch.child == theta[batch.depths]
        p_on = batch.y[on].mean()
        p_off = batch.y[~on].mean()
        s_on = math.sqrt(0.8 * 0.2 / on.sum())
        s_off = math.sqrt(0.8 * 0.2 / (~on).sum())
        assert abs(p_on - 0.8) <= 3 * s_on
        assert abs(p_off - 0.2) <= 3 * s_off

    def test_fano_lower_below_empirical_n_star(self):
        # with c = 1 the information bound sits below the calibrated n*
        for m, R in ((2, 6), (4, 5)):
            cal = calibrate_sample_complexity(m, R, rho=0.1, delta=0.1,
                                              trials=150, seed=7)
            fano = fano_constants(m, R, 0.1, c=1.0)
            assert fano.n_lower <= cal.n_star

    def test_n_star_fits_R_log_mR(self):
        # n*(R) tracks a * R log(mR) + b closely across the depth grid
        Rs = list(range(4, 13))
        ns = [calibrate_sample_complexity(2, R, rho=0.1, delta=0.1, trials=200,
                                          seed=11 + R).n_star for R in Rs]
        xs = np.array([R * math.log(2 * R) for R in Rs])
        ys = np.array(ns)
        a, b = np.polyfit(xs, ys, 1)
        fitted = a * xs + b
        ss_res = float(((ys - fitted) ** 2).sum())
        ss_tot = float(((ys - ys.mean()) ** 2).sum())
        assert 1.0 - ss_res / ss_tot >= 0.9
