import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import relaysim as rs
from relaysim import channel
from conftest import random_trajectory


class TestPathloss:
    def test_unit_distance_is_zero(self):
        assert rs.pathloss_db([1.0, 0.0], [0.0, 0.0]) == 0.0

    def test_known_value(self):
        # -10*log10(12), point twelve units above the anchor
        assert rs.pathloss_db([15.0, 12.0], [15.0, 0.0]) == pytest.approx(
            -10.79181246047625, abs=1e-12)

    def test_coincident_points_raise(self):
        with pytest.raises(ValueError):
            rs.pathloss_db([3.0, 4.0], [3.0, 4.0])


class TestShadowCov:
    def test_zero_lag_same_endpoint(self, prm, ws):
        v = rs.shadow_cov([4.5, 13.5], 2, "S", [4.5, 13.5], 2, "S", prm, ws)
        assert v == pytest.approx(50.0)

    def test_cross_endpoint_attenuation(self, prm, ws):
        # |p_s - p_d| = 30, delta = 1
        v = rs.shadow_cov([4.5, 13.5], 2, "S", [4.5, 13.5], 2, "D", prm, ws)
        assert v == pytest.approx(50.0 * math.exp(-30.0), rel=1e-12)

    def test_one_slot_lag(self, prm, ws):
        v = rs.shadow_cov([4.5, 13.5], 3, "S", [4.5, 13.5], 2, "S", prm, ws)
        assert v == pytest.approx(40.936537653899094, rel=1e-12)

    @given(dx=st.floats(-20, 20), dy=st.floats(-5, 5),
           k=st.integers(1, 9), l=st.integers(1, 9),
           a=st.sampled_from("SD"), b=st.sampled_from("SD"))
    def test_symmetry_and_range(self, prm, ws, dx, dy, k, l, a, b):
        p = [10.0, 14.0]
        q = [10.0 + dx, 14.0 + dy]
        v1 = rs.shadow_cov(p, k, a, q, l, b, prm, ws)
        v2 = rs.shadow_cov(q, l, b, p, k, a, prm, ws)
        assert v1 == pytest.approx(v2, rel=1e-12)
        assert 0.0 <= v1 <= prm.eta2 + 1e-12


class TestMpathCov:
    def test_zero_lag(self, prm):
        assert rs.mpath_cov([0.0, 0.0], prm) == pytest.approx(20.0)

    def test_support_boundary(self, prm):
        assert rs.mpath_cov([prm.eps_mf, 0.0], prm) == 0.0

    def test_half_radius(self, prm):
        assert rs.mpath_cov([0.5 * prm.eps_mf, 0.0], prm) == pytest.approx(6.25)

    @given(r=st.floats(0.0, 3.0), ang=st.floats(0, 2 * math.pi))
    def test_support_and_continuity(self, prm, r, ang):
        tau = [r * math.cos(ang), r * math.sin(ang)]
        v = rs.mpath_cov(tau, prm)
        if r >= prm.eps_mf:
            assert v == 0.0
        else:
            assert 0.0 <= v <= prm.sigma_xi2
        near = rs.mpath_cov([prm.eps_mf * (1 - 1e-9), 0.0], prm)
        assert abs(near) < 1e-6  # continuous at the kernel edge


class TestJointCov:
    def test_single_relay_single_slot_block(self, prm, ws):
        got = rs.build_joint_cov(np.array([[[15.5, 14.5]]]), prm, ws)
        kap = channel.kappa(prm, ws)
        want = np.array([[70.0, 50.0 * kap], [50.0 * kap, 70.0]])
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_lemma_lower_bound_with_multipath(self, prm, ws):
        rng = np.random.default_rng(2)
        for _ in range(25):
            traj = random_trajectory(ws, rng, int(rng.integers(1, 6)), int(rng.integers(1, 7)))
            lam = np.linalg.eigvalsh(rs.build_joint_cov(traj, prm, ws)).min()
            assert lam >= prm.sigma_xi2 - 1e-8

    def test_psd_without_multipath(self, ws):
        prm0 = rs.ChannelParams(ell=3, rho=20, sigma_xi2=0.0, eta2=50, beta=10,
                                gamma=5, delta=1, eps_mf=1.0)
        rng = np.random.default_rng(3)
        traj = random_trajectory(ws, rng, 4, 5)
        lam = np.linalg.eigvalsh(rs.build_joint_cov(traj, prm0, ws)).min()
        assert lam >= -1e-8

    def test_separation_violation_rejected(self, prm, ws):
        c = ws.snap([10.2, 14.7])
        traj = np.array([[c, c]])  # two relays in one cell
        with pytest.raises(ValueError, match="separation"):
            rs.build_joint_cov(traj, prm, ws)

    def test_matches_scalar_kernel(self, prm, ws):
        # entrywise agreement with the one-pair covariance function
        rng = np.random.default_rng(4)
        traj = random_trajectory(ws, rng, 2, 2)
        got = rs.build_joint_cov(traj, prm, ws)
        idx = [(k, e, j) for k in range(2) for e in "SD" for j in range(2)]
        for a, (k, ea, i) in enumerate(idx):
            for b, (l, eb, j) in enumerate(idx):
                want = rs.shadow_cov(traj[k, i], k, ea, traj[l, j], l, eb, prm, ws)
                if a == b:
                    want += prm.sigma_xi2
                assert got[a, b] == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_time_invariant_equals_ar_blocks(self, prm, ws):
        # direct assembly against the stationary (prior, phi) block construction
        rng = np.random.default_rng(5)
        cells = ws.relay_cells()[rng.choice(180, size=3, replace=False)]
        n_t = 4
        direct = rs.build_joint_cov(np.broadcast_to(cells, (n_t, 3, 2)), prm, ws)
        sigma_c, phi = rs.build_grid_prior(cells, prm, ws)
        m = 6
        for k in range(n_t):
            for l in range(n_t):
                blk = phi ** abs(k - l) * sigma_c + (prm.sigma_xi2 * np.eye(m) if k == l else 0.0)
                err = np.abs(direct[k * m:(k + 1) * m, l * m:(l + 1) * m] - blk).max()
                assert err <= 1e-10


class TestGridPrior:
    def test_phi(self, prm, ws):
        _, phi = rs.build_grid_prior(np.array([[3.5, 13.5]]), prm, ws)
        assert phi == pytest.approx(0.8187307530779818, rel=1e-14)

    def test_single_cell_prior(self, prm, ws):
        sigma_c, _ = rs.build_grid_prior(np.array([[3.5, 13.5]]), prm, ws)
        kap = channel.kappa(prm, ws)
        np.testing.assert_allclose(sigma_c, [[50.0, 50.0 * kap], [50.0 * kap, 50.0]],
                                   rtol=1e-12)

    def test_huge_delta_makes_endpoints_identical(self, ws):
        prm = rs.ChannelParams(ell=3, rho=20, sigma_xi2=20, eta2=50, beta=10,
                               gamma=5, delta=1e12, eps_mf=1.0)
        sigma_c, _ = rs.build_grid_prior(np.array([[3.5, 13.5]]), prm, ws)
        assert np.linalg.matrix_rank(sigma_c, tol=1e-6) == 1
        # jitter path: sampling from the rank-deficient prior must still work
        grid = rs.sample_grid_field(np.array([[3.5, 13.5]]), 3, prm, ws, seed=0)
        assert np.all(np.isfinite(grid.shadow))


class TestSampleGridField:
    def test_reproducible(self, prm, ws):
        cells = ws.relay_cells()[:6]
        a = rs.sample_grid_field(cells, 7, prm, ws, seed=123)
        b = rs.sample_grid_field(cells, 7, prm, ws, seed=123)
        assert np.array_equal(a.shadow, b.shadow) and np.array_equal(a.mpath, b.mpath)

    def test_distinct_seeds_differ(self, prm, ws):
        cells = ws.relay_cells()[:6]
        a = rs.sample_grid_field(cells, 7, prm, ws, seed=123)
        b = rs.sample_grid_field(cells, 7, prm, ws, seed=124)
        assert not np.array_equal(a.shadow, b.shadow)

    def test_frozen_field_limit(self, ws):
        prm = rs.ChannelParams(ell=3, rho=20, sigma_xi2=20, eta2=50, beta=10,
                               gamma=1e6, delta=1, eps_mf=1.0)
        grid = rs.sample_grid_field(ws.relay_cells()[:4], 40, prm, ws, seed=11)
        drift = np.abs(grid.shadow - grid.shadow[0]).max()
        assert drift < 0.5

    def test_stationary_variance_and_lag1(self, prm, ws):
        # one long chain; std errors widened for temporal autocorrelation
        cells = ws.relay_cells()[:2]
        n = 100_000
        grid = rs.sample_grid_field(cells, n + 1, prm, ws, seed=77)
        phi = math.exp(-1.0 / prm.gamma)
        x = grid.shadow[:, 0]
        var_hat = np.mean(x * x)
        se_var = prm.eta2 * math.sqrt(2.0 * (1 + phi ** 2) / ((1 - phi ** 2) * n))
        assert abs(var_hat - prm.eta2) <= 3 * se_var
        lag1_hat = np.mean(x[:-1] * x[1:])
        se_lag = prm.eta2 * math.sqrt(((1 + phi ** 2) / (1 - phi ** 2)
                                       + 3 * phi ** 2 + 2 * phi ** 4 / (1 - phi ** 2)) / n)
        assert abs(lag1_hat - phi * prm.eta2) <= 3 * se_lag


class TestFieldToGain:
    def test_identity_point(self):
        assert rs.field_to_gain(0.0, 0.0) == pytest.approx(1.0)

    def test_twenty_db(self):
        assert rs.field_to_gain(20.0, 0.0) == pytest.approx(10.0, rel=1e-12)

    def test_offset(self):
        assert rs.field_to_gain(0.0, 20.0) == pytest.approx(10.0, rel=1e-12)

    @given(f=st.floats(-120, 60), g=st.floats(-120, 60))
    def test_positive_and_monotone(self, f, g):
        lo, hi = sorted((f, g))
        assert rs.field_to_gain(lo, 20.0) > 0
        assert rs.field_to_gain(lo, 20.0) <= rs.field_to_gain(hi, 20.0)


class TestEvalF:
    def test_additive_model(self, prm, ws):
        cells = ws.relay_cells()[:3]
        grid = rs.sample_grid_field(cells, 2, prm, ws, seed=9)
        c = cells[1]
        want = (rs.pathloss_db(c, ws.p_s) * prm.ell + grid.shadow[0, 1] + grid.mpath[0, 1])
        assert rs.eval_F(grid, c, 1, "S", prm, ws) == pytest.approx(want, rel=1e-12)
        want_d = (rs.pathloss_db(c, ws.p_d) * prm.ell
                  + grid.shadow[0, len(cells) + 1] + grid.mpath[0, len(cells) + 1])
        assert rs.eval_F(grid, c, 1, "D", prm, ws) == pytest.approx(want_d, rel=1e-12)

    def test_zero_noise_unit_distance_gives_zero(self, prm):
        # with no shadowing/multipath and the cell one unit from the anchor,
        # the log-scale value is exactly zero for any path-loss exponent
        small = rs.Workspace(bounds=((0.0, 10.0), (0.0, 10.0)),
                             relay_region=((0.0, 10.0), (3.0, 4.0)),
                             cell=1.0, p_s=(4.5, 2.5), p_d=(4.5, 9.5))
        cell = small.snap([4.5, 3.5])      # distance 1 from p_s
        cells = cell[None, :]
        grid = rs.GridField(cells=cells, shadow=np.zeros((1, 2)),
                            mpath=np.zeros((1, 2)), n_slots=1)
        assert rs.eval_F(grid, cell, 1, "S", prm, small) == 0.0

    def test_out_of_range_errors(self, prm, ws):
        cells = ws.relay_cells()[:3]
        grid = rs.sample_grid_field(cells, 2, prm, ws, seed=9)
        with pytest.raises(IndexError):
            rs.eval_F(grid, cells[0], 3, "S", prm, ws)
        with pytest.raises(IndexError):
            rs.eval_F(grid, ws.relay_cells()[10], 1, "S", prm, ws)

    def test_mean_is_pathloss_term(self, prm, ws):
        # long-run average over slots converges to the deterministic term
        cells = ws.relay_cells()[:1]
        n = 100_000
        grid = rs.sample_grid_field(cells, n, prm, ws, seed=31)
        phi = math.exp(-1.0 / prm.gamma)
        vals = np.array([grid.shadow[:, 0] + grid.mpath[:, 0]]).ravel()
        mean_noise = vals.mean()
        se = math.sqrt((prm.eta2 * (1 + phi) / (1 - phi) + prm.sigma_xi2) / n)
        assert abs(mean_noise) <= 3 * se
        want = rs.pathloss_db(cells[0], ws.p_s) * prm.ell
        got = np.mean([rs.eval_F(grid, cells[0], t, "S", prm, ws) for t in range(1, 200)])
        assert got == pytest.approx(want + vals[:199].mean(), abs=1e-9)
