import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import relaysim as rs
from relaysim import channel, gaussian
from conftest import random_cells, random_posterior, random_trajectory


def dense_conditioning(traj, obs_flat, q, prm, ws):
    """Brute-force oracle: assemble the full joint covariance sample by
    sample from the scalar kernel and condition densely."""
    n_t, n_r, _ = traj.shape
    samples = [(traj[t, j], t + 1, ep) for t in range(n_t) for ep in "SD" for j in range(n_r)]
    n = len(samples)
    sig = np.empty((n, n))
    for a, (pa, ka, ea) in enumerate(samples):
        for b, (pb, kb, eb) in enumerate(samples):
            sig[a, b] = rs.shadow_cov(pa, ka, ea, pb, kb, eb, prm, ws) \
                + (prm.sigma_xi2 if a == b else 0.0)
    t_q = n_t + 1
    qs = ((q, t_q, "S"), (q, t_q, "D"))
    sig_qq = np.array([[rs.shadow_cov(*qi[:3], *qj[:3], prm, ws)
                        + (prm.sigma_xi2 if i == j else 0.0)
                        for j, qj in enumerate(qs)] for i, qi in enumerate(qs)])
    sig_qo = np.array([[rs.shadow_cov(*qi[:3], *sa[:3], prm, ws) for sa in samples]
                       for qi in qs])
    mu_hist = np.array([rs.pathloss_db(p, ws.p_s if e == "S" else ws.p_d) * prm.ell
                        for p, _, e in samples])
    mu_q = np.array([rs.pathloss_db(q, ws.p_s) * prm.ell,
                     rs.pathloss_db(q, ws.p_d) * prm.ell])
    mu = mu_q + sig_qo @ np.linalg.solve(sig, obs_flat - mu_hist)
    cov = sig_qq - sig_qo @ np.linalg.solve(sig, sig_qo.T)
    return mu, cov


def build_history(ws, prm, rng, n_slots, n_relays):
    traj = random_trajectory(ws, rng, n_slots, n_relays)
    obs = rng.normal(-35.0, 8.0, size=(n_slots, 2 * n_relays))
    h = rs.history_empty(n_relays, prm, ws)
    for t in range(n_slots):
        h = rs.history_append(h, traj[t], obs[t], prm, ws)
    return h, traj, obs


class TestHistoryAppend:
    def test_first_append_inverts_single_block(self, prm, ws):
        rng = np.random.default_rng(0)
        h, traj, _ = build_history(ws, prm, rng, 1, 3)
        want = np.linalg.inv(rs.build_joint_cov(traj, prm, ws))
        np.testing.assert_allclose(h.inv, want, atol=1e-10)

    def test_mil_matches_dense_every_append(self, prm, ws):
        rng = np.random.default_rng(1)
        h = rs.history_empty(2, prm, ws)
        for t in range(8):
            pos = random_cells(ws, rng, 2)
            h = rs.history_append(h, pos, rng.normal(-35, 8, 4), prm, ws)
            err = np.abs(h.inv - np.linalg.inv(h.joint_cov())).max()
            assert err <= 1e-8

    def test_mil_stays_tight_over_long_horizon(self, prm, ws):
        # the recursion must not accumulate error over realistic horizons
        rng = np.random.default_rng(2)
        h, _, _ = build_history(ws, prm, rng, 40, 4)
        err = np.abs(h.inv - np.linalg.inv(h.joint_cov())).max()
        assert err <= 1e-8

    def test_decoupled_slots_give_block_diagonal_inverse(self, ws):
        # huge gamma decay: cross-slot correlation ~ 0, inverse ~ per-slot blocks
        prm = rs.ChannelParams(ell=3, rho=20, sigma_xi2=20, eta2=50, beta=10,
                               gamma=1e-3, delta=1, eps_mf=1.0)
        rng = np.random.default_rng(3)
        h, traj, _ = build_history(ws, prm, rng, 2, 2)
        blocks = [np.linalg.inv(rs.build_joint_cov(traj[t:t + 1], prm, ws)) for t in range(2)]
        want = np.zeros((8, 8))
        want[:4, :4], want[4:, 4:] = blocks
        np.testing.assert_allclose(h.inv, want, atol=1e-10)

    def test_max_slots_truncates_and_rebuilds(self, prm, ws):
        rng = np.random.default_rng(4)
        h = rs.history_empty(2, prm, ws, max_slots=3)
        trajs, obss = [], []
        for _ in range(5):
            pos = random_cells(ws, rng, 2)
            obs = rng.normal(-35, 8, 4)
            trajs.append(pos)
            obss.append(obs)
            h = rs.history_append(h, pos, obs, prm, ws)
        assert h.slots == 3
        np.testing.assert_allclose(h.positions, np.stack(trajs[2:]), atol=0)
        err = np.abs(h.inv - np.linalg.inv(h.joint_cov())).max()
        assert err <= 1e-8

    def test_separation_enforced(self, prm, ws):
        h = rs.history_empty(2, prm, ws)
        c = ws.snap([4.2, 14.2])
        with pytest.raises(ValueError):
            rs.history_append(h, np.array([c, c]), np.zeros(4), prm, ws)


class TestPredict:
    def test_empty_history_returns_prior(self, prm, ws):
        h = rs.history_empty(2, prm, ws)
        p = ws.snap([7.3, 13.8])
        post = rs.predict(h, p, prm, ws)
        kap = channel.kappa(prm, ws)
        np.testing.assert_allclose(
            post.mu, [rs.pathloss_db(p, ws.p_s) * prm.ell,
                      rs.pathloss_db(p, ws.p_d) * prm.ell], rtol=1e-12)
        np.testing.assert_allclose(
            post.cov, [[70.0, 50.0 * kap], [50.0 * kap, 70.0]], rtol=1e-12)

    def test_single_revisit_closed_form(self, prm, ws):
        # one relay, one past slot at the query point: conditioning vector is
        # [eta2*exp(-1/gamma), kappa*eta2*exp(-1/gamma)] per endpoint
        p = ws.snap([9.6, 15.1])
        obs = np.array([-30.0, -55.0])
        h = rs.history_empty(1, prm, ws)
        h = rs.history_append(h, p[None, :], obs, prm, ws)
        post = rs.predict(h, p, prm, ws)

        kap = channel.kappa(prm, ws)
        decay = math.exp(-1.0 / prm.gamma)
        c = prm.eta2 * decay * np.array([[1.0, kap], [kap, 1.0]])
        prior = np.array([[70.0, 50.0 * kap], [50.0 * kap, 70.0]])
        mu0 = np.array([rs.pathloss_db(p, ws.p_s) * prm.ell,
                        rs.pathloss_db(p, ws.p_d) * prm.ell])
        mu_want = mu0 + c @ np.linalg.solve(prior, obs - mu0)
        cov_want = prior - c @ np.linalg.solve(prior, c.T)
        np.testing.assert_allclose(post.mu, mu_want, rtol=1e-10)
        np.testing.assert_allclose(post.cov, cov_want, rtol=1e-10)

    def test_matches_dense_conditioning(self, prm, ws):
        rng = np.random.default_rng(5)
        for _ in range(6):
            n_r, n_t = int(rng.integers(1, 3)), int(rng.integers(1, 5))
            h, traj, obs = build_history(ws, prm, rng, n_t, n_r)
            q = random_cells(ws, rng, 1)[0]
            post = rs.predict(h, q, prm, ws)
            mu_o, cov_o = dense_conditioning(traj, obs.reshape(-1), q, prm, ws)
            np.testing.assert_allclose(post.mu, mu_o, atol=1e-8)
            np.testing.assert_allclose(post.cov, cov_o, atol=1e-8)

    def test_far_history_leaves_prior(self, ws):
        # tiny correlation distance: remote observations carry no information
        prm = rs.ChannelParams(ell=3, rho=20, sigma_xi2=20, eta2=50, beta=1e-3,
                               gamma=5, delta=1, eps_mf=1.0)
        rng = np.random.default_rng(6)
        h = rs.history_empty(1, prm, ws)
        h = rs.history_append(h, ws.snap([1.2, 12.3])[None, :], rng.normal(-40, 5, 2), prm, ws)
        q = ws.snap([28.9, 17.8])
        post = rs.predict(h, q, prm, ws)
        kap = channel.kappa(prm, ws)
        np.testing.assert_allclose(post.cov, [[70.0, 50.0 * kap], [50.0 * kap, 70.0]],
                                   atol=1e-9)

    def test_information_never_increases_variance(self, prm, ws):
        # for relays parked at fixed cells the model is slot-stationary, so
        # predicting one slot ahead from t+1 observed slots conditions on
        # strictly more information than from t slots: posterior variances
        # must be nonincreasing in history depth
        rng = np.random.default_rng(7)
        for _ in range(5):
            pos = random_cells(ws, rng, 2)
            q = random_cells(ws, rng, 1)[0]
            h = rs.history_empty(2, prm, ws)
            prev = np.array([70.0, 70.0])
            for _ in range(5):
                h = rs.history_append(h, pos, rng.normal(-35, 8, 4), prm, ws)
                d = np.diag(rs.predict(h, q, prm, ws).cov)
                assert np.all(d <= prev + 1e-9)
                prev = d

    def test_posterior_trace_bounded(self, prm, ws):
        rng = np.random.default_rng(8)
        h, _, _ = build_history(ws, prm, rng, 4, 2)
        for _ in range(20):
            q = random_cells(ws, rng, 1)[0]
            post = rs.predict(h, q, prm, ws)
            assert np.trace(post.cov) <= 2 * (prm.eta2 + prm.sigma_xi2) + 1e-9
            assert np.linalg.eigvalsh(post.cov).min() >= -1e-9


class TestCondMoment:
    def test_empty_product_is_one(self):
        post = rs.Posterior2(np.array([-20.0, -30.0]), np.array([[5.0, 1.0], [1.0, 4.0]]))
        assert rs.cond_moment(post, 0, 0, 20.0) == 1.0

    def test_gaussian_mgf_value(self):
        # m=2, zero mean, unit covariance, rho=20: 100*exp(2*(ln10/20)^2),
        # frozen from the closed form and confirmed by the Monte-Carlo check
        post = rs.Posterior2(np.zeros(2), np.eye(2))
        assert rs.cond_moment(post, 2, 0, 20.0) == pytest.approx(
            102.68639927219596, rel=1e-12)

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(9)
        for _ in range(4):
            post = random_posterior(rng)
            root = np.linalg.cholesky(post.cov + 1e-12 * np.eye(2))
            z = rng.standard_normal((1_000_000, 2)) @ root.T + post.mu
            for m, n in ((-2, 0), (-2, -2), (2, 2), (-4, -4)):
                closed = rs.cond_moment(post, m, n, 20.0)
                mc = 10.0 ** ((m + n) * 1.0) * np.mean(
                    np.exp(channel.DB_TO_LN_AMP * (m * z[:, 0] + n * z[:, 1])))
                assert abs(closed - mc) / closed <= 0.01

    @given(dm=st.floats(-10, 10), dn=st.floats(-10, 10),
           m=st.integers(-4, 4), n=st.integers(-4, 4))
    def test_log_linear_in_mean(self, dm, dn, m, n):
        cov = np.array([[3.0, 0.7], [0.7, 2.0]])
        base = rs.Posterior2(np.array([-25.0, -30.0]), cov)
        shifted = rs.Posterior2(base.mu + np.array([dm, dn]), cov)
        ratio = rs.cond_moment(shifted, m, n, 20.0) / rs.cond_moment(base, m, n, 20.0)
        want = math.exp(channel.DB_TO_LN_AMP * (m * dm + n * dn))
        assert ratio == pytest.approx(want, rel=1e-9)


class TestSqrt2x2:
    def test_identity(self):
        np.testing.assert_allclose(rs.sqrt2x2(np.eye(2)), np.eye(2), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(rs.sqrt2x2(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]),
                                   atol=1e-14)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            rs.sqrt2x2(np.zeros((2, 2)))

    def test_not_psd_rejected(self):
        with pytest.raises(ValueError):
            rs.sqrt2x2(np.array([[-4.0, 0.0], [0.0, -1.0]]))

    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5),
           d=st.floats(-5, 5), s=st.floats(0.01, 100.0))
    def test_square_recovers_input(self, a, b, c, d, s):
        m = np.array([[a, b], [c, d]])
        psd = s * (m @ m.T) + 1e-6 * np.eye(2)
        root = rs.sqrt2x2(psd)
        assert np.abs(root @ root - psd).max() <= 1e-10 * max(1.0, np.abs(psd).max())
        assert np.linalg.eigvalsh(root).min() >= -1e-12
