"""Self-contained correctness checks behind the `validate` CLI command.

Every check is deterministic (fixed seeds), compares an implementation
against an independent construction (dense linear algebra, brute-force
integration, or Monte Carlo), and returns a pass/fail row for the table.
The quick level runs the algebraic checks in seconds; the full level adds
the Monte-Carlo oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import beamform, channel, gaussian, policy
from .beamform import GainSnapshot
from .gaussian import Posterior2
from .params import ChannelParams, RadioParams, Workspace


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _ws() -> Workspace:
    return Workspace(bounds=((0.0, 30.0), (0.0, 30.0)),
                     relay_region=((0.0, 30.0), (12.0, 18.0)),
                     cell=1.0, p_s=(15.0, 0.0), p_d=(15.0, 30.0))


def _prm(**kw) -> ChannelParams:
    base = dict(ell=3.0, rho=20.0, sigma_xi2=20.0, eta2=50.0, beta=10.0,
                gamma=5.0, delta=1.0, eps_mf=1.0)
    base.update(kw)
    return ChannelParams(**base)


def _radio() -> RadioParams:
    return RadioParams(p0=25.0, pc=25.0, sigma2=1.0, sigma_d2=1.0)


def _random_trajectory(rng, ws, n_slots, n_relays) -> np.ndarray:
    cells = ws.relay_cells()
    traj = np.empty((n_slots, n_relays, 2))
    for t in range(n_slots):
        pick = rng.choice(len(cells), size=n_relays, replace=False)
        traj[t] = cells[pick]
    return traj


def _random_posterior(rng, spread=3.0) -> Posterior2:
    """Random modest-covariance posterior; keeps Monte-Carlo noise workable."""
    mu = rng.uniform(-45.0, -5.0, size=2)
    a = rng.uniform(-1.0, 1.0, size=(2, 2))
    cov = a @ a.T + 0.05 * np.eye(2)
    cov *= spread / max(np.linalg.eigvalsh(cov).max(), 1e-12)
    return Posterior2(mu=mu, cov=cov)


# -- quick checks -------------------------------------------------------------

def check_joint_cov_psd() -> CheckResult:
    rng = np.random.default_rng(11)
    ws = _ws()
    worst = np.inf
    for _ in range(30):
        prm = _prm()
        traj = _random_trajectory(rng, ws, int(rng.integers(1, 7)), int(rng.integers(1, 6)))
        lam = np.linalg.eigvalsh(channel.build_joint_cov(traj, prm, ws)).min()
        worst = min(worst, lam - prm.sigma_xi2)
    prm0 = _prm(sigma_xi2=0.0)
    traj = _random_trajectory(rng, ws, 4, 3)
    lam0 = np.linalg.eigvalsh(channel.build_joint_cov(traj, prm0, ws)).min()
    ok = worst >= -1e-8 and lam0 >= -1e-8
    return CheckResult("joint-cov-psd", ok,
                       f"min margin {worst:.3e}, zero-mpath lambda_min {lam0:.3e}")


def check_cov_vs_ar_blocks() -> CheckResult:
    ws = _ws()
    prm = _prm()
    rng = np.random.default_rng(7)
    cells = ws.relay_cells()[rng.choice(180, size=4, replace=False)]
    n_t = 5
    traj = np.broadcast_to(cells, (n_t, len(cells), 2))
    direct = channel.build_joint_cov(traj, prm, ws)
    sigma_c, phi = channel.build_grid_prior(cells, prm, ws)
    m = sigma_c.shape[0]
    alt = np.empty_like(direct)
    for k in range(n_t):
        for l in range(n_t):
            blk = phi ** abs(k - l) * sigma_c
            if k == l:
                blk = blk + prm.sigma_xi2 * np.eye(m)
            alt[k * m:(k + 1) * m, l * m:(l + 1) * m] = blk
    err = float(np.abs(direct - alt).max())
    return CheckResult("cov-vs-ar-blocks", err <= 1e-10, f"max abs diff {err:.3e}")


def check_mil_vs_dense() -> CheckResult:
    ws = _ws()
    prm = _prm()
    rng = np.random.default_rng(23)
    h = gaussian.history_empty(2, prm, ws)
    worst = 0.0
    for _ in range(6):
        pos = _random_trajectory(rng, ws, 1, 2)[0]
        obs = rng.normal(-30.0, 8.0, size=4)
        h = gaussian.history_append(h, pos, obs, prm, ws)
        err = float(np.abs(h.inv - np.linalg.inv(h.joint_cov())).max())
        worst = max(worst, err)
    return CheckResult("mil-vs-dense", worst <= 1e-8, f"max abs diff {worst:.3e}")


def check_predict_dense_oracle() -> CheckResult:
    ws = _ws()
    prm = _prm()
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(5):
        n_r, n_t = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        traj = _random_trajectory(rng, ws, n_t, n_r)
        h = gaussian.history_empty(n_r, prm, ws)
        obs = rng.normal(-30.0, 8.0, size=(n_t, 2 * n_r))
        for t in range(n_t):
            h = gaussian.history_append(h, traj[t], obs[t], prm, ws)
        q = ws.relay_cells()[int(rng.integers(180))]
        post = gaussian.predict(h, q, prm, ws)
        mu_o, cov_o = _dense_conditioning(traj, obs.reshape(-1), q, prm, ws)
        worst = max(worst, float(np.abs(post.mu - mu_o).max()),
                    float(np.abs(post.cov - cov_o).max()))
    return CheckResult("predict-dense-oracle", worst <= 1e-8, f"max abs diff {worst:.3e}")


def _dense_conditioning(traj, obs_flat, q, prm, ws):
    """Brute-force Gaussian conditioning built sample-by-sample from the kernel."""
    n_t, n_r, _ = traj.shape
    samples = []
    for t in range(n_t):
        for ep in ("S", "D"):
            for j in range(n_r):
                samples.append((traj[t, j], t + 1, ep))
    n = len(samples)
    sig_oo = np.empty((n, n))
    for a, (pa, ka, ea) in enumerate(samples):
        for b, (pb, kb, eb) in enumerate(samples):
            v = channel.shadow_cov(pa, ka, ea, pb, kb, eb, prm, ws)
            sig_oo[a, b] = v + (prm.sigma_xi2 if a == b else 0.0)
    t_q = n_t + 1
    queries = ((q, t_q, "S"), (q, t_q, "D"))
    sig_qq = np.empty((2, 2))
    for i, (pi, ki, ei) in enumerate(queries):
        for j, (pj, kj, ej) in enumerate(queries):
            v = channel.shadow_cov(pi, ki, ei, pj, kj, ej, prm, ws)
            sig_qq[i, j] = v + (prm.sigma_xi2 if i == j else 0.0)
    sig_qo = np.empty((2, n))
    for i, (pi, ki, ei) in enumerate(queries):
        for a, (pa, ka, ea) in enumerate(samples):
            sig_qo[i, a] = channel.shadow_cov(pi, ki, ei, pa, ka, ea, prm, ws)
    mu_hist = np.array([channel.pathloss_db(p, ws.p_s if ep == "S" else ws.p_d) * prm.ell
                        for p, _, ep in samples])
    mu_q = np.array([channel.pathloss_db(q, ws.p_s) * prm.ell,
                     channel.pathloss_db(q, ws.p_d) * prm.ell])
    sol = np.linalg.solve(sig_oo, obs_flat - mu_hist)
    mu = mu_q + sig_qo @ sol
    cov = sig_qq - sig_qo @ np.linalg.solve(sig_oo, sig_qo.T)
    return mu, cov


def check_gh_rule() -> CheckResult:
    r2 = policy.gh_build(2)
    hand = (np.allclose(np.sort(r2.nodes), [-1.0, 1.0], atol=1e-12)
            and np.allclose(r2.weights, [0.5, 0.5], atol=1e-12))
    sums_ok = all(abs(policy.gh_build(m).weights.sum() - 1.0) <= 1e-12
                  for m in (1, 2, 3, 8, 16, 40, 64))
    rule = policy.gh_build(6)
    exact = True
    rng = np.random.default_rng(3)
    for _ in range(20):
        deg = rng.integers(0, 12, size=2)          # per-axis degree <= 11 = 2*6 - 1
        approx = scale = 0.0
        for q1, w1 in zip(rule.nodes, rule.weights):
            for q2, w2 in zip(rule.nodes, rule.weights):
                term = w1 * w2 * q1 ** deg[0] * q2 ** deg[1]
                approx += term
                scale += abs(term)
        truth = _normal_moment(int(deg[0])) * _normal_moment(int(deg[1]))
        exact &= abs(approx - truth) <= 1e-10 * max(1.0, scale)
    ok = hand and sums_ok and exact
    return CheckResult("gh-rule", ok,
                       f"hand M=2 {'ok' if hand else 'BAD'}, weight sums "
                       f"{'ok' if sums_ok else 'BAD'}, polynomial exactness "
                       f"{'ok' if exact else 'BAD'}")


def _normal_moment(k: int) -> float:
    if k % 2 == 1:
        return 0.0
    return float(np.prod(np.arange(k - 1, 0, -2))) if k else 1.0


def trapezoid_expected_sinr(post: Posterior2, r: RadioParams, rho: float,
                            n_pts: int = 1500, half_width: float = 8.0) -> float:
    """Dense 2-d trapezoid integration of the per-relay SINR; GH oracle."""
    sd = np.sqrt(np.diag(post.cov))
    xs = np.linspace(post.mu[0] - half_width * sd[0], post.mu[0] + half_width * sd[0], n_pts)
    ys = np.linspace(post.mu[1] - half_width * sd[1], post.mu[1] + half_width * sd[1], n_pts)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    z = np.stack([gx - post.mu[0], gy - post.mu[1]], axis=-1)
    prec = np.linalg.inv(post.cov)
    quad = np.einsum("...i,ij,...j->...", z, prec, z)
    pdf = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(np.linalg.det(post.cov)))
    vals = policy.sinr_integrand(np.stack([gx, gy], axis=-1), r, rho)
    inner = np.trapezoid(vals * pdf, ys, axis=1)
    return float(np.trapezoid(inner, xs))


def check_quadrature_vs_trapezoid() -> CheckResult:
    rng = np.random.default_rng(5)
    r = _radio()
    rule = policy.gh_build(30)
    worst = 0.0
    for _ in range(3):
        post = _random_posterior(rng, spread=8.0)
        gh = policy.obj_gh(post, rule, r, 20.0)
        ref = trapezoid_expected_sinr(post, r, 20.0)
        worst = max(worst, abs(gh - ref) / abs(ref))
    return CheckResult("quadrature-vs-trapezoid", worst <= 1e-6, f"max rel diff {worst:.3e}")


def check_jensen_ordering() -> CheckResult:
    rng = np.random.default_rng(17)
    r = _radio()
    bad = 0
    for _ in range(2000):
        post = _random_posterior(rng, spread=float(rng.uniform(0.1, 40.0)))
        if policy.obj_h1(post, r, 20.0) > policy.obj_h2(post, r, 20.0):
            bad += 1
    return CheckResult("jensen-ordering", bad == 0, f"{bad} violations in 2000 draws")


def check_beamform_equivalence() -> CheckResult:
    rng = np.random.default_rng(29)
    r = _radio()
    worst_v = worst_w = worst_p = 0.0
    for _ in range(300):
        n = int(rng.integers(1, 9))
        s = GainSnapshot(rng.lognormal(-1.0, 1.0, n), rng.lognormal(-1.0, 1.0, n))
        va = beamform.v_second_stage(s, r)
        ve = beamform.v_second_stage_eig(s, r)
        worst_v = max(worst_v, abs(va - ve) / va)
        w = beamform.optimal_weights(s, r)
        worst_w = max(worst_w, abs(beamform.sinr_of_weights(w, s, r) - va) / va)
        worst_p = max(worst_p, abs(beamform.relay_power(w, s, r) - r.pc) / r.pc)
    ok = worst_v <= 1e-9 and worst_w <= 1e-9 and worst_p <= 1e-9
    return CheckResult("beamform-equivalence", ok,
                       f"value {worst_v:.2e}, weights {worst_w:.2e}, power {worst_p:.2e}")


def check_sqrt2x2() -> CheckResult:
    rng = np.random.default_rng(41)
    worst = 0.0
    for _ in range(300):
        a = rng.normal(size=(2, 2))
        s = a @ a.T * rng.uniform(0.01, 50.0)
        root = gaussian.sqrt2x2(s)
        worst = max(worst, float(np.abs(root @ root - s).max()) / max(1.0, float(np.abs(s).max())))
    ident = float(np.abs(gaussian.sqrt2x2(np.eye(2)) - np.eye(2)).max())
    diag = float(np.abs(gaussian.sqrt2x2(np.diag([4.0, 9.0])) - np.diag([2.0, 3.0])).max())
    ok = worst <= 1e-10 and ident <= 1e-14 and diag <= 1e-14
    return CheckResult("sqrt2x2", ok, f"max scaled residual {worst:.3e}")


# -- full-level Monte-Carlo checks --------------------------------------------

def check_cond_moment_mc() -> CheckResult:
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(6):
        post = _random_posterior(rng)
        root = np.linalg.cholesky(post.cov + 1e-12 * np.eye(2))
        z = rng.standard_normal((1_000_000, 2)) @ root.T + post.mu
        for m, n in ((-2, 0), (0, -2), (-2, -2), (-4, -4), (2, 2)):
            closed = gaussian.cond_moment(post, m, n, 20.0)
            mc = float(np.mean(np.exp(channel.DB_TO_LN_AMP * (m * z[:, 0] + n * z[:, 1]))))
            mc *= 10.0 ** ((m + n) * 20.0 / 20.0)
            worst = max(worst, abs(closed - mc) / closed)
    return CheckResult("cond-moment-mc", worst <= 0.01, f"max rel err {worst:.4f}")


def check_ar1_covariance_mc() -> CheckResult:
    ws = _ws()
    prm = _prm()
    rng = np.random.default_rng(113)
    cells = ws.relay_cells()[rng.choice(180, size=5, replace=False)]
    n = 100_000
    grid = channel.sample_grid_field(cells, n + 3, prm, ws, seed=997)
    sigma_c, phi = channel.build_grid_prior(cells, prm, ws)
    x = grid.shadow
    worst = 0.0
    for lag in range(4):
        emp = x[:n].T @ x[lag:n + lag] / n
        truth = phi ** lag * sigma_c
        # asymptotic std err of lagged second moments along one chain
        var_d = np.diag(sigma_c)
        base = np.outer(var_d, var_d) * (1 + phi ** 2) / (1 - phi ** 2)
        extra = sigma_c ** 2 * ((2 * lag + 1) * phi ** (2 * lag)
                                + 2 * phi ** (2 * lag + 2) / (1 - phi ** 2))
        se = np.sqrt((base + extra) / n)
        worst = max(worst, float(np.abs(emp - truth).max() / se.min()))
        if np.any(np.abs(emp - truth) > 3.0 * se):
            return CheckResult("ar1-covariance-mc", False,
                               f"lag {lag} deviates beyond 3 std errors")
    return CheckResult("ar1-covariance-mc", True, f"worst deviation {worst:.2f} (limit 3) std errors")


def check_vii_sq_expansion_mc() -> CheckResult:
    rng = np.random.default_rng(131)
    r = _radio()
    rho = 20.0
    worst = 0.0
    for _ in range(4):
        post = _random_posterior(rng)
        closed = float(policy._mean_vii_sq(post.mu[None, :], post.cov[None, :, :], r, rho)[0])
        root = np.linalg.cholesky(post.cov + 1e-12 * np.eye(2))
        z = rng.standard_normal((1_000_000, 2)) @ root.T + post.mu
        f2 = channel.field_to_gain(z[:, 0], rho) ** 2
        g2 = channel.field_to_gain(z[:, 1], rho) ** 2
        a, b, c = policy._vii_coeffs(r)
        vii = a / g2 + b / f2 + c / (f2 * g2)
        mc = float(np.mean(vii ** 2))
        worst = max(worst, abs(closed - mc) / closed)
    return CheckResult("vii-sq-expansion-mc", worst <= 0.01, f"max rel err {worst:.4f}")


QUICK_CHECKS = (
    check_joint_cov_psd,
    check_cov_vs_ar_blocks,
    check_mil_vs_dense,
    check_predict_dense_oracle,
    check_gh_rule,
    check_quadrature_vs_trapezoid,
    check_jensen_ordering,
    check_beamform_equivalence,
    check_sqrt2x2,
)

FULL_CHECKS = QUICK_CHECKS + (
    check_cond_moment_mc,
    check_ar1_covariance_mc,
    check_vii_sq_expansion_mc,
)


def run_checks(level: str = "quick") -> list[CheckResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    checks = QUICK_CHECKS if level == "quick" else FULL_CHECKS
    return [fn() for fn in checks]
