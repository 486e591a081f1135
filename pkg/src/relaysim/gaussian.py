"""Conditional-Gaussian channel prediction along observed relay trajectories.

A `History` records, slot by slot, where the relays were and which log-scale
gains they saw there. Conditioning the jointly Gaussian field on those
observations gives, at any query point, a bivariate normal for the next
slot's (source-side, destination-side) log-gains; `predict` evaluates its
closed-form mean and covariance. The inverse of the growing observation
covariance is maintained recursively through the block-inversion identity
with a Schur complement, so each appended slot costs O(R^3 t^2) instead of
a fresh O(R^3 t^3) inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .channel import DB_TO_LN_AMP, _endpoint_expand, _pairwise_dist, check_separation, kappa
from .params import ChannelParams, NumericalError, Workspace


@dataclass
class Posterior2:
    """Bivariate normal for [F(p), G(p)] in dB: mean (2,) and covariance (2,2)."""

    mu: np.ndarray
    cov: np.ndarray


def _prior_block(prm: ChannelParams, ws: Workspace) -> np.ndarray:
    kap = kappa(prm, ws)
    v = prm.eta2 + prm.sigma_xi2
    c = prm.eta2 * kap
    return np.array([[v, c], [c, v]])


def _prior_mean_at(points: np.ndarray, prm: ChannelParams, ws: Workspace) -> np.ndarray:
    """Path-loss means [alpha_S*ell, alpha_D*ell] for query points (Q,2) -> (Q,2)."""
    ds = np.linalg.norm(points - np.asarray(ws.p_s, dtype=float), axis=1)
    dd = np.linalg.norm(points - np.asarray(ws.p_d, dtype=float), axis=1)
    if np.any(ds <= 0) or np.any(dd <= 0):
        raise ValueError("query point coincides with a terminal anchor")
    out = np.empty((len(points), 2))
    out[:, 0] = -10.0 * np.log10(ds) * prm.ell
    out[:, 1] = -10.0 * np.log10(dd) * prm.ell
    return out


def _slot_block(pos_a: np.ndarray, pos_b: np.ndarray, lag: int,
                prm: ChannelParams, kap: float) -> np.ndarray:
    """Shadowing covariance block between two slots, (2R, 2R), no multipath."""
    d = _pairwise_dist(pos_a, pos_b)
    base = prm.eta2 * np.exp(-d / prm.beta) * math.exp(-abs(lag) / prm.gamma)
    return _endpoint_expand(base, kap)


class History:
    """Per-trial record of relay positions and observed dB gains.

    Treated as a value: `history_append` returns a new instance sharing the
    per-slot data. The cached covariance inverse advances lazily through the
    block recursion the first time it is read after an append, so runs that
    never predict (oracle, agnostic, stay) pay nothing for it.
    """

    def __init__(self, n_relays: int, prm: ChannelParams, ws: Workspace,
                 max_slots: int | None = None, _slots_data: tuple = ()):
        if max_slots is not None and max_slots < 1:
            raise ValueError("max_slots must be >= 1")
        self.n_relays = n_relays
        self.prm = prm
        self.ws = ws
        self.max_slots = max_slots
        self._data = _slots_data            # tuple of (positions (R,2), obs (2R,), prior (2R,))
        self._inv: np.ndarray | None = None
        self._chol: np.ndarray | None = None
        self._inv_slots = 0
        self._dense_rebuild = False

    # -- value-style accessors ---------------------------------------------

    @property
    def slots(self) -> int:
        return len(self._data)

    @property
    def positions(self) -> np.ndarray:
        """(slots, R, 2) array of recorded relay positions."""
        if not self._data:
            return np.zeros((0, self.n_relays, 2))
        return np.stack([d[0] for d in self._data])

    @property
    def obs(self) -> np.ndarray:
        """Stacked observation vector, slot-major [F(1..R), G(1..R)] per slot."""
        if not self._data:
            return np.zeros(0)
        return np.concatenate([d[1] for d in self._data])

    @property
    def prior_mean(self) -> np.ndarray:
        if not self._data:
            return np.zeros(0)
        return np.concatenate([d[2] for d in self._data])

    def joint_cov(self) -> np.ndarray:
        """Dense observation covariance (shadowing blocks + multipath diagonal)."""
        kap = kappa(self.prm, self.ws)
        t = self.slots
        m = 2 * self.n_relays
        out = np.empty((t * m, t * m))
        for k in range(t):
            for l in range(k, t):
                blk = _slot_block(self._data[k][0], self._data[l][0], l - k, self.prm, kap)
                out[k * m:(k + 1) * m, l * m:(l + 1) * m] = blk
                if l != k:
                    out[l * m:(l + 1) * m, k * m:(k + 1) * m] = blk.T
        out[np.diag_indices(t * m)] += self.prm.sigma_xi2
        return out

    # -- recursive inverse ---------------------------------------------------

    def _advance_inverse(self) -> None:
        # Block-inversion recursion. The step quantities (Schur complement and
        # gain) come from an incrementally extended Cholesky factor instead of
        # the cached inverse: the raw chain amplifies rounding error by a
        # constant factor per slot and visibly diverges within a few dozen
        # appends, while this variant keeps the drift additive.
        kap = kappa(self.prm, self.ws)
        m = 2 * self.n_relays
        while self._inv_slots < self.slots:
            j = self._inv_slots
            pos_j = self._data[j][0]
            diag = _slot_block(pos_j, pos_j, 0, self.prm, kap) + self.prm.sigma_xi2 * np.eye(m)
            if j == 0:
                self._chol = _safe_chol(diag)
                self._inv = _safe_inv(diag)
                self._inv_slots = 1
                continue
            cross = np.empty((j * m, m))
            for k in range(j):
                cross[k * m:(k + 1) * m] = _slot_block(self._data[k][0], pos_j, j - k,
                                                       self.prm, kap)
            chol = self._chol
            c_ext = solve_triangular(chol, cross, lower=True, check_finite=False)
            schur = diag - c_ext.T @ c_ext
            schur_chol = _safe_chol(schur)
            schur_inv = _chol_inverse(schur_chol)
            a_inv_b = solve_triangular(chol.T, c_ext, lower=False, check_finite=False)
            n = j * m
            out = np.empty((n + m, n + m))
            gain = a_inv_b @ schur_inv
            out[:n, :n] = self._inv + gain @ a_inv_b.T
            out[:n, n:] = -gain
            out[n:, :n] = -gain.T
            out[n:, n:] = schur_inv
            new_chol = np.zeros((n + m, n + m))
            new_chol[:n, :n] = chol
            new_chol[n:, :n] = c_ext.T
            new_chol[n:, n:] = schur_chol
            self._inv = out
            self._chol = new_chol
            self._inv_slots = j + 1

    @property
    def inv(self) -> np.ndarray:
        """Inverse of the observation covariance, kept current via the recursion."""
        if self.slots == 0:
            return np.zeros((0, 0))
        if self._inv_slots < self.slots:
            if self._dense_rebuild:
                # post-truncation: no valid prefix inverse to extend
                full = self.joint_cov()
                self._chol = _safe_chol(full)
                self._inv = _safe_inv(full)
                self._inv_slots = self.slots
                self._dense_rebuild = False
            else:
                self._advance_inverse()
        return self._inv


def _safe_inv(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular covariance block in history update") from exc


def _safe_chol(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance block is numerically singular") from exc


def _chol_inverse(chol: np.ndarray) -> np.ndarray:
    li = solve_triangular(chol, np.eye(len(chol)), lower=True, check_finite=False)
    return li.T @ li


def history_empty(n_relays: int, prm: ChannelParams, ws: Workspace,
                  max_slots: int | None = None) -> History:
    """History before any slot has been observed (prediction falls back to the prior)."""
    return History(n_relays, prm, ws, max_slots)


def history_append(h: History, new_positions, new_obs, prm: ChannelParams,
                   ws: Workspace) -> History:
    """Extend a history by one observed slot, reusing the cached inverse.

    `new_obs` is the 2R vector [F(1..R), G(1..R)] in dB at `new_positions`.
    """
    pos = np.asarray(new_positions, dtype=float).reshape(h.n_relays, 2)
    obs = np.asarray(new_obs, dtype=float).reshape(2 * h.n_relays)
    for p in pos:
        if not ws.in_relay_region(p):
            raise ValueError("history_append: position outside relay region")
    check_separation(pos, prm)
    prior = _prior_mean_at(pos, prm, ws)
    prior_vec = np.concatenate([prior[:, 0], prior[:, 1]])

    data = h._data + ((pos, obs, prior_vec),)
    if h.max_slots is not None and len(data) > h.max_slots:
        out = History(h.n_relays, prm, ws, h.max_slots, data[1:])
        out._dense_rebuild = True
        return out
    out = History(h.n_relays, prm, ws, h.max_slots, data)
    if prm == h.prm and ws == h.ws:
        # hand over the already-advanced part of the inverse so the recursion
        # resumes where it stopped instead of restarting from slot 1
        out._inv = h._inv
        out._chol = h._chol
        out._inv_slots = h._inv_slots
    return out


def _cross_rows(h: History, points: np.ndarray, prm: ChannelParams,
                ws: Workspace) -> np.ndarray:
    """Conditioning rows [c_F; c_G] for each query point, (Q, 2, n).

    Built from shadowing covariances only; multipath is white across slots
    and never links an observed slot to the predicted one.
    """
    t = h.slots
    r = h.n_relays
    kap = kappa(prm, ws)
    hist = h.positions                                   # (t, R, 2)
    diff = points[:, None, None, :] - hist[None, :, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))            # (Q, t, R)
    lag = np.arange(t, 0, -1)                            # query slot is t+1
    w = prm.eta2 * np.exp(-d / prm.beta) * np.exp(-lag / prm.gamma)[None, :, None]
    rows = np.empty((len(points), 2, t, 2 * r))
    rows[:, 0, :, :r] = w
    rows[:, 0, :, r:] = kap * w
    rows[:, 1, :, :r] = kap * w
    rows[:, 1, :, r:] = w
    return rows.reshape(len(points), 2, t * 2 * r)


def predict_batch(h: History, points, prm: ChannelParams,
                  ws: Workspace) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means (Q,2) and covariances (Q,2,2) at many query points.

    Single-pass version of `predict` sharing one multiply against the cached
    covariance inverse across all points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    q = len(pts)
    mu = _prior_mean_at(pts, prm, ws)
    cov = np.broadcast_to(_prior_block(prm, ws), (q, 2, 2)).copy()
    if h.slots == 0:
        return mu, cov
    rows = _cross_rows(h, pts, prm, ws)                  # (Q, 2, n)
    n = rows.shape[-1]
    x = (rows.reshape(2 * q, n) @ h.inv).reshape(q, 2, n)
    resid = h.obs - h.prior_mean
    mu += x @ resid
    cov -= np.einsum("qin,qjn->qij", x, rows)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    return mu, cov


def predict(h: History, p, prm: ChannelParams, ws: Workspace) -> Posterior2:
    """Conditional law of the next slot's [F, G] (dB) at a query point.

    With an empty history this is the unconditional prior: path-loss means
    and the zero-lag shadowing + multipath block.
    """
    pt = np.asarray(p, dtype=float).reshape(2)
    if not ws.in_relay_region(pt):
        raise ValueError("predict: query point outside relay region")
    mu, cov = predict_batch(h, pt[None, :], prm, ws)
    return Posterior2(mu=mu[0], cov=cov[0])


def cond_moment(post: Posterior2, m: int, n: int, rho: float) -> float:
    """Joint moment E{|f|^m |g|^n} of the log-normal gain pair.

    Evaluates the bivariate Gaussian moment generating function of
    [F, G] ~ N(mu, cov) at (ln 10 / 20) * [m, n]:

        10^((m+n) rho / 20) * exp(u'mu + u'cov u / 2),  u = (ln10/20)[m, n].
    """
    return float(cond_moment_arrays(post.mu[None, :], post.cov[None, :, :], m, n, rho)[0])


def cond_moment_arrays(mu: np.ndarray, cov: np.ndarray, m: int, n: int,
                       rho: float) -> np.ndarray:
    """Vectorized `cond_moment` over leading axes of mu (Q,2) / cov (Q,2,2)."""
    u = DB_TO_LN_AMP * np.array([m, n], dtype=float)
    lin = mu @ u
    quad = np.einsum("i,qij,j->q", u, cov, u)
    return 10.0 ** ((m + n) * rho / 20.0) * np.exp(lin + 0.5 * quad)


def sqrt2x2(s) -> np.ndarray:
    """Principal square root of a symmetric PSD 2x2 matrix, in closed form.

    (S + sqrt(det S) I) / sqrt(tr S + 2 sqrt(det S)); undefined for the
    zero matrix (zero denominator).
    """
    mat = np.asarray(s, dtype=float)
    if mat.shape != (2, 2):
        raise ValueError("sqrt2x2: expected a 2x2 matrix")
    if abs(mat[0, 1] - mat[1, 0]) > 1e-9 * (1.0 + abs(mat[0, 1])):
        raise ValueError("sqrt2x2: matrix is not symmetric")
    return sqrt2x2_batch(mat[None, :, :])[0]


def sqrt2x2_batch(cov: np.ndarray, zero_ok: bool = False) -> np.ndarray:
    """Closed-form PSD square roots over a batch (Q,2,2) -> (Q,2,2).

    With `zero_ok` a zero matrix maps to its (zero) square root instead of
    tripping the zero denominator of the closed form.
    """
    a = cov[:, 0, 0]
    b = cov[:, 0, 1]
    d = cov[:, 1, 1]
    det = a * d - b * b
    tr = a + d
    scale = np.maximum(1.0, tr)
    if np.any(tr < -1e-12) or np.any(det < -1e-9 * scale * scale):
        raise ValueError("sqrt2x2: matrix is not positive semidefinite")
    root = np.sqrt(np.clip(det, 0.0, None))
    denom_sq = tr + 2.0 * root
    zero = denom_sq <= 0.0
    if np.any(zero) and not zero_ok:
        raise ValueError("sqrt2x2: zero matrix has no normalized square root")
    denom = np.sqrt(np.where(zero, 1.0, denom_sq))
    out = (cov + root[:, None, None] * np.eye(2)) / denom[:, None, None]
    if np.any(zero):
        out[zero] = 0.0
    return out
