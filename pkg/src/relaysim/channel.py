"""Spatiotemporal log-normal channel model on a finite grid.

The log-scale magnitude of each hop decomposes additively into a
deterministic path-loss term, a correlated shadowing term and a white
multipath term, all in dB:

    F(p, t) = -10 log10(|p - p_s|) * ell + shadow + mpath

Shadowing follows a Gudmundson-type exponential kernel in space with an
exponential decay in slot lag; source-side and destination-side shadowing
are coupled by the constant attenuation kappa = exp(-|p_s - p_d| / delta).
Multipath is independent across cells, slots and endpoints; its spatial
kernel is the compactly supported spherical kernel of width eps_mf, which
vanishes on the grid because cell spacing >= eps_mf.

The per-slot stacked shadowing vector over a fixed set of cells is a
stationary order-1 vector autoregression, which is what `sample_grid_field`
iterates to generate whole-horizon realizations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ChannelParams, NumericalError, Workspace

DB_TO_LN_AMP = math.log(10.0) / 20.0   # dB magnitude -> natural log

_CHOL_JITTER = 1e-10


def pathloss_db(p, anchor) -> float:
    """Free-space log-distance term -10*log10(|p - anchor|), in dB.

    The path-loss contribution to the log-scale field is this value times
    the path-loss exponent. Raises ValueError at zero distance.
    """
    d = float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(anchor, dtype=float)))
    if d <= 0.0:
        raise ValueError("pathloss_db: point coincides with anchor (singular path loss)")
    return -10.0 * math.log10(d)


def field_to_gain(f_db, rho: float):
    """Map a log-scale field value (dB) to a linear channel magnitude.

    |f| = 10**(rho/20) * exp(ln(10)/20 * F); bijective and increasing.
    """
    return 10.0 ** (rho / 20.0) * np.exp(DB_TO_LN_AMP * np.asarray(f_db, dtype=float))


def kappa(prm: ChannelParams, ws: Workspace) -> float:
    """Source/destination shadowing coupling exp(-|p_s - p_d| / delta)."""
    d = float(np.linalg.norm(np.asarray(ws.p_s) - np.asarray(ws.p_d)))
    return math.exp(-d / prm.delta)


def shadow_cov(p_i, k: int, a: str, p_j, l: int, b: str,
               prm: ChannelParams, ws: Workspace) -> float:
    """Shadowing covariance between two (point, slot, endpoint) samples.

    eta2 * exp(-|p_i - p_j|/beta - |k - l|/gamma), attenuated by kappa
    when one sample is source-side ('S') and the other destination-side ('D').
    """
    if a not in ("S", "D") or b not in ("S", "D"):
        raise ValueError("shadow_cov: endpoint must be 'S' or 'D'")
    d = float(np.linalg.norm(np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)))
    v = prm.eta2 * math.exp(-d / prm.beta - abs(k - l) / prm.gamma)
    if a != b:
        v *= kappa(prm, ws)
    return v


def mpath_cov(tau, prm: ChannelParams) -> float:
    """Spherical multipath kernel, compactly supported on |tau| < eps_mf."""
    r = float(np.linalg.norm(np.asarray(tau, dtype=float))) / prm.eps_mf
    if r >= 1.0:
        return 0.0
    return prm.sigma_xi2 * (1.0 - 1.5 * r + 0.5 * r ** 3)


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of a (A,2) and b (B,2) -> (A,B)."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _endpoint_expand(base: np.ndarray, kap: float) -> np.ndarray:
    """Expand a spatial-temporal block (A,B) to the (2A,2B) [S;D] layout."""
    a, b = base.shape
    out = np.empty((2 * a, 2 * b))
    out[:a, :b] = base
    out[:a, b:] = kap * base
    out[a:, :b] = kap * base
    out[a:, b:] = base
    return out


def check_separation(positions: np.ndarray, prm: ChannelParams) -> None:
    """Enforce the per-slot relay separation floor (distance >= eps_mf)."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    if n < 2:
        return
    d = _pairwise_dist(pos, pos)
    d[np.diag_indices(n)] = np.inf
    if float(d.min()) < prm.eps_mf * (1.0 - 1e-12):
        raise ValueError(
            f"relay separation violated: min pairwise distance {d.min():.6g} "
            f"< eps_mf = {prm.eps_mf:.6g}"
        )


def build_joint_cov(trajectory, prm: ChannelParams, ws: Workspace) -> np.ndarray:
    """Joint covariance of the stacked log-scale gains along a trajectory.

    `trajectory` has shape (n_slots, R, 2). The result is the symmetric
    (2*R*n_slots) matrix over the slot-major vector
    [F_1..F_R, G_1..G_R](slot 1), ..., with the white multipath variance
    added on the diagonal only; with sigma_xi2 > 0 its smallest eigenvalue
    is at least sigma_xi2.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 3 or traj.shape[2] != 2:
        raise ValueError("build_joint_cov: trajectory must have shape (n_slots, R, 2)")
    n_t, n_r, _ = traj.shape
    for k in range(n_t):
        for p in traj[k]:
            if not ws.in_relay_region(p):
                raise ValueError("build_joint_cov: position outside relay region")
        check_separation(traj[k], prm)

    kap = kappa(prm, ws)
    flat = traj.reshape(n_t * n_r, 2)
    dist = _pairwise_dist(flat, flat)                       # (TR, TR)
    slots = np.repeat(np.arange(n_t), n_r)
    lag = np.abs(slots[:, None] - slots[None, :])
    base = prm.eta2 * np.exp(-dist / prm.beta - lag / prm.gamma)

    dim = 2 * n_r * n_t
    out = np.empty((dim, dim))
    for k in range(n_t):
        for l in range(n_t):
            blk = _endpoint_expand(base[k * n_r:(k + 1) * n_r, l * n_r:(l + 1) * n_r], kap)
            out[k * 2 * n_r:(k + 1) * 2 * n_r, l * 2 * n_r:(l + 1) * 2 * n_r] = blk
    out[np.diag_indices(dim)] += prm.sigma_xi2
    return out


def build_grid_prior(cells, prm: ChannelParams, ws: Workspace) -> tuple[np.ndarray, float]:
    """Stationary prior of the stacked shadowing vector on fixed cells.

    Returns (SigmaC, phi): the (2N, 2N) zero-lag covariance
    [[1, kappa], [kappa, 1]] (x) eta2*exp(-dist/beta), and the slot-to-slot
    autoregression coefficient phi = exp(-1/gamma).
    """
    pts = np.asarray(cells, dtype=float).reshape(-1, 2)
    d = _pairwise_dist(pts, pts)
    if len(pts) > 1:
        off = d.copy()
        off[np.diag_indices(len(pts))] = np.inf
        if float(off.min()) <= 0.0:
            raise ValueError("build_grid_prior: cells must be pairwise distinct")
    spatial = prm.eta2 * np.exp(-d / prm.beta)
    sigma_c = _endpoint_expand(spatial, kappa(prm, ws))
    phi = math.exp(-1.0 / prm.gamma)
    return sigma_c, phi


def _chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Lower-triangular factor, retrying once with diagonal jitter."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(mat + _CHOL_JITTER * np.eye(len(mat)))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "grid prior covariance is not factorizable even with jitter"
            ) from exc


@dataclass(frozen=True)
class GridField:
    """One realization of shadowing + multipath on a cell grid, all slots.

    `shadow` and `mpath` have shape (n_slots, 2N) in the layout
    [source-side at cells(0..N-1), destination-side at cells(0..N-1)];
    slot t (1-based) lives at row t-1. Immutable after creation.
    """

    cells: np.ndarray
    shadow: np.ndarray
    mpath: np.ndarray
    n_slots: int
    _index: dict = field(repr=False, default_factory=dict)

    @staticmethod
    def _key(p) -> tuple[int, int]:
        return (int(round(float(p[0]) * 1e9)), int(round(float(p[1]) * 1e9)))

    def __post_init__(self):
        if not self._index:
            for i, c in enumerate(np.asarray(self.cells)):
                self._index[self._key(c)] = i

    def cell_id(self, p) -> int:
        try:
            return self._index[self._key(p)]
        except KeyError:
            raise IndexError(f"cell {tuple(np.asarray(p))} is not on the field grid") from None


def sample_grid_field(cells, n_slots: int, prm: ChannelParams, ws: Workspace,
                      seed) -> GridField:
    """Draw one field realization; deterministic for a given seed.

    The shadowing path is generated by the stationary AR(1) recursion
    X(t) = phi X(t-1) + W(t), X(0) ~ N(0, SigmaC),
    W(t) ~ N(0, (1-phi^2) SigmaC); multipath entries are i.i.d.
    N(0, sigma_xi2) per cell, slot and endpoint, which is exact on grids
    with spacing >= eps_mf.
    """
    if prm.eps_mf > ws.cell * (1.0 + 1e-12):
        raise ValueError("sample_grid_field: eps_mf must not exceed the cell spacing")
    pts = np.asarray(cells, dtype=float).reshape(-1, 2)
    sigma_c, phi = build_grid_prior(pts, prm, ws)
    chol = _chol_with_jitter(sigma_c)
    rng = np.random.default_rng(seed)

    dim = 2 * len(pts)
    innov = rng.standard_normal((n_slots + 1, dim)) @ chol.T
    shadow = np.empty((n_slots, dim))
    scale = math.sqrt(max(0.0, 1.0 - phi * phi))
    x = innov[0]
    for t in range(n_slots):
        x = phi * x + scale * innov[t + 1]
        shadow[t] = x
    mpath = math.sqrt(prm.sigma_xi2) * rng.standard_normal((n_slots, dim))
    shadow.setflags(write=False)
    mpath.setflags(write=False)
    return GridField(cells=pts, shadow=shadow, mpath=mpath, n_slots=n_slots)


def _field_value(grid: GridField, cell, t: int, endpoint: str,
                 prm: ChannelParams, ws: Workspace) -> float:
    if not 1 <= t <= grid.n_slots:
        raise IndexError(f"slot {t} outside 1..{grid.n_slots}")
    i = grid.cell_id(cell)
    n = len(grid.cells)
    if endpoint == "S":
        anchor, off = ws.p_s, 0
    elif endpoint == "D":
        anchor, off = ws.p_d, n
    else:
        raise ValueError("endpoint must be 'S' or 'D'")
    pl = pathloss_db(cell, anchor) * prm.ell
    return pl + float(grid.shadow[t - 1, off + i]) + float(grid.mpath[t - 1, off + i])


def eval_F(grid: GridField, cell, t: int, endpoint: str,
           prm: ChannelParams, ws: Workspace) -> float:
    """Log-scale field value (dB) at a grid cell: path loss + shadow + mpath."""
    return _field_value(grid, cell, t, endpoint, prm, ws)
