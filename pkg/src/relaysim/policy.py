"""Per-relay next-position decision rules.

Each causal rule scores every admissible next cell by an approximation of
the expected per-relay SINR given the observed history, then takes the
argmax; ties break toward the row-major-first cell. Two scores come from
the method of statistical differentials (first- and second-order Taylor
expansions of E{1/X} around E{X}), the third evaluates the conditional
expectation directly with a tensorized Gauss-Hermite quadrature. The
noncausal oracle reads the realized field one slot ahead, and the agnostic
and stay rules ignore the channel entirely.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import beamform, channel, gaussian
from .channel import GridField, field_to_gain
from .gaussian import History, Posterior2
from .params import ChannelParams, RadioParams, Workspace

POLICY_NAMES = ("h1", "h2", "gh", "agnostic", "oracle", "stay")


@dataclass(frozen=True)
class PolicyKind:
    """Decision rule selector; `gh_m` is the quadrature resolution for 'gh'."""

    kind: str
    gh_m: int | None = None

    def __post_init__(self):
        if self.kind not in POLICY_NAMES:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_NAMES}")
        if self.kind == "gh" and (self.gh_m is None or self.gh_m < 1):
            raise ValueError("PolicyKind: gh requires a quadrature resolution >= 1")

    @property
    def causal(self) -> bool:
        return self.kind in ("h1", "h2", "gh")


@dataclass(frozen=True)
class FeasibleSet:
    """Admissible next cells for one relay; includes its current cell."""

    center: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=float).reshape(-1, 2))
        if len(self.cells) == 0:
            raise ValueError("FeasibleSet: empty candidate set")
        if not np.any(np.all(self.cells == self.center, axis=1)):
            raise ValueError("FeasibleSet: candidate set must contain the center cell")


@dataclass(frozen=True)
class GhRule:
    """Gauss-Hermite nodes/weights normalized for the standard normal law."""

    m: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=64)
def gh_build(m: int) -> GhRule:
    """Quadrature rule from the hollow tridiagonal Jacobi-style matrix.

    J[i, i+1] = sqrt((i+1)/2) (zero elsewhere); nodes are sqrt(2) times its
    eigenvalues and each weight is the squared first entry of the matching
    normalized eigenvector. Exact for polynomials of degree <= 2m-1 against
    N(0, 1).
    """
    if m < 1:
        raise ValueError("gh_build: resolution must be >= 1")
    j = np.zeros((m, m))
    for i in range(m - 1):
        j[i, i + 1] = j[i + 1, i] = np.sqrt((i + 1) / 2.0)
    eigval, eigvec = np.linalg.eigh(j)
    nodes = np.sqrt(2.0) * eigval
    weights = eigvec[0, :] ** 2
    if m % 2 == 1:
        nodes[m // 2] = 0.0     # center node of odd rules is exactly zero
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GhRule(m=m, nodes=nodes, weights=weights)


# -- objectives --------------------------------------------------------------

def _vii_coeffs(r: RadioParams) -> tuple[float, float, float]:
    """Coefficients of 1/SINR = a|g|^-2 + b|f|^-2 + c|f|^-2|g|^-2."""
    a = r.sigma_d2 / r.pc
    b = r.sigma2 / r.p0
    return a, b, a * b


def _mean_vii(mu: np.ndarray, cov: np.ndarray, r: RadioParams, rho: float) -> np.ndarray:
    a, b, c = _vii_coeffs(r)
    mom = lambda m, n: gaussian.cond_moment_arrays(mu, cov, m, n, rho)
    return a * mom(0, -2) + b * mom(-2, 0) + c * mom(-2, -2)


def _mean_vii_sq(mu: np.ndarray, cov: np.ndarray, r: RadioParams, rho: float) -> np.ndarray:
    """E{(1/SINR)^2} expanded into six log-normal joint moments."""
    a, b, c = _vii_coeffs(r)
    mom = lambda m, n: gaussian.cond_moment_arrays(mu, cov, m, n, rho)
    return (c * c * mom(-4, -4) + 2.0 * c * mom(-2, -2)
            + 2.0 * b * c * mom(-4, -2) + 2.0 * a * c * mom(-2, -4)
            + b * b * mom(-4, 0) + a * a * mom(0, -4))


def obj_h1_arrays(mu: np.ndarray, cov: np.ndarray, r: RadioParams, rho: float) -> np.ndarray:
    return 1.0 / _mean_vii(mu, cov, r, rho)


def obj_h2_arrays(mu: np.ndarray, cov: np.ndarray, r: RadioParams, rho: float) -> np.ndarray:
    return _mean_vii_sq(mu, cov, r, rho) / _mean_vii(mu, cov, r, rho) ** 3


def obj_h1(post: Posterior2, r: RadioParams, rho: float) -> float:
    """First-order score 1 / E{1/SINR}: a lower bound on E{SINR}."""
    return float(obj_h1_arrays(post.mu[None, :], post.cov[None, :, :], r, rho)[0])


def obj_h2(post: Posterior2, r: RadioParams, rho: float) -> float:
    """Second-order score E{(1/SINR)^2} / E{1/SINR}^3; always >= obj_h1."""
    return float(obj_h2_arrays(post.mu[None, :], post.cov[None, :, :], r, rho)[0])


def sinr_integrand(x, r: RadioParams, rho: float) -> np.ndarray:
    """Per-relay SINR as a function of the dB log-gain pair x = (..., 2).

    Direct substitution of the dB-to-linear conversion into the per-relay
    SINR term, so the quadrature integrates the exact recourse value.
    """
    x = np.asarray(x, dtype=float)
    f2 = field_to_gain(x[..., 0], rho) ** 2
    g2 = field_to_gain(x[..., 1], rho) ** 2
    return beamform.relay_sinr_terms(f2, g2, r)


def gh_expect2(fn, mu: np.ndarray, cov: np.ndarray, rule: GhRule) -> float:
    """Tensorized 2-d Gaussian quadrature of fn against N(mu, cov).

    Standardizes through the closed-form 2x2 matrix square root and applies
    the rule independently per dimension. A degenerate (zero) covariance
    collapses every node onto the mean, so the result is exactly fn(mu).
    """
    root = gaussian.sqrt2x2_batch(np.asarray(cov, dtype=float)[None, :, :], zero_ok=True)[0]
    q1, q2 = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    pts = np.stack([q1, q2], axis=-1) @ root.T + np.asarray(mu, dtype=float)
    vals = fn(pts)
    w = rule.weights
    return float(w @ vals @ w)


def obj_gh_arrays(mu: np.ndarray, cov: np.ndarray, rule: GhRule, r: RadioParams,
                  rho: float) -> np.ndarray:
    roots = gaussian.sqrt2x2_batch(cov, zero_ok=True)            # (Q,2,2)
    q1, q2 = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    grid = np.stack([q1, q2], axis=-1).reshape(-1, 2)            # (m*m, 2)
    pts = np.einsum("kj,qij->qki", grid, roots) + mu[:, None, :]
    vals = beamform.relay_sinr_terms(
        field_to_gain(pts[..., 0], rho) ** 2, field_to_gain(pts[..., 1], rho) ** 2, r)
    w2 = np.outer(rule.weights, rule.weights).reshape(-1)
    return vals @ w2


def obj_gh(post: Posterior2, rule: GhRule, r: RadioParams, rho: float) -> float:
    """Quadrature estimate of the conditional expected per-relay SINR."""
    return gh_expect2(lambda x: sinr_integrand(x, r, rho), post.mu, post.cov, rule)


# -- decision ----------------------------------------------------------------

def _row_major_order(cells: np.ndarray, ws: Workspace) -> np.ndarray:
    coords = np.array([ws.cell_coords(c) for c in cells])
    return np.lexsort((coords[:, 0], coords[:, 1]))     # by iy, then ix


def _argmax_first(values: np.ndarray) -> int:
    # np.argmax already returns the first maximal index; make the tie rule explicit
    return int(np.argmax(values))


def decide(kind: PolicyKind, relay: int, h: History | None, fs: FeasibleSet,
           grid: GridField | None, t: int, prm: ChannelParams, r: RadioParams,
           ws: Workspace, rng: np.random.Generator | None = None) -> np.ndarray:
    """Pick the relay's cell for slot t from its feasible set.

    Causal kinds (h1, h2, gh) score candidates from the history alone and
    never read the slot-t field; the oracle requires `grid` and maximizes
    the realized per-relay SINR at slot t. Ties resolve to the first cell
    in row-major order.
    """
    order = _row_major_order(fs.cells, ws)
    cells = fs.cells[order]

    if kind.kind == "stay":
        return fs.center.copy()
    if kind.kind == "agnostic":
        if rng is None:
            raise ValueError("agnostic policy needs a random generator")
        return cells[int(rng.integers(len(cells)))].copy()
    if kind.kind == "oracle":
        if grid is None:
            raise ValueError("oracle policy needs the realized grid field")
        f_db = np.array([channel.eval_F(grid, c, t, "S", prm, ws) for c in cells])
        g_db = np.array([channel.eval_F(grid, c, t, "D", prm, ws) for c in cells])
        vals = beamform.relay_sinr_terms(field_to_gain(f_db, prm.rho) ** 2,
                                         field_to_gain(g_db, prm.rho) ** 2, r)
        return cells[_argmax_first(vals)].copy()

    if h is None:
        raise ValueError(f"{kind.kind} policy needs a history")
    if h.slots != t - 1:
        raise ValueError(f"decide: history covers {h.slots} slots but slot {t} was requested")
    mu, cov = gaussian.predict_batch(h, cells, prm, ws)
    if kind.kind == "h1":
        vals = obj_h1_arrays(mu, cov, r, prm.rho)
    elif kind.kind == "h2":
        vals = obj_h2_arrays(mu, cov, r, prm.rho)
    else:
        vals = obj_gh_arrays(mu, cov, gh_build(kind.gh_m), r, prm.rho)
    return cells[_argmax_first(vals)].copy()
