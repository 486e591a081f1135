"""Second-stage optimal amplify-and-forward beamforming.

Once the per-relay channel magnitudes for a slot are revealed, the SINR-
optimal beamformer under the total relay power budget has a closed-form
optimal value: a sum of independent per-relay contributions. An eigenvalue
formulation of the same program is kept as a cross-checking oracle, and the
optimal weight magnitudes are recovered from the rank-1 structure of the
signal quadratic form.

Phases never enter: the optimal weights conjugate the channel phases away,
so the whole simulator tracks magnitudes only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import NumericalError, RadioParams


@dataclass(frozen=True)
class GainSnapshot:
    """Per-relay channel magnitudes |f_i|, |g_i| (linear) for one slot."""

    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).reshape(-1))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).reshape(-1))
        if len(self.f) != len(self.g) or len(self.f) < 1:
            raise ValueError("GainSnapshot: f and g must be nonempty and equal length")
        if np.any(self.f <= 0) or np.any(self.g <= 0):
            raise ValueError("GainSnapshot: magnitudes must be strictly positive")


def relay_sinr_terms(f2, g2, r: RadioParams):
    """Per-relay optimal-SINR contributions from squared magnitudes.

    pc*p0*f2*g2 / (p0*sd2*f2 + pc*s2*g2 + s2*sd2); vectorized.
    """
    f2 = np.asarray(f2, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    num = r.pc * r.p0 * f2 * g2
    den = r.p0 * r.sigma_d2 * f2 + r.pc * r.sigma2 * g2 + r.sigma2 * r.sigma_d2
    return num / den


def v_second_stage(s: GainSnapshot, r: RadioParams) -> float:
    """Optimal beamforming SINR for one slot: sum of per-relay terms."""
    return float(np.sum(relay_sinr_terms(s.f ** 2, s.g ** 2, r)))


def _matrices(s: GainSnapshot, r: RadioParams):
    f2 = s.f ** 2
    g2 = s.g ** 2
    d = r.p0 * f2 + r.sigma2          # diag of the power quadratic form
    q = r.sigma2 * g2                 # diag of the interference quadratic form
    h = s.f * s.g                     # rank-1 signal direction
    return d, q, h


def v_second_stage_eig(s: GainSnapshot, r: RadioParams) -> float:
    """Eigenvalue form of the optimal SINR; agrees with `v_second_stage`.

    pc * lambda_max( (sd2 I + pc D^-1/2 Q D^-1/2)^-1 D^-1/2 R D^-1/2 )
    with D, Q diagonal and R the rank-1 signal outer product.
    """
    d, q, h = _matrices(s, r)
    n = len(d)
    d_isqrt = np.diag(1.0 / np.sqrt(d))
    r_mat = r.p0 * np.outer(h, h)
    lhs = r.sigma_d2 * np.eye(n) + r.pc * d_isqrt @ np.diag(q) @ d_isqrt
    mat = np.linalg.solve(lhs, d_isqrt @ r_mat @ d_isqrt)
    eig = np.linalg.eigvals(mat)
    if np.any(np.abs(eig.imag) > 1e-8 * (1.0 + np.abs(eig.real))):
        raise NumericalError("v_second_stage_eig: unexpectedly complex spectrum")
    return float(r.pc * np.max(eig.real))


def optimal_weights(s: GainSnapshot, r: RadioParams) -> np.ndarray:
    """Weight magnitudes achieving the optimal SINR, power constraint tight.

    The rank-1 signal form makes the principal generalized eigenvector
    explicit: with u = D^1/2 w, u is proportional to
    (sd2/pc I + D^-1/2 Q D^-1/2)^-1 D^-1/2 h, scaled so that |u|^2 = pc.
    Phase alignment (conjugating the per-relay channel phases) is absorbed;
    only magnitudes are returned.
    """
    d, q, h = _matrices(s, r)
    u = (h / np.sqrt(d)) / (r.sigma_d2 / r.pc + q / d)
    u *= np.sqrt(r.pc) / np.linalg.norm(u)
    return u / np.sqrt(d)


def sinr_of_weights(w, s: GainSnapshot, r: RadioParams) -> float:
    """SINR delivered by arbitrary weight magnitudes w (phase-aligned)."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if len(w) != len(s.f):
        raise ValueError("sinr_of_weights: weight length must match snapshot")
    _, q, h = _matrices(s, r)
    sig = r.p0 * float(w @ h) ** 2
    return sig / (r.sigma_d2 + float(w ** 2 @ q))


def relay_power(w, s: GainSnapshot, r: RadioParams) -> float:
    """Total transmit power w'Dw spent by a weight vector."""
    w = np.asarray(w, dtype=float).reshape(-1)
    d, _, _ = _matrices(s, r)
    return float(w ** 2 @ d)
