"""Parameter containers and the gridded workspace geometry.

All field arithmetic downstream happens in dB, all SINR arithmetic in
linear scale; the containers here only carry the raw constants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Rect = tuple[tuple[float, float], tuple[float, float]]  # ((xmin, xmax), (ymin, ymax))
Point = tuple[float, float]


class ConfigError(ValueError):
    """A parameter or configuration value violates its contract."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond recoverable jitter."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants of the log-scale (dB) channel model.

    ell        path-loss exponent
    rho        multipath mean offset, dB
    sigma_xi2  multipath log-power variance, dB^2 (0 disables small-scale fading)
    eta2       shadowing power, dB^2
    beta       shadowing correlation distance
    gamma      shadowing correlation time, in slots
    delta      source/destination cross-correlation distance
    eps_mf     multipath decorrelation radius (relay separation floor)
    """

    ell: float
    rho: float
    sigma_xi2: float
    eta2: float
    beta: float
    gamma: float
    delta: float
    eps_mf: float

    def __post_init__(self) -> None:
        _require(self.ell > 0, "channel.ell: must be > 0")
        _require(self.sigma_xi2 >= 0, "channel.sigma_xi2: must be >= 0")
        _require(self.eta2 > 0, "channel.eta2: must be > 0")
        _require(self.beta > 0, "channel.beta: must be > 0")
        _require(self.gamma > 0, "channel.gamma: must be > 0")
        _require(self.delta > 0, "channel.delta: must be > 0")
        _require(self.eps_mf > 0, "channel.eps_mf: must be > 0")


@dataclass(frozen=True)
class RadioParams:
    """Power and noise constants of the two-hop link (linear scale).

    p0       source transmit power
    pc       total relay transmit power budget
    sigma2   relay reception noise variance
    sigma_d2 destination reception noise variance
    """

    p0: float
    pc: float
    sigma2: float
    sigma_d2: float

    def __post_init__(self) -> None:
        _require(self.p0 > 0, "radio.p0: must be > 0")
        _require(self.pc > 0, "radio.pc: must be > 0")
        _require(self.sigma2 > 0, "radio.sigma2: must be > 0")
        _require(self.sigma_d2 > 0, "radio.sigma_d2: must be > 0")


def _in_rect(p: Point, rect: Rect) -> bool:
    (x0, x1), (y0, y1) = rect
    return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


@dataclass(frozen=True)
class Workspace:
    """Planar workspace with a uniform square grid and a relay sub-region.

    Relay positions are always snapped to centers of grid cells that lie
    inside `relay_region`; source and destination sit at fixed off-region
    anchor points `p_s` and `p_d`.
    """

    bounds: Rect
    relay_region: Rect
    cell: float
    p_s: Point
    p_d: Point

    def __post_init__(self) -> None:
        (bx0, bx1), (by0, by1) = self.bounds
        (rx0, rx1), (ry0, ry1) = self.relay_region
        _require(bx0 < bx1 and by0 < by1, "workspace.bounds: empty rectangle")
        _require(rx0 < rx1 and ry0 < ry1, "workspace.relay_region: empty rectangle")
        _require(
            bx0 <= rx0 and rx1 <= bx1 and by0 <= ry0 and ry1 <= by1,
            "workspace.relay_region: must lie inside bounds",
        )
        _require(self.cell > 0, "workspace.cell: must be > 0")
        _require(
            not _in_rect(self.p_s, self.relay_region),
            "workspace.p_s: must lie outside relay_region",
        )
        _require(
            not _in_rect(self.p_d, self.relay_region),
            "workspace.p_d: must lie outside relay_region",
        )
        _require(
            len(self.relay_cells()) >= 1,
            "workspace: relay_region grid contains no cell centers",
        )

    # -- grid geometry ---------------------------------------------------

    def center(self, ix: int, iy: int) -> np.ndarray:
        """Center of grid cell (ix, iy); indices count from bounds origin."""
        (bx0, _), (by0, _) = self.bounds
        return np.array([bx0 + (ix + 0.5) * self.cell, by0 + (iy + 0.5) * self.cell])

    def cell_coords(self, p) -> tuple[int, int]:
        """Integer cell indices of the cell containing (or centered at) p."""
        (bx0, _), (by0, _) = self.bounds
        return (int(np.floor((p[0] - bx0) / self.cell)), int(np.floor((p[1] - by0) / self.cell)))

    def snap(self, p) -> np.ndarray:
        """Snap an arbitrary point to its grid-cell center."""
        ix, iy = self.cell_coords(p)
        return self.center(ix, iy)

    def in_relay_region(self, p) -> bool:
        return _in_rect((float(p[0]), float(p[1])), self.relay_region)

    def relay_cells(self) -> np.ndarray:
        """All relay-region cell centers, row-major (by iy, then ix)."""
        (bx0, bx1), (by0, by1) = self.bounds
        nx = int(round((bx1 - bx0) / self.cell))
        ny = int(round((by1 - by0) / self.cell))
        out = []
        for iy in range(ny):
            for ix in range(nx):
                c = self.center(ix, iy)
                if self.in_relay_region(c):
                    out.append(c)
        return np.array(out).reshape(-1, 2)

    def neighbors9(self, p) -> np.ndarray:
        """Moore 9-neighborhood of p's cell, clipped to the relay region.

        Returned row-major (by iy, then ix); always contains p's own center.
        """
        ix, iy = self.cell_coords(p)
        out = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                c = self.center(ix + dx, iy + dy)
                if self.in_relay_region(c):
                    out.append(c)
        return np.array(out).reshape(-1, 2)
