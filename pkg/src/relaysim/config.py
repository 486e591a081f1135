"""JSON experiment configuration: parsing, overrides, digest, round-trip."""
from __future__ import annotations

import hashlib
import json
from typing import Any

from .params import ChannelParams, ConfigError, RadioParams, Workspace
from .policy import POLICY_NAMES, PolicyKind
from .sim import FailureSpec, SimConfig

DEFAULT_GH_M = 30


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file: top level must be a JSON object")
    return raw


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply `dotted.path=value` overrides; values parse as JSON when possible."""
    out = json.loads(json.dumps(raw))  # deep copy, JSON-clean
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        path, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        keys = path.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {path!r}: {key} is not an object")
        node[keys[-1]] = value
    return out


def _section(raw: dict, name: str) -> dict:
    if name not in raw:
        raise ConfigError(f"{name}: missing required section")
    if not isinstance(raw[name], dict):
        raise ConfigError(f"{name}: must be an object")
    return raw[name]


_SENTINEL = object()


def _get(section: dict, where: str, key: str, default=_SENTINEL):
    if key not in section:
        if default is not _SENTINEL:
            return default
        raise ConfigError(f"{where}.{key}: missing required field")
    return section[key]


def _number(section: dict, where: str, key: str, default=_SENTINEL) -> float:
    v = _get(section, where, key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(section: dict, where: str, key: str, default=_SENTINEL) -> int:
    v = _get(section, where, key, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _point(section: dict, where: str, key: str) -> tuple[float, float]:
    v = _get(section, where, key)
    if not (isinstance(v, list) and len(v) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise ConfigError(f"{where}.{key}: expected [x, y]")
    return (float(v[0]), float(v[1]))


def _rect(section: dict, where: str, key: str):
    v = _get(section, where, key)
    ok = (isinstance(v, list) and len(v) == 2
          and all(isinstance(ax, list) and len(ax) == 2 for ax in v))
    if not ok:
        raise ConfigError(f"{where}.{key}: expected [[xmin, xmax], [ymin, ymax]]")
    return ((float(v[0][0]), float(v[0][1])), (float(v[1][0]), float(v[1][1])))


def parse_config(raw: dict) -> SimConfig:
    """Validate a raw config dict into a SimConfig, naming bad fields."""
    wsec = _section(raw, "workspace")
    csec = _section(raw, "channel")
    rsec = _section(raw, "radio")
    ssec = _section(raw, "sim")

    ws = Workspace(
        bounds=_rect(wsec, "workspace", "bounds"),
        relay_region=_rect(wsec, "workspace", "relay_region"),
        cell=_number(wsec, "workspace", "cell"),
        p_s=_point(wsec, "workspace", "p_s"),
        p_d=_point(wsec, "workspace", "p_d"),
    )
    prm = ChannelParams(
        ell=_number(csec, "channel", "ell"),
        rho=_number(csec, "channel", "rho"),
        sigma_xi2=_number(csec, "channel", "sigma_xi2"),
        eta2=_number(csec, "channel", "eta2"),
        beta=_number(csec, "channel", "beta"),
        gamma=_number(csec, "channel", "gamma"),
        delta=_number(csec, "channel", "delta"),
        eps_mf=_number(csec, "channel", "eps_mf", default=ws.cell),
    )
    radio = RadioParams(
        p0=_number(rsec, "radio", "p0"),
        pc=_number(rsec, "radio", "pc"),
        sigma2=_number(rsec, "radio", "sigma2"),
        sigma_d2=_number(rsec, "radio", "sigma_d2"),
    )

    cells_raw = _get(ssec, "sim", "initial_cells")
    if not isinstance(cells_raw, list):
        raise ConfigError("sim.initial_cells: expected a list of [x, y] points")
    cells = []
    for i, v in enumerate(cells_raw):
        if not (isinstance(v, list) and len(v) == 2):
            raise ConfigError(f"sim.initial_cells[{i}]: expected [x, y]")
        cells.append((float(v[0]), float(v[1])))

    pol_raw = _get(ssec, "sim", "policies")
    if not isinstance(pol_raw, list) or not all(isinstance(p, str) for p in pol_raw):
        raise ConfigError("sim.policies: expected a list of policy names")
    gh_m = _integer(ssec, "sim", "gh_m", default=DEFAULT_GH_M)
    policies = []
    for name in pol_raw:
        if name not in POLICY_NAMES:
            raise ConfigError(f"sim.policies: unknown policy {name!r} "
                              f"(expected one of {', '.join(POLICY_NAMES)})")
        policies.append(PolicyKind(name, gh_m) if name == "gh" else PolicyKind(name))

    failures = None
    fsec = ssec.get("failures")
    if fsec is not None:
        if not isinstance(fsec, dict):
            raise ConfigError("sim.failures: expected an object")
        window = _get(fsec, "sim.failures", "window")
        if not (isinstance(window, list) and len(window) == 2
                and all(isinstance(x, int) for x in window)):
            raise ConfigError("sim.failures.window: expected [first_slot, last_slot]")
        failures = FailureSpec(window=(window[0], window[1]),
                               count=_integer(fsec, "sim.failures", "count"))

    return SimConfig(
        workspace=ws,
        channel=prm,
        radio=radio,
        n_relays=_integer(ssec, "sim", "n_relays"),
        horizon=_integer(ssec, "sim", "horizon"),
        initial_cells=tuple(cells),
        policies=tuple(policies),
        trials=_integer(ssec, "sim", "trials"),
        seed=_integer(ssec, "sim", "seed"),
        gh_m=gh_m,
        failures=failures,
    )


def config_to_dict(cfg: SimConfig) -> dict:
    """Effective config as a JSON-clean dict; `parse_config` round-trips it."""
    out: dict[str, Any] = {
        "workspace": {
            "bounds": [list(cfg.workspace.bounds[0]), list(cfg.workspace.bounds[1])],
            "relay_region": [list(cfg.workspace.relay_region[0]),
                             list(cfg.workspace.relay_region[1])],
            "cell": cfg.workspace.cell,
            "p_s": list(cfg.workspace.p_s),
            "p_d": list(cfg.workspace.p_d),
        },
        "channel": {
            "ell": cfg.channel.ell, "rho": cfg.channel.rho,
            "sigma_xi2": cfg.channel.sigma_xi2, "eta2": cfg.channel.eta2,
            "beta": cfg.channel.beta, "gamma": cfg.channel.gamma,
            "delta": cfg.channel.delta, "eps_mf": cfg.channel.eps_mf,
        },
        "radio": {
            "p0": cfg.radio.p0, "pc": cfg.radio.pc,
            "sigma2": cfg.radio.sigma2, "sigma_d2": cfg.radio.sigma_d2,
        },
        "sim": {
            "n_relays": cfg.n_relays, "horizon": cfg.horizon,
            "initial_cells": [list(c) for c in cfg.initial_cells],
            "policies": [k.kind for k in cfg.policies],
            "trials": cfg.trials, "seed": cfg.seed, "gh_m": cfg.gh_m,
        },
    }
    if cfg.failures is not None:
        out["sim"]["failures"] = {"window": list(cfg.failures.window),
                                  "count": cfg.failures.count}
    return out


def config_digest(cfg: SimConfig) -> str:
    """Stable hex digest identifying the logical experiment."""
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
