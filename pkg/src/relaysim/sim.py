"""Per-slot scheduling loop and the Monte-Carlo experiment engine.

One trial draws a single field realization for the whole horizon and runs
every configured policy over that same environment: at each slot the relays
observe their channels (perfect pilot estimation), beamform optimally,
append the observations to their history, and the non-failed relays pick
next-slot cells in index order with claimed and still-occupied cells pruned
from later relays' feasible sets. Trials are independent, seeded
deterministically from (base seed, trial index), and aggregate order-free.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel as chn
from . import gaussian, policy
from .beamform import GainSnapshot, v_second_stage
from .params import ChannelParams, ConfigError, RadioParams, Workspace
from .policy import FeasibleSet, PolicyKind


@dataclass(frozen=True)
class FailureSpec:
    """Motion-failure model: per trial, `count` relays halt in the window."""

    window: tuple[int, int]
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("sim.failures.count: must be >= 0")
        if self.window[0] > self.window[1] or self.window[0] < 1:
            raise ConfigError("sim.failures.window: must be an increasing slot range from >= 1")


@dataclass(frozen=True)
class SimConfig:
    """Full experiment description; a pure value, hashable into a digest."""

    workspace: Workspace
    channel: ChannelParams
    radio: RadioParams
    n_relays: int
    horizon: int
    initial_cells: tuple[tuple[float, float], ...]
    policies: tuple[PolicyKind, ...]
    trials: int
    seed: int
    gh_m: int = 30
    failures: FailureSpec | None = None

    def __post_init__(self):
        ws = self.workspace
        if self.n_relays < 1:
            raise ConfigError("sim.n_relays: must be >= 1")
        if self.horizon < 1:
            raise ConfigError("sim.horizon: must be >= 1")
        if self.trials < 1:
            raise ConfigError("sim.trials: must be >= 1")
        if self.gh_m < 1:
            raise ConfigError("sim.gh_m: must be >= 1")
        if self.channel.eps_mf > ws.cell * (1.0 + 1e-12):
            raise ConfigError("channel.eps_mf: must not exceed workspace.cell")
        if len(self.initial_cells) != self.n_relays:
            raise ConfigError("sim.initial_cells: need exactly one cell per relay")
        snapped = []
        for p in self.initial_cells:
            c = ws.snap(p)
            if not ws.in_relay_region(c):
                raise ConfigError(f"sim.initial_cells: {p} falls outside the relay region")
            snapped.append(ws.cell_coords(c))
        if len(set(snapped)) != len(snapped):
            raise ConfigError("sim.initial_cells: cells must be distinct")
        if not self.policies:
            raise ConfigError("sim.policies: need at least one policy")
        labels = [k.kind for k in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError("sim.policies: policy kinds must be unique")
        if self.failures is not None and self.failures.window[1] > self.horizon:
            raise ConfigError("sim.failures.window: must lie within the horizon")
        if self.failures is not None and self.failures.count > self.n_relays:
            raise ConfigError("sim.failures.count: cannot exceed n_relays")


@dataclass
class TrialResult:
    """Realized per-slot SINR and trajectories of every policy, one trial."""

    trial_index: int
    sinr: dict            # policy label -> (horizon,) linear SINR
    trajectories: dict    # policy label -> (horizon, R, 2) positions
    failure_slot: int | None = None
    failure_relays: tuple[int, ...] = ()


@dataclass
class PolicyRunState:
    """Mutable bookkeeping for one policy over one trial."""

    kind: PolicyKind
    grid: chn.GridField
    cfg: SimConfig
    rng: np.random.Generator
    positions: np.ndarray          # (horizon, R, 2); row t-1 = slot t
    history: gaussian.History
    v: np.ndarray                  # (horizon,)
    fail_from: np.ndarray          # per relay, first slot at which it can no longer move

    @classmethod
    def start(cls, kind: PolicyKind, grid: chn.GridField, cfg: SimConfig,
              rng: np.random.Generator, fail_from: np.ndarray) -> "PolicyRunState":
        pos = np.zeros((cfg.horizon, cfg.n_relays, 2))
        pos[0] = np.array([cfg.workspace.snap(p) for p in cfg.initial_cells])
        return cls(kind=kind, grid=grid, cfg=cfg, rng=rng, positions=pos,
                   history=gaussian.history_empty(cfg.n_relays, cfg.channel, cfg.workspace),
                   v=np.zeros(cfg.horizon), fail_from=fail_from)


def _observe(state: PolicyRunState, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Log-scale gains (F, G) in dB at the slot-t relay positions."""
    cfg = state.cfg
    grid = state.grid
    pos = state.positions[t - 1]
    idx = np.array([grid.cell_id(p) for p in pos])
    n = len(grid.cells)
    ds = np.linalg.norm(pos - np.asarray(cfg.workspace.p_s), axis=1)
    dd = np.linalg.norm(pos - np.asarray(cfg.workspace.p_d), axis=1)
    f_db = (-10.0 * np.log10(ds) * cfg.channel.ell
            + grid.shadow[t - 1, idx] + grid.mpath[t - 1, idx])
    g_db = (-10.0 * np.log10(dd) * cfg.channel.ell
            + grid.shadow[t - 1, n + idx] + grid.mpath[t - 1, n + idx])
    return f_db, g_db


def run_slot(state: PolicyRunState, t: int) -> PolicyRunState:
    """Advance one TDMA slot: observe, beamform, learn, then reposition.

    Next-slot cells are decided relay by relay in index order; cells already
    claimed this round and current cells of relays that have not decided yet
    are pruned from the feasible set (own center always stays available), so
    the per-slot separation floor survives every transition. Failed relays
    keep beamforming from the cell they last reached.
    """
    cfg = state.cfg
    ws = cfg.workspace
    f_db, g_db = _observe(state, t)
    snap = GainSnapshot(chn.field_to_gain(f_db, cfg.channel.rho),
                        chn.field_to_gain(g_db, cfg.channel.rho))
    state.v[t - 1] = v_second_stage(snap, cfg.radio)
    state.history = gaussian.history_append(
        state.history, state.positions[t - 1], np.concatenate([f_db, g_db]),
        cfg.channel, ws)

    if t >= cfg.horizon:
        return state

    current = state.positions[t - 1]
    claimed: set[tuple[int, int]] = set()
    pending = {ws.cell_coords(current[j]) for j in range(cfg.n_relays)}
    nxt = np.empty_like(current)
    for i in range(cfg.n_relays):
        own = ws.cell_coords(current[i])
        pending.discard(own)
        if t >= state.fail_from[i]:
            choice = current[i]
        else:
            cand = ws.neighbors9(current[i])
            keep = [c for c in cand
                    if (key := ws.cell_coords(c)) == own
                    or (key not in claimed and key not in pending)]
            fs = FeasibleSet(center=current[i], cells=np.array(keep))
            choice = policy.decide(state.kind, i, state.history, fs, state.grid,
                                   t + 1, cfg.channel, cfg.radio, ws, state.rng)
        claimed.add(ws.cell_coords(choice))
        nxt[i] = choice
    state.positions[t] = nxt
    return state


def run_trial(cfg: SimConfig, trial_index: int) -> TrialResult:
    """One seeded trial: a shared field realization, all policies over it."""
    ws = cfg.workspace
    root = np.random.SeedSequence(entropy=(cfg.seed, trial_index))
    field_ss, failure_ss, policy_root = root.spawn(3)
    grid = chn.sample_grid_field(ws.relay_cells(), cfg.horizon, cfg.channel, ws,
                                 seed=field_ss)

    fail_from = np.full(cfg.n_relays, np.inf)
    failure_slot: int | None = None
    failure_relays: tuple[int, ...] = ()
    if cfg.failures is not None and cfg.failures.count > 0:
        frng = np.random.default_rng(failure_ss)
        lo, hi = cfg.failures.window
        failure_slot = int(frng.integers(lo, hi + 1))
        failure_relays = tuple(
            int(i) for i in np.sort(frng.choice(cfg.n_relays, cfg.failures.count,
                                                replace=False)))
        fail_from[list(failure_relays)] = failure_slot

    sinr: dict[str, np.ndarray] = {}
    traj: dict[str, np.ndarray] = {}
    for kind, pss in zip(cfg.policies, policy_root.spawn(len(cfg.policies))):
        state = PolicyRunState.start(kind, grid, cfg, np.random.default_rng(pss),
                                     fail_from)
        for t in range(1, cfg.horizon + 1):
            run_slot(state, t)
        sinr[kind.kind] = state.v
        traj[kind.kind] = state.positions
    return TrialResult(trial_index=trial_index, sinr=sinr, trajectories=traj,
                       failure_slot=failure_slot, failure_relays=failure_relays)


@dataclass
class Aggregate:
    """Per-policy per-slot Monte-Carlo statistics of the achieved SINR."""

    policies: tuple[str, ...]
    n_trials: int
    horizon: int
    mean_sinr_db: np.ndarray       # 10 log10 of the mean linear SINR, (P, T)
    mean_db_of_trials: np.ndarray  # mean over trials of per-trial dB values
    std_db: np.ndarray             # std (ddof=1) over trials of per-trial dB values

    @classmethod
    def from_trials(cls, trials: list[TrialResult],
                    policies: tuple[str, ...]) -> "Aggregate":
        trials = sorted(trials, key=lambda tr: tr.trial_index)
        horizon = len(trials[0].sinr[policies[0]])
        mean_lin = np.empty((len(policies), horizon))
        mean_db = np.empty_like(mean_lin)
        std_db = np.empty_like(mean_lin)
        for p, label in enumerate(policies):
            v = np.stack([tr.sinr[label] for tr in trials])       # (n, T)
            db = 10.0 * np.log10(v)
            mean_lin[p] = v.mean(axis=0)
            mean_db[p] = db.mean(axis=0)
            std_db[p] = db.std(axis=0, ddof=1) if len(trials) > 1 else 0.0
        return cls(policies=policies, n_trials=len(trials), horizon=horizon,
                   mean_sinr_db=10.0 * np.log10(mean_lin),
                   mean_db_of_trials=mean_db, std_db=std_db)


def _trial_worker(args: tuple[SimConfig, int]) -> TrialResult:
    return run_trial(*args)


def _limit_worker_blas() -> None:
    # one BLAS thread everywhere: parallelism lives across trials, and a
    # fixed thread count keeps results bit-identical for any --threads value
    try:
        import threadpoolctl

        global _BLAS_LIMIT
        _BLAS_LIMIT = threadpoolctl.threadpool_limits(1)
    except Exception:
        pass


def run_trials(cfg: SimConfig, threads: int = 0) -> list[TrialResult]:
    """All trials of an experiment, optionally across worker processes.

    Results come back ordered by trial index and are bit-identical for any
    threads setting.
    """
    if threads == 0:
        threads = os.cpu_count() or 1
    indices = range(cfg.trials)
    if threads <= 1 or cfg.trials == 1:
        try:
            import threadpoolctl

            with threadpoolctl.threadpool_limits(1):
                return [run_trial(cfg, i) for i in indices]
        except ImportError:
            return [run_trial(cfg, i) for i in indices]
    chunk = max(1, cfg.trials // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads,
                             initializer=_limit_worker_blas) as pool:
        return list(pool.map(_trial_worker, [(cfg, i) for i in indices],
                             chunksize=chunk))


def run_experiment(cfg: SimConfig, threads: int = 0) -> Aggregate:
    """Run every trial and reduce to per-policy per-slot statistics."""
    labels = tuple(k.kind for k in cfg.policies)
    return Aggregate.from_trials(run_trials(cfg, threads), labels)
