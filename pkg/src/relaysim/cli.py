"""Command-line entry points: simulate, validate, quadrature.

`simulate` runs a configured Monte-Carlo experiment and writes plot-ready
CSVs plus a manifest that pins the effective configuration; re-running a
manifest reproduces the CSVs byte for byte. `validate` executes the
built-in correctness suites. `quadrature` prints a Gauss-Hermite rule.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .config import apply_overrides, config_digest, config_to_dict, load_config_file, parse_config
from .params import ConfigError, NumericalError
from .sim import Aggregate, SimConfig, run_trials
from .validate import run_checks

ENV_SEED = "RELAYSIM_SEED"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_outputs(cfg: SimConfig, trials, out_dir: str, runtime: float) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    labels = tuple(k.kind for k in cfg.policies)
    agg = Aggregate.from_trials(trials, labels)

    qos_path = os.path.join(out_dir, "qos.csv")
    with open(qos_path, "w") as fh:
        fh.write("policy,t,mean_sinr_db,mean_db_of_trials,std_db,n_trials\n")
        for p, label in enumerate(labels):
            for t in range(cfg.horizon):
                fh.write(f"{label},{t + 1},{_fmt(agg.mean_sinr_db[p, t])},"
                         f"{_fmt(agg.mean_db_of_trials[p, t])},"
                         f"{_fmt(agg.std_db[p, t])},{agg.n_trials}\n")

    traj_path = os.path.join(out_dir, "trajectories.csv")
    with open(traj_path, "w") as fh:
        fh.write("trial,policy,relay,t,x,y\n")
        for tr in sorted(trials, key=lambda tr: tr.trial_index):
            for label in labels:
                pos = tr.trajectories[label]
                for relay in range(cfg.n_relays):
                    for t in range(cfg.horizon):
                        fh.write(f"{tr.trial_index},{label},{relay},{t + 1},"
                                 f"{_fmt(pos[t, relay, 0])},{_fmt(pos[t, relay, 1])}\n")

    manifest = {
        "digest": config_digest(cfg),
        "seed": cfg.seed,
        "tool_version": __version__,
        "runtime_seconds": runtime,
        "outputs": {"qos_csv": qos_path, "trajectories_csv": traj_path},
        "config": config_to_dict(cfg),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_simulate(config_path: str, out_dir: str, overrides: list[str],
                 threads: int = 0) -> int:
    try:
        raw = load_config_file(config_path)
        raw = apply_overrides(raw, overrides)
        if ENV_SEED in os.environ:
            try:
                raw.setdefault("sim", {})["seed"] = int(os.environ[ENV_SEED])
            except ValueError:
                raise ConfigError(f"{ENV_SEED}: expected an integer seed") from None
        cfg = parse_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    started = time.monotonic()
    try:
        trials = run_trials(cfg, threads)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    write_outputs(cfg, trials, out_dir, runtime=time.monotonic() - started)
    return 0


def cmd_validate(level: str = "quick") -> int:
    results = run_checks(level)
    width = max(len(r.name) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {mark}  {r.detail}")
    failures = [r.name for r in results if not r.passed]
    if failures:
        print(f"{len(failures)} check(s) failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def cmd_quadrature(m: int) -> int:
    if m < 1:
        print("quadrature: resolution must be >= 1", file=sys.stderr)
        return 2
    from .policy import gh_build

    rule = gh_build(m)
    for node, weight in zip(rule.nodes, rule.weights):
        print(f"{format(node, '.15g')},{format(weight, '.15g')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaysim",
                                     description="spatially controlled relay beamforming simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a JSON config")
    sim.add_argument("--config", required=True, help="path to the JSON config")
    sim.add_argument("--out", required=True, help="output directory for CSVs and manifest")
    sim.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config field (dotted path)")
    sim.add_argument("--threads", type=int, default=0,
                     help="worker processes for trials (0 = auto)")

    val = sub.add_parser("validate", help="run the built-in correctness checks")
    val.add_argument("--level", choices=("quick", "full"), default="quick")

    quad = sub.add_parser("quadrature", help="print a Gauss-Hermite rule as CSV")
    quad.add_argument("--m", type=int, required=True, help="quadrature resolution")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.overrides, args.threads)
    if args.command == "validate":
        return cmd_validate(args.level)
    return cmd_quadrature(args.m)


if __name__ == "__main__":
    sys.exit(main())
