#!/usr/bin/env python3
"""Headline comparison experiment: agnostic vs h1 vs h2 vs oracle.

Writes the experiment config next to the outputs and drives the CLI, so the
produced manifest reproduces the run exactly. Plot qos.csv (mean_sinr_db
against t, one line per policy) to get the policy-comparison figure.
"""
import argparse
import json
import pathlib
import sys

from relaysim.cli import main as relaysim_main

CONFIG = {
    "workspace": {
        "bounds": [[0, 30], [0, 30]],
        "relay_region": [[0, 30], [12, 18]],
        "cell": 1.0,
        "p_s": [15, 0],
        "p_d": [15, 30],
    },
    "channel": {"ell": 3, "rho": 20, "sigma_xi2": 20, "eta2": 50,
                "beta": 10, "gamma": 5, "delta": 1},
    "radio": {"p0": 25, "pc": 25, "sigma2": 1, "sigma_d2": 1},
    "sim": {
        "n_relays": 8,
        "horizon": 40,
        "initial_cells": [[x + 0.5, 14.5] for x in range(1, 30, 4)],
        "policies": ["agnostic", "h1", "h2", "oracle"],
        "trials": 1000,
        "seed": 20170501,
    },
}

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/headline")
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--threads", type=int, default=0)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = json.loads(json.dumps(CONFIG))
    if args.trials is not None:
        cfg["sim"]["trials"] = args.trials
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg, indent=2) + "\n")
    sys.exit(relaysim_main(["simulate", "--config", str(cfg_path),
                            "--out", str(out), "--threads", str(args.threads)]))
