#!/usr/bin/env python3
"""Motion-failure robustness sweep for the second-order heuristic.

One run per (correlation time, failure count) pair; each run gets its own
output directory with config, CSVs and manifest. Failures hit in slots 5-6
and halted relays keep beamforming from their last cell.
"""
import argparse
import json
import pathlib
import sys

from relaysim.cli import main as relaysim_main

BASE = {
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
        "horizon": 20,
        "initial_cells": [[x + 0.5, 14.5] for x in range(1, 30, 4)],
        "policies": ["h2"],
        "trials": 500,
        "seed": 20170501,
        "failures": {"window": [5, 6], "count": 0},
    },
}

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/failures")
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--threads", type=int, default=0)
    args = ap.parse_args()

    rc = 0
    for gamma in (5, 15):
        for count in (0, 1, 3, 5):
            cfg = json.loads(json.dumps(BASE))
            cfg["channel"]["gamma"] = gamma
            cfg["sim"]["failures"]["count"] = count
            if args.trials is not None:
                cfg["sim"]["trials"] = args.trials
            out = pathlib.Path(args.out) / f"gamma{gamma}_fail{count}"
            out.mkdir(parents=True, exist_ok=True)
            cfg_path = out / "config.json"
            cfg_path.write_text(json.dumps(cfg, indent=2) + "\n")
            rc |= relaysim_main(["simulate", "--config", str(cfg_path),
                                 "--out", str(out), "--threads", str(args.threads)])
    sys.exit(rc)
