#!/usr/bin/env python3
"""Expected raw reward of inferred RockSample policies on the four shipped instances.

    python3 scripts/rocksample_sweep.py --out results/rocksample [--iterations N]
"""

import argparse
from pathlib import Path

from policy_inference.harness import (
    ROCKSAMPLE_INSTANCES,
    ExperimentConfig,
    data_path,
    emit_plot_data,
    run_sweep,
    write_sweep_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/rocksample")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=100_000)
    ap.add_argument("--eval-episodes", type=int, default=10_000)
    args = ap.parse_args()

    out = Path(args.out)
    rows = []
    for name in ROCKSAMPLE_INSTANCES:
        config = ExperimentConfig(env="rocksample", instance_path=str(data_path(name)),
                                  iterations=args.iterations, eval_episodes=args.eval_episodes,
                                  seed=args.seed)
        inst_rows = run_sweep(config, out / Path(name).stem)
        rows += inst_rows
        curve = "  ".join(f"T={r.temperature:g}:{r.mean_reward:.2f}"
                          for r in inst_rows if r.tag == "policy")
        heuristic = next(r for r in inst_rows if r.tag == "heuristic")
        print(f"{Path(name).stem:12s} {curve}  heuristic {heuristic.mean_reward:.2f}")
    write_sweep_csv(rows, out / "sweep.csv")
    emit_plot_data(out / "sweep.csv", out / "plot.csv")


if __name__ == "__main__":
    main()
