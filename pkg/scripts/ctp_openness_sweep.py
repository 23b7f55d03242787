#!/usr/bin/env python3
"""Mean travel distance of inferred CTP policies across edge openness levels.

Runs the temperature sweep on the shipped 20-node/46-edge graph once per
openness level and writes one directory per level plus a combined
``plot.csv`` (policy curves and the random/clairvoyant envelope).

    python3 scripts/ctp_openness_sweep.py --out results/ctp [--desk]
"""

import argparse
from pathlib import Path

from policy_inference.harness import (
    CTP_INSTANCE,
    ExperimentConfig,
    data_path,
    emit_plot_data,
    openness_sweep,
    write_sweep_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/ctp")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--desk", action="store_true",
                    help="20 000 iterations and 2 000 episodes per temperature")
    args = ap.parse_args()

    iterations, episodes = (20_000, 2_000) if args.desk else (100_000, 10_000)
    config = ExperimentConfig(env="ctp", instance_path=str(data_path(CTP_INSTANCE)),
                              iterations=iterations, eval_episodes=episodes, seed=args.seed)
    out = Path(args.out)
    results = openness_sweep(config, out_dir=out)
    rows = [r for level in results.values() for r in level]
    write_sweep_csv(rows, out / "sweep.csv")
    emit_plot_data(out / "sweep.csv", out / "plot.csv")

    for p, level in results.items():
        policy = [r for r in level if r.tag == "policy"][-1]
        rand = next(r for r in level if r.tag == "random")
        clair = next(r for r in level if r.tag == "clairvoyant")
        print(f"p={p:.1f}  clairvoyant {-clair.mean_reward:8.2f}  "
              f"policy(T={policy.temperature:g}) {-policy.mean_reward:8.2f}  "
              f"random {-rand.mean_reward:8.2f}")


if __name__ == "__main__":
    main()
