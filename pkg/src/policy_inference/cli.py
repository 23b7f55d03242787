"""Command line entry point.

    policy-inference infer    --env ctp --instance I.json [--config C.json] [--seed N] [--sampler lmh]
    policy-inference sweep    --env ctp --instance I.json [--config C.json] [--out DIR]
    policy-inference evaluate --env ctp --instance I.json --theta THETA.json [--episodes N]
    policy-inference gen-instance --env ctp --nodes 20 --edges 46 --seed N [--out FILE]
    policy-inference plot-data results/sweep.csv [--out plot.csv]

The output directory defaults to $POLICY_INFERENCE_OUT, else ./results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .envs import ctp, rocksample
from .samplers import make_rng


def _experiment_args(p: argparse.ArgumentParser):
    p.add_argument("--env", choices=["ctp", "rocksample"], required=True)
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--sampler", choices=["mh", "lmh", "is"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--open-prob", type=float,
                   help="CTP only: override every edge's open probability")
    p.add_argument("--out", help="output directory")


def _config(args) -> harness.ExperimentConfig:
    overrides = dict(env=args.env, instance_path=args.instance, seed=args.seed,
                     sampler=args.sampler, iterations=args.iterations,
                     eval_episodes=args.eval_episodes)
    if args.config:
        return harness.ExperimentConfig.load(args.config, **overrides)
    return harness.ExperimentConfig.from_dict({}, **overrides)


def _instance(args):
    inst = harness.load_instance(args.env, args.instance)
    if getattr(args, "open_prob", None) is not None:
        if args.env != "ctp":
            raise harness.ConfigError("--open-prob applies to ctp only")
        inst = inst.with_open_prob(args.open_prob)
    return inst


def _out(args) -> Path:
    return Path(args.out) if args.out else harness.default_out_dir()


def cmd_infer(args):
    config = _config(args)
    sim = harness.make_simulator(config.env, _instance(args))
    rng = make_rng(config.seed)
    result = harness.run_inference(config, sim, rng)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    for chain in result.chains:
        harness.write_chain_csv(chain, out / f"chain_{chain.temperature:g}.csv",
                                max_rows=config.chain_rows or None)
    (out / "theta_mode.json").write_text(result.theta_mode.to_json() + "\n")
    for chain in result.chains:
        print(f"T={chain.temperature:g} theta_acceptance={chain.state.theta_acceptance_rate:.4f} "
              f"mean_reward={chain.mean_reward():.4f}")
    print(f"wrote {out / 'theta_mode.json'}")


def cmd_sweep(args):
    config = _config(args)
    out = _out(args)
    rows = harness.run_sweep(config, out, instance=_instance(args))
    for r in rows:
        print(",".join(r.row()))
    print(f"wrote {out / 'sweep.csv'}")


def cmd_evaluate(args):
    inst = _instance(args)
    sim = harness.make_simulator(args.env, inst)
    theta = harness.load_theta(sim, args.theta)
    rng = make_rng(args.seed)
    print(",".join(harness.SWEEP_HEADER))
    s = harness.evaluate_policy(sim, theta, args.episodes, rng)
    print(",".join(s.row()))
    if args.env == "ctp":
        ev = harness.CtpEvaluator(sim, args.episodes, rng)
        connected = dataclasses.replace(ev.policy(theta), tag="policy_connected")
        for row in (connected, ev.random(), ev.clairvoyant()):
            print(",".join(row.row()))


def cmd_gen_instance(args):
    if args.env == "ctp":
        inst = ctp.generate_instance(args.nodes, args.edges, args.seed, args.open_prob)
    else:
        inst = rocksample.generate_instance(args.n, args.rocks, args.seed)
    text = json.dumps(inst.to_json(), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def cmd_plot_data(args):
    text = harness.emit_plot_data(args.sweep_csv, args.out)
    if not args.out:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="policy-inference", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="run the annealed sampler and write chains + theta mode")
    _experiment_args(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep", help="full protocol: infer, evaluate, baselines, sweep.csv")
    _experiment_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="evaluate a policy from a theta JSON file")
    p.add_argument("--env", choices=["ctp", "rocksample"], required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--open-prob", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-instance", help="generate a seeded instance")
    p.add_argument("--env", choices=["ctp", "rocksample"], required=True)
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--edges", type=int, default=46)
    p.add_argument("--open-prob", type=float, default=0.5)
    p.add_argument("--n", type=int, default=7, help="RockSample grid side")
    p.add_argument("--rocks", type=int, default=8, help="RockSample rock count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_instance)

    p = sub.add_parser("plot-data", help="long-format plot table from a sweep.csv")
    p.add_argument("sweep_csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (harness.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
