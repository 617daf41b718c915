"""Command-line entry point.

Subcommands: collect | train | plan | imitate | eval | gradcheck.
Exit codes: 0 success, 1 runtime failure, 2 bad configuration/usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import control as C
from . import data as D
from . import env as E
from . import harness as H
from . import report as R
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, load_config
from .gradcheck import REL_TOL, run_suite
from .rng import child_rng
from .training import TRAIN_VARIANTS, train

ENV_MODES = {"det": "deterministic", "stoch": "stochastic"}


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    if getattr(args, "env", None) is not None:
        cfg.env = dataclasses.replace(cfg.env, mode=ENV_MODES[args.env])
    if getattr(args, "episodes", None) is not None:
        cfg.suite.episodes = args.episodes
    if getattr(args, "denominator", None) is not None:
        cfg.train.denominator = args.denominator
    if getattr(args, "variant", None) is not None:
        cfg.train.variant = args.variant
    return cfg


def cmd_collect(args) -> int:
    cfg = _load(args)
    ds = D.collect_dataset(cfg.env, args.trajectories, args.length, cfg.seed)
    out = args.out or "dataset.txt"
    D.save_dataset(ds, out)
    print(f"wrote {len(ds)} transitions to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    ds = D.load_dataset(args.dataset)
    tc = dataclasses.replace(cfg.train, seed=cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    bundle, curve = train(ds, tc, log=print if args.verbose else None)
    tag = tc.variant
    ckpt = os.path.join(cfg.out_dir, f"{tag}.ckpt")
    save_checkpoint(bundle, ckpt)
    csv_path = os.path.join(cfg.out_dir, f"loss_{tag}.csv")
    R.write_loss_csv(curve, csv_path)
    R.plot_loss_curve(curve, os.path.join(cfg.out_dir, f"loss_{tag}.png"))
    print(f"wrote {ckpt} and {csv_path}")
    return 0


def _guard_variant(bundle, need: str, task: str):
    ok = bundle.has_forward() if need == "forward" else bundle.has_inverse()
    if not ok:
        raise ConfigError(f"checkpoint variant {bundle.variant!r} lacks the "
                          f"{need} model required by {task}")


def cmd_plan(args) -> int:
    cfg = _load(args)
    bundle = load_checkpoint(args.checkpoint)
    _guard_variant(bundle, "forward", "plan")
    os.makedirs(cfg.out_dir, exist_ok=True)
    det = dataclasses.replace(cfg.env, mode="deterministic")
    n_eps = args.episodes if args.episodes is not None else 1
    for ep in range(n_eps):
        start, goal = H.episode_inputs("goal", det, args.goal, cfg.seed, ep)
        rec = C.run_goal_directed(bundle, cfg.env, start, goal, cfg.plan,
                                  child_rng(cfg.seed, f"actor/{args.goal}", ep),
                                  child_rng(cfg.seed, f"noise/{args.goal}", ep))
        stem = os.path.join(cfg.out_dir, f"plan_{args.goal}_{ep:03d}")
        with open(stem + ".json", "w") as f:
            json.dump(rec.to_dict(), f)
            f.write("\n")
        R.plot_episode(rec, goal, stem + ".png")
        if args.frames:
            R.save_frames(rec, goal, stem + "_frames")
        print(f"episode {ep}: final error {rec.final_error:.3f} px -> {stem}.json")
    return 0


def cmd_imitate(args) -> int:
    cfg = _load(args)
    bundle = load_checkpoint(args.checkpoint)
    _guard_variant(bundle, "inverse", "imitate")
    os.makedirs(cfg.out_dir, exist_ok=True)
    det = dataclasses.replace(cfg.env, mode="deterministic")
    n_eps = args.episodes if args.episodes is not None else 1
    for ep in range(n_eps):
        demo = H.episode_inputs("imitation", det, args.goal, cfg.seed, ep,
                                cfg.suite.demo_length)
        rec = C.imitate(bundle, cfg.env, demo,
                        child_rng(cfg.seed, f"noise/{args.goal}", ep))
        stem = os.path.join(cfg.out_dir, f"imitate_{args.goal}_{ep:03d}")
        with open(stem + ".json", "w") as f:
            json.dump(rec.to_dict(), f)
            f.write("\n")
        R.plot_episode(rec, demo.states[-1], stem + ".png")
        if args.frames:
            R.save_frames(rec, demo.states[-1], stem + "_frames")
        print(f"episode {ep}: trajectory-average error {rec.traj_avg_error:.3f} px -> {stem}.json")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    if not cfg.methods:
        raise ConfigError("eval needs a config file with a methods list")
    if args.goal is not None:
        cfg.suite.goal_kinds = [args.goal]
    if args.env is not None:
        cfg.suite.env_modes = [ENV_MODES[args.env]]
    methods = []
    for ref in cfg.methods:
        if ref.kind == "model":
            methods.append(H.Method(ref.name, "model", bundle=load_checkpoint(ref.checkpoint)))
        elif ref.kind == "nearest":
            bank = C.NearestNeighborBank(D.load_dataset(ref.dataset))
            methods.append(H.Method(ref.name, "nearest", bank=bank))
        else:
            methods.append(H.Method(ref.name, "random"))
    per_seed, aggregates = H.evaluate(methods, cfg.suite, cfg.env, cfg.plan,
                                      log=print if args.verbose else None)
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, "metrics.csv")
    R.write_metrics_csv(per_seed, csv_path)
    R.write_metrics_json(aggregates, os.path.join(cfg.out_dir, "metrics.json"))
    R.plot_metrics(aggregates, os.path.join(cfg.out_dir, "metrics.png"))
    for row in aggregates:
        print(f"{row.method:24s} {row.env_mode:13s} {row.goal_kind:8s} "
              f"success {row.success_rate:.3f} +/- {row.success_std:.3f}")
    print(f"wrote {csv_path}")
    return 0


def cmd_gradcheck(args) -> int:
    rows = run_suite(seed=args.seed if args.seed is not None else 7,
                     n_points=args.points)
    ok = True
    for name, err, passed in rows:
        print(f"{'PASS' if passed else 'FAIL'}  {name:32s} max rel err {err:.3e}")
        ok &= passed
    print(f"gradcheck: {'all passed' if ok else 'FAILURES'} (tolerance {REL_TOL:g})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ropedyn")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", default=None)

    p = sub.add_parser("collect", help="random-exploration dataset")
    common(p)
    p.add_argument("--trajectories", type=int, default=2000)
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--env", choices=list(ENV_MODES), default=None)
    p.set_defaults(fn=cmd_collect)

    p = sub.add_parser("train", help="train a model variant")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", choices=list(TRAIN_VARIANTS), default=None)
    p.add_argument("--denominator", choices=["paper", "standard"], default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("plan", help="goal-directed planning episodes")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--goal", choices=list(E.GOAL_KINDS), default="straight")
    p.add_argument("--env", choices=list(ENV_MODES), default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--frames", action="store_true")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("imitate", help="imitation-from-observation episodes")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--goal", choices=list(E.GOAL_KINDS), default="straight")
    p.add_argument("--env", choices=list(ENV_MODES), default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--frames", action="store_true")
    p.set_defaults(fn=cmd_imitate)

    p = sub.add_parser("eval", help="run a metric suite from a config file")
    common(p)
    p.add_argument("--env", choices=list(ENV_MODES), default=None)
    p.add_argument("--goal", choices=list(E.GOAL_KINDS), default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(fn=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
