"""Command line entry point: ``stubborn <subcommand>``."""

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from .detection import NBModel
from .harness import (
    SuiteConfig,
    build_world,
    collect_training_events,
    load_worlds,
    parse_seed_range,
    run_ablation,
    run_suite,
    seed_list,
    train_verifier,
)
from .io import save_world, write_jsonl, write_world_snapshots


def _config(args):
    cfg = SuiteConfig.load(args.config) if getattr(args, "config", None) else SuiteConfig()
    if getattr(args, "master_seed", None) is not None:
        cfg = replace(cfg, master_seed=args.master_seed)
    return cfg


def cmd_gen_worlds(args):
    cfg = _config(args)
    for s in seed_list(parse_seed_range(args.seeds)):
        world = build_world(s, cfg)
        print(save_world(world, args.out))
        if args.pgm:
            write_world_snapshots(world, args.out)


def cmd_train_verifier(args):
    cfg = replace(_config(args), train_seeds=parse_seed_range(args.seeds))
    worlds = load_worlds(args.worlds, seed_list(cfg.train_seeds)) if args.worlds else None
    events = collect_training_events(cfg, worlds)
    model = train_verifier(events)
    model.save(args.out)
    write_jsonl(os.path.splitext(args.out)[0] + ".events.jsonl", events)
    print(f"{len(events)} verification events, categories {sorted(model.entries)} -> {args.out}")


def cmd_run(args):
    cfg = _config(args)
    if args.seeds:
        cfg = replace(cfg, eval_seeds=parse_seed_range(args.seeds))
    cfg.validate()
    model = NBModel.load(args.model) if args.model else None
    worlds = load_worlds(args.worlds, seed_list(cfg.eval_seeds)) if args.worlds else None
    report = run_suite(cfg, model=model, worlds=worlds, out_dir=args.out)
    sys.stdout.write(report.csv_text())
    if args.snapshot_episode:
        _snapshot(cfg, model, worlds, args.snapshot_episode, os.path.join(args.out, "maps"))


def _snapshot(cfg, model, worlds, which, out_dir):
    """Re-run one episode (``seed:episode``) and dump its final map channels."""
    from .harness import episode_rng, episode_specs, run_episode

    seed, ep = (int(v) for v in which.split(":"))
    world = (worlds or {}).get(seed) or build_world(seed, cfg)
    spec = episode_specs(world, cfg, ep + 1)[ep]
    run_episode(world, spec, cfg, model, episode_rng(cfg.master_seed, seed, ep), snapshot=(out_dir, f"w{seed}_e{ep}", ()))


def cmd_ablate(args):
    cfg = _config(args).validate()
    model = NBModel.load(args.model) if args.model else None
    seeds = seed_list(cfg.eval_seeds) + seed_list(cfg.train_seeds)
    worlds = load_worlds(args.worlds, seeds) if args.worlds else None
    report = run_ablation(cfg, model=model, worlds=worlds, out_dir=args.out)
    sys.stdout.write(report.csv_text())


def cmd_report(args):
    path = os.path.join(args.input, "summary.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        with open(path) as fh:
            sys.stdout.write(fh.read())


def build_parser():
    p = argparse.ArgumentParser(prog="stubborn")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-worlds", help="generate world JSON files")
    g.add_argument("--seeds", required=True, help="inclusive range A..B")
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    g.add_argument("--pgm", action="store_true", help="also write occupancy and label PGMs")
    g.set_defaults(func=cmd_gen_worlds)

    t = sub.add_parser("train-verifier", help="collect verification events and fit the verifier")
    t.add_argument("--worlds")
    t.add_argument("--seeds", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--master-seed", type=int)
    t.set_defaults(func=cmd_train_verifier)

    r = sub.add_parser("run", help="evaluate one configuration")
    r.add_argument("--worlds")
    r.add_argument("--seeds")
    r.add_argument("--config")
    r.add_argument("--model")
    r.add_argument("--out", required=True)
    r.add_argument("--master-seed", type=int)
    r.add_argument("--snapshot-episode", metavar="SEED:EP", help="write final map PGMs for one episode")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("ablate", help="evaluate the collision-avoidance ladder I..V")
    a.add_argument("--worlds")
    a.add_argument("--config")
    a.add_argument("--model")
    a.add_argument("--out", required=True)
    a.add_argument("--master-seed", type=int)
    a.set_defaults(func=cmd_ablate)

    rep = sub.add_parser("report", help="print a results summary")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--format", choices=("csv", "json"), default="csv")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
