"""Command-line entry point: ``gpmw {run,validate,fit,export,routes}``."""

from __future__ import annotations

import argparse
import collections
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .games import TntpError
from .gp import ConfigError, NumericalError
from .harness import LogError, RunError, export, load_config, run_experiment, write_outputs
from .harness.build import STREAM_FIT, build_environment, build_learner, derive_seed, network_and_routes
from .harness.runner import fresh_seed

OUTPUT_ENV = "GPMW_OUTPUT_DIR"

log = logging.getLogger("gpmw")


def _out_dir(args, cfg=None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get(OUTPUT_ENV):
        base = Path(os.environ[OUTPUT_ENV])
        return base / cfg.name if cfg is not None else base
    if cfg is not None:
        return Path(cfg.output_dir)
    return Path("results")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        seed = fresh_seed()
        print(f"no seed configured; generated seed {seed}")
    cfg.seed = seed
    variants = [args.variant] if args.variant else cfg.variant_names()
    results = {}
    for v in variants:
        log.info("running %s / %s: %d repeats x %d rounds", cfg.name, v, cfg.repeats, cfg.horizon)
        results[v] = run_experiment(cfg, v if cfg.variants else None, parallel=args.parallel, seed=seed)
    out = _out_dir(args, cfg)
    summaries = write_outputs(out, results)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    if not args.quiet:
        for v, s in summaries.items():
            finals = ", ".join(f"{k} {f['mean']:.6g} +- {f['sd']:.3g}" for k, f in s["final"].items())
            print(f"{v}: final {finals}")
        print(f"wrote {sum(len(r) for r in results.values())} logs and summary.json to {out}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"config ok: {cfg.name} ({cfg.kind}), T={cfg.horizon}, repeats={cfg.repeats}, variants={cfg.variant_names()}")
    env = cfg.environment
    if cfg.kind == "matrix":
        print(f"K={env.get('K', 30)} T={cfg.horizon}")
    elif cfg.kind == "robust-bo":
        print(f"M={env.get('M', 200)} U={env.get('U', 50)} p={env.get('p', 15)} T={cfg.horizon}")
    else:
        network, agents = network_and_routes(cfg)
        counts = [len(a.routes) for a in agents]
        hist = collections.Counter(counts)
        print(f"network: {network.n_edges} edges, {len(network.nodes)} nodes")
        print(f"agents: {len(agents)}")
        print("route count histogram: " + " ".join(f"{k}:{hist[k]}" for k in sorted(hist)))
        print("per-agent route counts: " + " ".join(str(c) for c in counts))
        la = env.get("learning_agents")
        n = len(agents) if la is None else (len(la) if isinstance(la, list) else la)
        if n > len(agents) or (isinstance(la, list) and max(la, default=0) >= len(agents)):
            raise ConfigError(f"{cfg.source}: environment.learning_agents: asks for agents beyond the {len(agents)} available")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else fresh_seed())
    env = build_environment(cfg, 0, seed)
    fitted = {}
    for v in cfg.variant_names():
        specs = cfg.learners_for(v if cfg.variants else None)
        for role, members in env.roles.items():
            spec = specs.get(role)
            if not spec or "fit" not in spec:
                continue
            for i in members:
                _, tree = build_learner(spec, env, i, cfg, 0, derive_seed(seed, 0, STREAM_FIT) + i)
                fitted.setdefault(v, {})[str(i)] = tree
    if not fitted:
        print("no learner declares a 'fit' section; nothing to do")
        return 0
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fitted_kernels.json").write_text(json.dumps(fitted, indent=1, sort_keys=True) + "\n")
    print(f"fitted {sum(len(x) for x in fitted.values())} kernels; wrote {out / 'fitted_kernels.json'}")
    return 0


def cmd_export(args) -> int:
    d = Path(args.dir or args.out or os.environ.get(OUTPUT_ENV, ""))
    if not str(d):
        raise LogError("no log directory given")
    summaries = export(d)
    if not args.quiet:
        for v, s in summaries.items():
            print(f"{v}: {s['repeats']} repeats, series {sorted(s['series'])}")
    return 0


def cmd_routes(args) -> int:
    cfg = load_config(args.config)
    if cfg.kind != "routing":
        raise ConfigError(f"{args.config}: the routes command needs a routing config")
    network, agents = network_and_routes(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "routes.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "origin", "destination", "demand", "route", "free_flow", "ratio_to_shortest", "nodes"])
        for i, a in enumerate(agents):
            for k, (r, c) in enumerate(zip(a.routes, a.free_flow)):
                nodes = [int(network.init[r[0]])] + [int(network.term[e]) for e in r]
                w.writerow([i, a.origin, a.destination, repr(a.demand), k, repr(c), repr(c / a.free_flow[0]), "-".join(map(str, nodes))])
    print(f"wrote {sum(len(a.routes) for a in agents)} routes for {len(agents)} agents to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpmw", description="No-regret learning in repeated games with GP-MW and baselines.")
    verb = argparse.ArgumentParser(add_help=False)
    g = verb.add_mutually_exclusive_group()
    g.add_argument("--quiet", "-q", action="store_true", help="only print errors")
    g.add_argument("--verbose", "-v", action="store_true", help="print progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[verb], help="run every variant of an experiment and write logs")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV}/<name>, else the config's output.dir)")
    r.add_argument("--seed", type=int, help="override the config's base seed")
    r.add_argument("--parallel", type=int, default=1, help="worker processes for repeats (default 1)")
    r.add_argument("--variant", help="run only this variant")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", parents=[verb], help="check a config without running it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("fit", parents=[verb], help="fit kernel hyperparameters declared in 'fit' sections")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("export", parents=[verb], help="rebuild summary and series files from logs")
    e.add_argument("dir", nargs="?", help="directory written by 'run'")
    e.add_argument("--out", help="same as the positional directory")
    e.set_defaults(func=cmd_export)

    rt = sub.add_parser("routes", parents=[verb], help="dump enumerated routes of a routing config")
    rt.add_argument("--config", required=True)
    rt.add_argument("--out")
    rt.set_defaults(func=cmd_routes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if getattr(args, "verbose", False):
        level = logging.INFO
    if getattr(args, "quiet", False):
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TntpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RunError, LogError, NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
