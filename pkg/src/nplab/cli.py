"""Command-line interface: ``nplab run | list-problems | oracle lqg | check-grad``."""

import argparse
import os
import sys
from pathlib import Path

from . import deep_bsde, gradcheck, runner, streams
from .config import parse_config
from .exceptions import ConfigParseError, ConfigurationError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DIVERGED = 3


def _load(path):
    text = Path(path).read_text(encoding="utf-8")
    config = parse_config(text)
    seed = os.environ.get("NPLAB_SEED")
    if seed is not None:
        try:
            config = config.with_seed(int(seed))
        except ValueError:
            raise ConfigParseError(f"NPLAB_SEED must be an integer, got {seed!r}") from None
    return config


def cmd_run(args):
    try:
        config = _load(args.config)
    except (ConfigParseError, ConfigurationError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = args.out or config.output or str(Path(args.config).with_suffix(""))
    result = runner.run(config, out=out, threads=args.threads)
    final = result.summary_dict()["final"]
    shown = ", ".join(f"{k}={v:.6g}" for k, v in final.items() if v is not None)
    print(f"{config.method}/{config.problem} seed={config.seed} status={result.status} {shown}")
    print(f"wrote {out}.csv {out}.json {out}.plot.csv {out}.params")
    return EXIT_OK if result.status == "ok" else EXIT_DIVERGED


def cmd_list(args):
    for key, methods in runner.list_problems():
        print(f"{key:16s} {', '.join(methods)}")
    return EXIT_OK


def cmd_oracle(args):
    streams.set_threads(args.threads)
    value, se = deep_bsde.lqg_reference(args.d, args.t, None, args.samples, args.seed)
    print(f"lqg d={args.d} T={args.t} samples={args.samples} seed={args.seed}")
    print(f"value {value!r}")
    print(f"stderr {se!r}")
    return EXIT_OK


def cmd_check_grad(args):
    try:
        config = _load(args.config)
    except (ConfigParseError, ConfigurationError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    worst = 0.0
    stats = {}
    for act, seed, err in gradcheck.run_suite(config.method, args.nets, config.seed, stats=stats):
        worst = max(worst, err)
        print(f"{config.method} {act:10s} seed={seed:<11d} rel_err={err:.3e}")
    print(f"redrawn cases (stencil across a kink): {stats['redrawn']}")
    verdict = "ok" if worst < args.tol else "FAILED"
    print(f"max relative error {worst:.3e} (tolerance {args.tol:g}): {verdict}")
    return EXIT_OK if worst < args.tol else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="nplab", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for path sampling; results do not depend on the count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output path prefix (default: [output] path or the config name)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list-problems", help="list registered problems and their methods")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("oracle", help="Monte Carlo reference values")
    osub = p.add_subparsers(dest="oracle", required=True)
    q = osub.add_parser("lqg", help="Cole-Hopf reference for the LQG control problem at x=0")
    q.add_argument("--d", type=int, default=100)
    q.add_argument("--t", type=float, default=1.0)
    q.add_argument("--samples", type=int, default=10**7)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    q.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-grad", help="finite-difference gradient checks for a config's method")
    p.add_argument("config")
    p.add_argument("--nets", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_check_grad)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
