"""Command-line entry point: ``run``, ``sweep``, ``adversary``, ``validate``, ``plot``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import adversary
from .agents import ALGORITHMS, agent_factory
from .envmodel import NonStationarityParams, compute_params
from .harness.experiments import ExperimentConfig, read_traces, run_experiment, sweep
from .harness.plot import emit_plot
from .harness.runner import stream
from .harness.suites import SUITES, run_suite

ADVERSARY_STREAM = 5


def _jsonable(obj):
    if is_dataclass(obj):
        return asdict(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in ("T", "K", "replications", "base_seed", "out_csv", "out_svg"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.env is not None:
        overrides["env.kind"] = args.env
    if args.env_file is not None:
        overrides["env.kind"], overrides["env.path"] = "file", args.env_file
    if args.alg is not None:
        overrides["alg.name"] = args.alg
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        overrides[key] = _parse_value(value)
    if args.env is not None and args.env != cfg.env.get("kind"):
        cfg.env = {"kind": args.env}
    return cfg.with_overrides(overrides)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override its fields")
    p.add_argument("--T", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--base-seed", dest="base_seed", type=int)
    p.add_argument("--env", choices=("switching", "drifting", "file"))
    p.add_argument("--env-file", help="sequence JSON (implies --env file)")
    p.add_argument("--alg", choices=ALGORITHMS)
    p.add_argument("--out", dest="out_csv", help="trace CSV path")
    p.add_argument("--svg", dest="out_svg", help="also write an SVG plot")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any field, e.g. env.gamma=4 or alg.delta=0.01 (repeatable)")


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    traces = run_experiment(cfg)
    if cfg.out_svg:
        Path(cfg.out_svg).write_text(emit_plot(traces))
    finals = [tr.final for tr in traces]
    print(f"{cfg.alg['name']} on {cfg.env_id}: mean final regret {np.mean(finals):.6g} "
          f"over {len(finals)} replications")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    grid = {}
    for item in args.grid:
        key, sep, values = item.partition("=")
        if not sep:
            raise SystemExit(f"--grid expects key=v1,v2,..., got {item!r}")
        grid[key] = [_parse_value(v) for v in values.split(",")]
    if args.table:
        with open(args.table, "w", newline="") as fh:
            sweep(cfg, grid, fh)
    else:
        sweep(cfg, grid, sys.stdout)
    return 0


def cmd_adversary(args) -> int:
    rng = stream(args.seed, ADVERSARY_STREAM)
    T, K = args.T, args.K
    diagnostics: dict = {"kind": args.kind, "T": T, "K": K, "seed": args.seed}
    if args.kind == "switching":
        hint = NonStationarityParams(args.gamma, float(args.gamma), 0.0)
        factory = agent_factory(args.target_alg, 2, T, hint)
        seq, plan = adversary.build_switching_adversary(factory, T, args.gamma, args.mc_runs, rng)
        diagnostics.update(target=args.target_alg, mc_runs=args.mc_runs, intervals=plan.diagnostics)
    elif args.kind == "drifting":
        hint = NonStationarityParams(T, args.drift, args.variance)
        factory = agent_factory(args.target_alg, K, T, hint)
        seq, env = adversary.build_drifting_lowerbound(factory, T, K, args.drift, args.variance,
                                                       args.mc_runs, rng)
        diagnostics.update(target=args.target_alg, mc_runs=args.mc_runs, interval_length=env.interval_length,
                           sigma=env.sigma, epsilon=env.epsilon, intervals=env.diagnostics)
    elif args.kind == "fullinfo-gamma":
        seq = adversary.build_fullinfo_gamma_lowerbound(K, T, args.gamma, rng)
    else:
        seq = adversary.build_fullinfo_variance_lowerbound(K, T, args.gamma, args.variance, rng)
    diagnostics["params"] = compute_params(seq)
    seq.save(args.out)
    sidecar = Path(args.diagnostics or Path(args.out).with_suffix(".diagnostics.json"))
    sidecar.write_text(json.dumps(diagnostics, indent=2, default=_jsonable) + "\n")
    print(f"wrote {args.out} and {sidecar}")
    return 0


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite in (None, ["all"]) else args.suite
    results = [run_suite(n) for n in names]
    for res in results:
        print(res.line(), flush=True)
    return 0 if all(r.passed for r in results) else 1


def cmd_plot(args) -> int:
    traces = []
    for path in args.csv:
        with open(path, newline="") as fh:
            traces.extend(read_traces(fh))
    svg = emit_plot(traces, title=args.title)
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsregret", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment and write its trace CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep; one summary row per cell")
    _add_config_flags(p)
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--table", help="summary CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("adversary", help="materialise a lower-bound sequence")
    p.add_argument("--kind", required=True, choices=("switching", "drifting", "fullinfo-gamma", "fullinfo-variance"))
    p.add_argument("--target-alg", default="rerun-ucbv", choices=ALGORITHMS)
    p.add_argument("--mc-runs", type=int, default=200)
    p.add_argument("--T", type=int, default=2048)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--gamma", type=int, default=2)
    p.add_argument("--drift", type=float, default=1.0, help="V for the drifting construction")
    p.add_argument("--variance", type=float, default=64.0, help="Lambda for drifting / fullinfo-variance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="sequence JSON path")
    p.add_argument("--diagnostics", help="diagnostics JSON path (default: <out>.diagnostics.json)")
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("validate", help="run acceptance suites")
    p.add_argument("--suite", action="append", choices=[*SUITES, "all"],
                   help="suite name (repeatable; default: all)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render trace CSVs as SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out")
    p.add_argument("--title", default="cumulative regret")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
