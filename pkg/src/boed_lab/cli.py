"""``boed-lab`` command line: run, sweep, validate.

Exit codes: 0 success, 1 configuration error, 2 partial failure (some cells or
validation studies failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, build_config, parse_config_text
from .harness import config_from_manifest, run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

# CLI flag -> dotted config key
FLAG_KEYS = {
    "testbed": "testbed",
    "spec": "spec",
    "methods": "methods",
    "lam": "acquisition.lambda",
    "tau": "acquisition.tau",
    "kappa": "acquisition.kappa",
    "steps": "steps",
    "seeds": "seeds",
    "root_seed": "root_seed",
    "out": "out",
}


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (CLI flags override it)")
    p.add_argument("--manifest", help="replay the configuration stored in a manifest.json")
    p.add_argument("--testbed", choices=("poly", "source", "pk"))
    p.add_argument("--spec", choices=("well", "mis"))
    p.add_argument("--methods", help="comma-separated, e.g. random,bad,ri,ridea")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--seeds", help="a count N (seeds 0..N-1) or a comma-separated list")
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--oracle-diagnostics", action="store_true", default=None,
                   help="record B, C, A and Ahat (simulation only)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any dotted config key, e.g. eig.outer=200 or poly.cubic=0.1")


def _experiment_config(args) -> ExperimentConfig:
    if args.config and args.manifest:
        raise ConfigError("use either --config or --manifest, not both")
    pairs: dict = {}
    base = None
    if args.manifest:
        try:
            base = config_from_manifest(args.manifest)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from exc
    elif args.config:
        try:
            pairs.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            pairs[key] = value
    if args.oracle_diagnostics:
        pairs["oracle_diagnostics"] = "true"
    return build_config(pairs, base)


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    if not cfg.out:
        raise ConfigError("--out is required")
    _, manifest = run_experiment(cfg, cfg.out)
    print(f"wrote {Path(cfg.out) / 'metrics.csv'} ({manifest['status']})")
    return EXIT_OK if manifest["status"] == "complete" else EXIT_PARTIAL


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    if not cfg.out:
        raise ConfigError("--out is required")
    if args.param not in ("lambda", "tau"):
        raise ConfigError("--param must be lambda or tau")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values {args.values!r}") from exc
    if not values:
        raise ConfigError("--values is empty")
    if min(values) < 0:
        raise ConfigError("swept values must be non-negative")
    results = sweep(cfg, args.param, values, cfg.out)
    index = {repr(v): {"dir": f"{args.param}={v!r}", "status": m["status"]}
             for v, (_, m) in results.items()}
    Path(cfg.out, "sweep.json").write_text(json.dumps(
        {"param": args.param, "values": values, "runs": index}, indent=2))
    ok = all(m["status"] == "complete" for _, m in results.values())
    print(f"sweep over {args.param}={values} written to {cfg.out}")
    return EXIT_OK if ok else EXIT_PARTIAL


def cmd_validate(args) -> int:
    from .validation import run_all

    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(
            [{"name": r.name, "passed": r.passed, "summary": r.summary, "details": r.details}
             for r in results], indent=2, default=float))
    return EXIT_OK if all(r.passed for r in results) else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boed-lab",
                                     description="Robust sequential Bayesian experimental design")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="re-run an experiment over lambda or tau values")
    _add_experiment_args(p)
    p.add_argument("--param", required=True, help="lambda or tau")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the diagnostics property studies")
    p.add_argument("--quick", action="store_true", help="fewer bound trials")
    p.add_argument("--out", help="write results as JSON")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
