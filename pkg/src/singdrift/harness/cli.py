"""Command line entry point ``lab``.

Exit codes: 0 success, 1 other hard error, 2 configuration error, 3 criterion failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigInvalid, LabError

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_CRITERION = 0, 1, 2, 3


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def _field_params(args) -> dict:
    params = dict(args.param or [])
    if getattr(args, "delta", None) is not None:
        params["delta"] = args.delta
    if getattr(args, "d", None) is not None:
        params["d"] = args.d
    return params


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Singular-drift numerical laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    def field_opts(sp):
        sp.add_argument("--field", default="hardy", help="catalog field id")
        sp.add_argument("--delta", type=float, help="form-bound parameter of the field")
        sp.add_argument("--d", type=int, help="dimension")
        sp.add_argument("--param", type=_kv, action="append", metavar="KEY=VALUE", help="extra field parameter")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output directory")

    fb = sub.add_parser("formbound", help="numerical form-bound estimate")
    field_opts(fb)
    fb.add_argument("--family", choices=("origin", "random", "shell"), default="origin")
    fb.add_argument("--budget", type=int, default=32)

    mo = sub.add_parser("mollify", help="build mollified approximations")
    field_opts(mo)
    mo.add_argument("--m", type=int, action="append", help="mollifier level (repeatable)")
    mo.add_argument("--gamma0", type=float, default=0.5)
    mo.add_argument("--estimate", action="store_true", help="also estimate the form-bound of each b_m")

    for name, text in (("solve", "run a PDE config"), ("simulate", "run an SDE config"), ("run", "run any config")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")

    ve = sub.add_parser("verify", help="run the acceptance criteria")
    ve.add_argument("--level", choices=("quick", "full"), default="quick")
    ve.add_argument("--only", action="append", help="criterion number or slug (repeatable)")
    ve.add_argument("--out", help="write criteria.csv here")

    tp = sub.add_parser("template", help="print a default config")
    tp.add_argument("kind")
    return p


def _run(cfg, out) -> int:
    from .run import run_experiment

    man = run_experiment(cfg, out)
    print(json.dumps({"files": man.files, "config_hash": man.config_hash, "criteria": man.criteria}, sort_keys=True))
    return EXIT_OK if all(man.criteria.values()) else EXIT_CRITERION


def main(argv: list[str] | None = None) -> int:
    from .config import ExperimentConfig, dump_config, load_config

    args = _parser().parse_args(argv)
    try:
        if args.command == "formbound":
            cfg = ExperimentConfig(
                kind="formbound", field={"id": args.field, "params": _field_params(args)},
                formbound={"family": args.family, "budget": args.budget}, seed=args.seed,
            )  # fmt: skip
            return _run(cfg, args.out)
        if args.command == "mollify":
            ms = args.m or [4, 8, 16]
            cfg = ExperimentConfig(
                kind="mollify", field={"id": args.field, "params": _field_params(args)},
                mollify={"levels": ms, "gamma0": args.gamma0, "estimate": args.estimate}, seed=args.seed,
            )  # fmt: skip
            return _run(cfg, args.out)
        if args.command in ("solve", "simulate", "run"):
            cfg = load_config(args.config)
            if args.command != "run" and cfg.kind != args.command:
                raise ConfigInvalid(f"config kind is {cfg.kind!r}, expected {args.command!r}", f"{args.config} field kind")
            return _run(cfg, args.out)
        if args.command == "verify":
            from .criteria import CriterionResult, verify_suite
            from .reports import write_csv

            res = verify_suite(args.level, args.only, echo=lambda s: print(s, flush=True))
            if args.out:
                write_csv(f"{args.out}/criteria.csv", CriterionResult.CSV_COLUMNS, [r.to_row() for r in res.results])
            bad = res.first_failure
            if bad is not None:
                print(f"first failing criterion: {bad.number:02d} {bad.slug}: {bad.to_row()}", file=sys.stderr)
                return EXIT_CRITERION
            print(f"all {len(res.results)} criteria passed ({args.level})")
            return EXIT_OK
        if args.command == "template":
            sys.stdout.write(dump_config(ExperimentConfig(kind=args.kind)))
            return EXIT_OK
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
