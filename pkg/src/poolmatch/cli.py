"""Command-line entry point.

    poolmatch simulate {asymptotic,symmetric,addition} [--set FIELD=VALUE ...]
    poolmatch audit {properties,transport}
    poolmatch da-score 80,81,82,83,84

Global flags (accepted before or after the subcommand): ``--config`` (JSON
document of RunConfig fields), ``--seed-list``, ``--out``, ``--format``.
Flags override the config document, which overrides the regime defaults.
Failures print ``{"error": {...}}`` to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys

from .evaluation import da_score, parse_da_tuple
from .harness import ConfigError, emit, load_config, resolve_config, run_regime


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="JSON config document")
    p.add_argument("--seed-list", default=default, help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--out", default=default, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=default)
    return p


def _run_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--workers", type=int, default=None, help="processes for seed fan-out")
    p.add_argument("--timing", action="store_true", help="record runtime_ms (non-reproducible)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="FIELD=VALUE",
                   help="override a config field; VALUE is parsed as JSON when possible")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolmatch", parents=[_global_flags(False)],
                                     description="Domain pooling simulations and audits.")
    sub = parser.add_subparsers(dest="command", required=True)
    g, r = _global_flags(True), _run_flags()

    sim = sub.add_parser("simulate", parents=[g, r], help="run a simulation regime")
    sim.add_argument("regime", choices=("asymptotic", "symmetric", "addition"))

    audit = sub.add_parser("audit", parents=[g, r], help="run a property audit")
    audit.add_argument("regime", choices=("properties", "transport"))

    da = sub.add_parser("da-score", parents=[g], help="score a 5-step performance sequence")
    da.add_argument("values", help="five comma-separated values, e.g. 80,81,82,83,84")
    return parser


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> dict:
    doc = load_config(args.config) if args.config else {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(item, "expected FIELD=VALUE")
        key, value = item.split("=", 1)
        doc[key.strip()] = _parse_value(value)
    if args.seed_list:
        try:
            doc["seeds"] = [int(s) for s in args.seed_list.split(",") if s.strip()]
        except ValueError:
            raise ConfigError("seeds", f"could not parse --seed-list {args.seed_list!r}") from None
    if args.workers is not None:
        doc["workers"] = args.workers
    if args.timing:
        doc["timing"] = True
    if args.out:
        doc["output_path"] = args.out
    if args.format:
        doc["format"] = args.format
    return doc


def _fail(kind: str, message: str, field=None, code: int = 1) -> int:
    err = {"type": kind, "message": message}
    if field is not None:
        err["field"] = field
    print(json.dumps({"error": err}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "da-score":
            inp = parse_da_tuple(args.values)
            score = da_score(inp)
            if args.format == "json":
                text = json.dumps({"da_score": score, "y": list(inp.y), "s": list(inp.s)},
                                  sort_keys=True) + "\n"
            else:
                text = f"{score!r}\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0

        cfg = resolve_config(args.regime, _overrides(args))
        table = run_regime(cfg)
        text = emit(table, cfg.format, cfg.output_path)
        if cfg.output_path is None:
            sys.stdout.write(text)
        if args.command == "audit" and not table.summary["all_passed"]:
            return _fail("audit", "failed checks: " + ", ".join(table.summary["failed"]), code=3)
        return 0
    except ConfigError as exc:
        return _fail("config", exc.message, exc.field, code=2)
    except OSError as exc:
        return _fail("io", f"{exc.strerror}: {exc.filename}", "output_path")
    except ValueError as exc:
        return _fail("value", str(exc))


if __name__ == "__main__":
    sys.exit(main())
