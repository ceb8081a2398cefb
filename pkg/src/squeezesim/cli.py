"""Command line entry point: ``squeezesim run | validate | preset --list``.

Exit status is 0 on success, 1 when the positive-P ensemble diverged past
the allowed fraction (outputs are still written, with the untrusted times
listed in the manifest), and 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .experiment import PRESETS, UsageError, execute, load_config, validate

OUTPUT_ENV = "SQUEEZESIM_OUTPUT"
EXIT_OK, EXIT_TRUNCATED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="squeezesim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--preset", help="start from a named parameter set")
        p.add_argument("--config", help="INI file (a manifest.ini works too)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                       help="override one configuration key; repeatable")

    p_run = sub.add_parser("run", help="run the full pipeline and write CSV outputs")
    common(p_run)
    p_run.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV} "
                                              "or the config value)")
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    common(p_val)
    p_pre = sub.add_parser("preset", help="inspect the built-in presets")
    p_pre.add_argument("--list", action="store_true", help="list preset names")
    p_pre.add_argument("name", nargs="?", help="print the resolved config of one preset")
    return parser


def _resolve(args):
    overrides = _overrides(args.set)
    cfg = load_config(args.config, args.preset, overrides)
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "preset":
            return _cmd_preset(args)
        cfg = _resolve(args)
        if args.command == "validate":
            return _cmd_validate(cfg)
        return _cmd_run(cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FloatingPointError, RuntimeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _cmd_preset(args) -> int:
    if args.name:
        load_config(preset_name=args.name).to_ini().write(sys.stdout)
        return EXIT_OK
    if not args.list:
        raise UsageError("give --list or a preset name")
    for name in PRESETS:
        print(name)
    return EXIT_OK


def _cmd_validate(cfg) -> int:
    findings = validate(cfg)
    for f in findings:
        print(f)
    if not findings:
        print("ok")
    return EXIT_USAGE if any(f.level == "error" for f in findings) else EXIT_OK


def _cmd_run(cfg, args) -> int:
    output = args.output or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    cfg = cfg.replace(output_dir=output)
    for f in validate(cfg):
        if f.level == "warning":
            print(f, file=sys.stderr)
    result = execute(cfg, output)
    print(f"wrote {result.output_dir}")
    for name, entry in result.summary["comparison"].items():
        if entry["max_gap_in_stderr"] is None:
            print(f"{name}: no trusted samples to compare")
            continue
        print(f"{name}: max |two-mode - positive-P| = {entry['max_gap_in_stderr']:.2f} "
              f"error bars (t={entry['t_at_max']:.3f})")
    if result.truncated:
        print(f"diverged fraction exceeded {cfg.max_diverged_fraction:g} from "
              f"t={result.summary['untrusted_from']:.3f}", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
