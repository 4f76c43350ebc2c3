"""Command-line entry point: ``ldplab <experiment> [flags]``.

Flags fill in configuration keys; a ``--config`` file takes precedence over
them key by key.  Exit codes: 0 success, 2 an audit failed, 3 solver failure,
4 configuration error.
"""
from __future__ import annotations

import argparse
import sys

from .config import KINDS, ConfigError, parse_config
from .experiment import EXIT_CONFIG_ERROR, run_experiment

# flag -> (section, key)
COMMON_FLAGS = {
    "model": ("model", "name"),
    "grid_n": ("space", "N"),
    "domain_kind": ("space", "domain_kind"),
    "alpha": ("space", "alpha"),
    "T": ("time", "T"),
    "steps": ("time", "steps"),
    "seed": ("experiment", "seed"),
    "workers": ("experiment", "workers"),
    "output": ("experiment", "output"),
}

STATE_FLAGS = {
    "x0": ("experiment", "x0"),
    "x0_mode": ("experiment", "x0_mode"),
    "x0_amplitude": ("experiment", "x0_amplitude"),
    "x0_file": ("experiment", "x0_file"),
    "control": ("experiment", "control"),
    "method": ("experiment", "method"),
}

KIND_FLAGS = {
    "check-hypotheses": {"regime": ("experiment", "regime"),
                         "samples": ("experiment", "samples"),
                         "radius": ("experiment", "radius")},
    "solve-skeleton": dict(STATE_FLAGS),
    "simulate": {**STATE_FLAGS, "epsilon": ("experiment", "epsilon"),
                 "samples": ("experiment", "samples"), "stop_M": ("experiment", "stop_M")},
    "galerkin-convergence": {**STATE_FLAGS, "levels": ("experiment", "levels")},
    "rate": {**{k: STATE_FLAGS[k] for k in ("x0", "x0_mode", "x0_amplitude", "x0_file")},
             "target_file": ("experiment", "target_file"), "tol": ("experiment", "tol"),
             "K": ("experiment", "K"), "pins": ("experiment", "pins")},
    "mc-ldp": {**STATE_FLAGS, "epsilons": ("experiment", "epsilons"),
               "delta": ("experiment", "delta"), "samples": ("experiment", "samples"),
               "event": ("experiment", "event")},
}

FORCE_KINDS = ("simulate", "mc-ldp")


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ldplab", description="Variational SPDE experiments: hypothesis audits, "
                                   "skeleton and stochastic paths, rate functions, Monte Carlo.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="configuration file; its keys override flags")
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="model parameter (repeatable)")
        for name in {**COMMON_FLAGS, **KIND_FLAGS[kind]}:
            p.add_argument(_flag(name), dest=name, default=None)
        if kind in FORCE_KINDS:
            p.add_argument("--force", action="store_true",
                           help="allow epsilon above a gradient-noise model's guard")
    return parser


def overrides_from_args(args):
    out = {}
    for name, (section, key) in {**COMMON_FLAGS, **KIND_FLAGS[args.command]}.items():
        value = getattr(args, name)
        if value is not None:
            out.setdefault(section, {})[key] = value
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"flag --param: expected KEY=VALUE, got {item!r}"])
        out.setdefault("model", {})[key.strip()] = value
    if getattr(args, "force", False):
        out.setdefault("experiment", {})["force"] = "true"
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text, source = "", "line"
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
            source = f"{args.config} line"
        config = parse_config(text, overrides_from_args(args), kind=args.command, source=source)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    manifest = run_experiment(config)
    print(f"{config.kind}: {manifest['status']} (exit {manifest['exit_code']})")
    for entry in manifest["files"]:
        print(f"  {config.output}/{entry['name']}  sha256={entry['sha256'][:16]}")
    if manifest.get("error"):
        print(f"error: {manifest['error']}", file=sys.stderr)
    return manifest["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
