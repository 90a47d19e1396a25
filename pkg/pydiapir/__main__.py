# pyDiapir Module - Command Line
# -*- coding: utf-8 -*-
"""
 Command line entry point

    python -m pydiapir run --config FILE [--set section.key=value ...] [--out DIR]
    python -m pydiapir preset diapir_6_1|incline_6_2 [--set ...] [--out DIR]
    python -m pydiapir validate-kernels [--samples N] [--seed S]
    python -m pydiapir info [--config FILE | --preset NAME] [--set ...]

 Exit codes: 0 success, 1 configuration error, 2 runtime failure. The last
 line printed is always "result=ok ...", "result=config_error reason=..."
 or "result=runtime_error reason=...".

 Environment: SLA_THREADS (assembly workers, 0 = auto), SLA_DEBUG (yes/no)
"""
import argparse
import json
import sys

# Modules
import pydiapir
from pydiapir import material, presets, scenario_io, sla
from pydiapir.aux import env_flag
from pydiapir.exceptions import (ElementInverted, InvalidGeometry, IoError, ParseError, PyDiapirException,
                                 SingularTensor, ValidationError)
from pydiapir.solver import NoConvergence, SolverBreakdown

# max relative error accepted from the kernel oracle suite
ORACLE_TOLERANCE = 1e-5

CONFIG_ERRORS = (ParseError, ValidationError, InvalidGeometry)
RUNTIME_ERRORS = (ElementInverted, SingularTensor, SolverBreakdown, NoConvergence, IoError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="pydiapir", description=f"pyDiapir SLA salt diapir simulator v{pydiapir.version}")
    p.add_argument("--debug", action="store_true", default=False, help="Enable debug logging.")
    subparsers = p.add_subparsers(dest="command", title='commands (run <command> -h to see usage information)',
                                  required=True, parser_class=_Parser)

    run_args = subparsers.add_parser("run", help='Run a scenario file')
    run_args.add_argument("--config", type=str, required=True, help="Scenario TOML file.")

    preset_args = subparsers.add_parser("preset", help='Run a built-in scenario')
    preset_args.add_argument("name", type=str, choices=sorted(presets.PRESETS), help="Preset name.")

    for sub in (run_args, preset_args):
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                         help="Override a scenario value (repeatable).")
        sub.add_argument("--out", type=str, default=None, help="Output directory [Default=output.directory].")

    kernel_args = subparsers.add_parser("validate-kernels", help='Check L and M against finite differences')
    kernel_args.add_argument("--samples", type=int, default=100, help="Random states [Default=100].")
    kernel_args.add_argument("--seed", type=int, default=0, help="Random seed [Default=0].")

    info_args = subparsers.add_parser("info", help='Print a scenario summary without running')
    source = info_args.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, default=None, help="Scenario TOML file.")
    source.add_argument("--preset", type=str, default=None, help="Preset name.")
    info_args.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                           help="Override a scenario value (repeatable).")
    return p


def _reason(exc):
    fields = [f"reason={type(exc).__name__}"]
    for name in ("step", "element", "line", "key"):
        value = getattr(exc, name, None)
        if value is not None:
            fields.append(f"{name}={value}")
    fields.append(f"detail={json.dumps(str(exc))}")
    return " ".join(fields)


def _scenario(args):
    if args.command == "run":
        return scenario_io.load_config(args.config, args.overrides)
    if args.command == "preset":
        return scenario_io.load_preset(args.name, args.overrides)
    if args.config:
        return scenario_io.load_config(args.config, args.overrides)
    return scenario_io.load_preset(args.preset or presets.DEFAULT_PRESET, args.overrides)


def _run(args, out):
    config = _scenario(args)
    out_dir = args.out or config.output.directory
    print(f"pyDiapir [{pydiapir.version}] - {config.n_steps} steps -> {out_dir}", file=out)
    series = sla.run(config, out_dir=out_dir)
    apex = series[-1].apex_height if series else config.geometry.salt_height
    return f"result=ok steps={len(series)} apex_m={apex!r} out={out_dir}"


def _validate_kernels(args, out):
    report = material.oracle_suite(samples=args.samples, seed=args.seed)
    print(f"elasticity max relative error: {report['elasticity']:.3e}", file=out)
    print(f"viscosity  max relative error: {report['viscosity']:.3e}", file=out)
    worst = max(report["elasticity"], report["viscosity"])
    if worst >= ORACLE_TOLERANCE:
        return None, f"result=runtime_error reason=OracleMismatch max_error={worst!r}"
    return f"result=ok samples={report['samples']} max_error={worst!r}", None


def _info(args, out):
    config = _scenario(args)
    for line in scenario_io.describe(config):
        print(line, file=out)
    return f"result=ok nx={config.geometry.nx} n_steps={config.n_steps}"


def main(argv=None, out=None):
    """
    Run the command line; returns the exit code

    Args:
        argv = argument list (default: sys.argv[1:])
        out  = text stream for output (default: sys.stdout)
    """
    out = out or sys.stdout
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except ParseError as exc:
        print(f"result=config_error {_reason(exc)}", file=out)
        return 1
    if args.debug or env_flag("SLA_DEBUG"):
        pydiapir.set_debug(True, color=False)

    try:
        if args.command == "validate-kernels":
            ok, failure = _validate_kernels(args, out)
            if failure:
                print(failure, file=out)
                return 2
            print(ok, file=out)
            return 0
        if args.command == "info":
            print(_info(args, out), file=out)
        else:
            print(_run(args, out), file=out)
        return 0
    except CONFIG_ERRORS as exc:
        print(f"ERROR: {exc}", file=out)
        print(f"result=config_error {_reason(exc)}", file=out)
        return 1
    except (RUNTIME_ERRORS + (PyDiapirException,)) as exc:
        print(f"ERROR: {exc}", file=out)
        print(f"result=runtime_error {_reason(exc)}", file=out)
        return 2


if __name__ == "__main__":
    sys.exit(main())
