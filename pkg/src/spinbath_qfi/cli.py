"""Command-line entry point: ``spinbath-qfi <command> --config run.toml``.

Commands: dynamics, qfi, optimize, sweep, verify.  Exit status is 0 on
success, 1 for configuration errors and 2 for computational failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import FORMATS, PIPELINE_CHOICES, ConfigError, RunConfig, load_config
from .dynamics import bloch_vectors, transverse_quantities
from .model import ClassArrays, enumerate_classes
from .optimize import PIPELINES, optimize_over_time, sweep
from .qfi import ParamSelector, qfi_curve
from .verify import run_battery

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2
DEFAULT_FORMAT = {"dynamics": "csv", "qfi": "csv", "optimize": "json", "sweep": "csv", "verify": "json"}
PARAM_COLUMN = {"temperature": "T", "coupling": "g"}

_NUM = {"type": ["number", "null"]}
_NUM_LIST = {"type": "array", "items": _NUM}
_OPTIMUM = {
    "type": "object",
    "properties": {"t_star": _NUM, "fq_star": _NUM, "monotone": {"type": "boolean"}},
    "required": ["t_star", "fq_star", "monotone"],
}
JSON_SCHEMAS = {
    "dynamics": {
        "type": "object",
        "required": ["command", "t", "pipelines"],
        "properties": {
            "command": {"const": "dynamics"},
            "t": _NUM_LIST,
            "pipelines": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "required": ["px", "py", "pz", "gamma", "omega"],
                    "additionalProperties": _NUM_LIST,
                },
            },
        },
    },
    "qfi": {
        "type": "object",
        "required": ["command", "parameter", "value", "t", "fq"],
        "properties": {
            "command": {"const": "qfi"},
            "parameter": {"enum": ["temperature", "coupling"]},
            "value": {"type": "number"},
            "t": _NUM_LIST,
            "fq": {"type": "object", "additionalProperties": _NUM_LIST},
        },
    },
    "optimize": {
        "type": "object",
        "required": ["command", "parameter", "value", "results"],
        "properties": {
            "command": {"const": "optimize"},
            "parameter": {"enum": ["temperature", "coupling"]},
            "value": {"type": "number"},
            "results": {"type": "object", "additionalProperties": _OPTIMUM},
        },
    },
    "sweep": {
        "type": "object",
        "required": ["command", "parameter", "rows", "crossovers"],
        "properties": {
            "command": {"const": "sweep"},
            "parameter": {"enum": ["temperature", "coupling"]},
            "rows": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["value", "results", "error"],
                    "properties": {
                        "value": {"type": "number"},
                        "results": {"type": "object", "additionalProperties": _OPTIMUM},
                        "error": {"type": ["string", "null"]},
                    },
                },
            },
            "crossovers": {"type": "array", "items": {"type": "number"}},
        },
    },
    "verify": {
        "type": "object",
        "required": ["command", "passed", "checks"],
        "properties": {
            "command": {"const": "verify"},
            "passed": {"type": "boolean"},
            "checks": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "passed", "worst", "tolerance"],
                    "properties": {
                        "name": {"type": "string"},
                        "passed": {"type": "boolean"},
                        "worst": {"type": "number"},
                        "tolerance": {"type": "number"},
                    },
                },
            },
        },
    },
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_json(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def cmd_dynamics(cfg: RunConfig, fmt_name: str) -> str:
    times = cfg.window.grid()
    classes = ClassArrays.from_classes(enumerate_classes(cfg.spec))
    data = {}
    for name in cfg.pipelines:
        p = bloch_vectors(cfg.spec, classes, times, PIPELINES[name])
        gamma, phase = transverse_quantities(p)
        data[name] = {"px": p[:, 0], "py": p[:, 1], "pz": p[:, 2], "gamma": gamma, "omega": phase}
    if fmt_name == "json":
        return write_json({"command": "dynamics", "t": times, "pipelines": data})
    header = ["t"] + [f"{k}_{name}" for name in cfg.pipelines for k in ("px", "py", "pz", "gamma", "omega")]
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for name in cfg.pipelines:
            row += [data[name][k][i] for k in ("px", "py", "pz", "gamma", "omega")]
        rows.append(row)
    return write_csv(header, rows)


def cmd_qfi(cfg: RunConfig, fmt_name: str) -> str:
    times = cfg.window.grid()
    sel = ParamSelector.of(cfg.spec, cfg.parameter)
    classes = ClassArrays.from_classes(enumerate_classes(cfg.spec))
    curves = {
        name: qfi_curve(cfg.spec, sel, times, PIPELINES[name], classes, derivative=cfg.derivative)
        for name in cfg.pipelines
    }
    if fmt_name == "json":
        return write_json(
            {"command": "qfi", "parameter": cfg.parameter, "value": sel.value, "t": times, "fq": curves}
        )
    header = ["t"] + [f"fq_{name}" for name in cfg.pipelines]
    rows = [[t] + [curves[name][i] for name in cfg.pipelines] for i, t in enumerate(times)]
    return write_csv(header, rows)


def _optimum_doc(opt):
    return {"t_star": opt.t_star, "fq_star": opt.fq_star, "monotone": opt.monotone}


def cmd_optimize(cfg: RunConfig, fmt_name: str) -> str:
    sel = ParamSelector.of(cfg.spec, cfg.parameter)
    classes = ClassArrays.from_classes(enumerate_classes(cfg.spec))
    results = {
        name: optimize_over_time(cfg.spec, sel, cfg.window, PIPELINES[name], classes, cfg.derivative)
        for name in cfg.pipelines
    }
    if fmt_name == "json":
        return write_json(
            {
                "command": "optimize",
                "parameter": cfg.parameter,
                "value": sel.value,
                "results": {k: _optimum_doc(v) for k, v in results.items()},
            }
        )
    rows = [[name, r.t_star, r.fq_star, r.monotone] for name, r in results.items()]
    return write_csv(["pipeline", "t_star", "fq_star", "monotone"], rows)


def cmd_sweep(cfg: RunConfig, fmt_name: str) -> str:
    if cfg.sweep_values is None:
        raise ConfigError("sweep: a [sweep] table with values or start/stop/num is required")
    result = sweep(
        cfg.spec, cfg.parameter, cfg.sweep_values, cfg.window, cfg.pipelines, cfg.threads, cfg.derivative
    )
    for row in result.rows:
        if row.error:
            print(f"warning: {PARAM_COLUMN[cfg.parameter]}={fmt(row.value)}: {row.error}", file=sys.stderr)
    if all(row.error for row in result.rows):
        raise ArithmeticError("every sweep point failed")
    for x in result.crossovers:
        print(f"crossover at {PARAM_COLUMN[cfg.parameter]}={fmt(x)}", file=sys.stderr)
    if fmt_name == "json":
        return write_json(
            {
                "command": "sweep",
                "parameter": cfg.parameter,
                "rows": [
                    {
                        "value": r.value,
                        "results": {k: _optimum_doc(v) for k, v in r.optima.items()},
                        "error": r.error,
                    }
                    for r in result.rows
                ],
                "crossovers": result.crossovers,
            }
        )
    header = [PARAM_COLUMN[cfg.parameter]]
    for name in result.pipelines:
        header += [f"t_star_{name}", f"fq_{name}"]
    rows = []
    for r in result.rows:
        row = [r.value]
        for name in result.pipelines:
            opt = r.optima.get(name)
            row += [opt.t_star, opt.fq_star] if opt else [math.nan, math.nan]
        rows.append(row)
    return write_csv(header, rows)


def cmd_verify(cfg: RunConfig, fmt_name: str):
    checks = run_battery()
    passed = all(c.passed for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name}  worst={c.worst:.3g} tol={c.tolerance:.0e}", file=sys.stderr)
    if fmt_name == "json":
        text = write_json(
            {
                "command": "verify",
                "passed": passed,
                "checks": [
                    {"name": c.name, "passed": c.passed, "worst": c.worst, "tolerance": c.tolerance}
                    for c in checks
                ],
            }
        )
    else:
        text = write_csv(
            ["check", "passed", "worst", "tolerance"],
            [[c.name, c.passed, c.worst, c.tolerance] for c in checks],
        )
    return text, passed


COMMANDS = {
    "dynamics": cmd_dynamics,
    "qfi": cmd_qfi,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS, help="csv for curves, json for summaries")
    common.add_argument("--pipeline", choices=tuple(PIPELINE_CHOICES), help="initial-state preparation")
    common.add_argument("--threads", type=int, help="worker threads for sweeps")

    parser = argparse.ArgumentParser(
        prog="spinbath-qfi",
        description="Exact spin-bath probe dynamics and quantum Fisher information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dynamics", parents=[common], help="p_x, p_y, p_z, Gamma, Omega versus t")
    sub.add_parser("qfi", parents=[common], help="F_q versus t at the configured parameter point")
    sub.add_parser("optimize", parents=[common], help="time-optimal F_q")
    sub.add_parser("sweep", parents=[common], help="time-optimal F_q across parameter values")
    sub.add_parser("verify", parents=[common], help="run the brute-force oracle battery")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.pipeline:
            cfg.pipeline = args.pipeline
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError(f"threads: must be >= 1, got {args.threads}")
            cfg.threads = args.threads
        fmt_name = args.format or cfg.output_format or DEFAULT_FORMAT[args.command]
        output = args.output or cfg.output_path
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        if args.command == "verify":
            text, passed = cmd_verify(cfg, fmt_name)
            status = EXIT_OK if passed else EXIT_COMPUTE
        else:
            text = COMMANDS[args.command](cfg, fmt_name)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE

    if output:
        Path(output).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
