"""Command-line interface: ``corechisel {check,run,analyze,emit-chisel} FILE``.

Exit codes:
    0  success (``run``: the design reached a stable state)
    1  parse or validation errors
    2  ``run`` stopped at --max-cycles
    3  ``run`` hit a runtime error
    4  I/O failure
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import corpus
from .analysis import analyze
from .chisel_emitter import EmitterConfig, emit_chisel, output_filename
from .interpreter import (
    DEFAULT_MAX_CYCLES,
    MAX_CYCLES,
    RUNTIME_ERROR,
    render_trace_text,
    run,
    trace_json_records,
)
from .parser import ERROR, parse_program

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MAX_CYCLES = 2
EXIT_RUNTIME_ERROR = 3
EXIT_IO = 4


@dataclass
class CliConfig:
    subcommand: str
    input: str
    format: str = "text"
    max_cycles: int = DEFAULT_MAX_CYCLES
    trace: bool = False
    paper_literal_meminit: bool = False
    out: Optional[str] = None
    strict: bool = False
    instances: Optional[list[str]] = None
    width: int = 32
    top: str = "Top"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="Core Chisel source file, or the name of a bundled design")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")
    common.add_argument("--paper-literal-meminit", action="store_true",
                        help="initialise every memory cell to the bank size instead of 0")

    parser = argparse.ArgumentParser(
        prog="corechisel", description="Check, simulate, analyze or translate Core Chisel designs.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("check", parents=[common], help="parse and validate a design")

    p_run = sub.add_parser("run", parents=[common], help="simulate until stable")
    p_run.add_argument("--max-cycles", type=int, default=DEFAULT_MAX_CYCLES, metavar="N")
    p_run.add_argument("--trace", action="store_true", help="print every cycle, not just first and last")
    p_run.add_argument("--strict", action="store_true",
                       help="treat simultaneous writes to one register as a runtime error")

    p_an = sub.add_parser("analyze", parents=[common], help="reachable channel/state configurations")
    p_an.add_argument("--instance", action="append", dest="instances", metavar="NAME",
                      help="only report this instance (repeatable)")

    p_em = sub.add_parser("emit-chisel", parents=[common], help="translate to Chisel")
    p_em.add_argument("--width", type=int, default=32, help="register width in bits")
    p_em.add_argument("--top", default="Top", help="name of the generated top module")
    return parser


def _read_source(path: str) -> tuple[str, str]:
    if not os.path.exists(path) and path in corpus.names():
        return corpus.source(path), path + corpus.SUFFIX
    with open(path, encoding="utf-8") as fh:
        return fh.read(), path


def _write(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)


def _diagnostics_json(diags) -> str:
    return json.dumps([
        {"severity": d.severity, "code": d.code, "message": d.message,
         "line": d.location.line, "column": d.location.column}
        for d in diags
    ], indent=2) + "\n"


def execute(cfg: CliConfig) -> int:
    try:
        source, filename = _read_source(cfg.input)
    except OSError as err:
        print(f"corechisel: cannot read {cfg.input}: {err.strerror or err}", file=sys.stderr)
        return EXIT_IO

    result = parse_program(source)
    has_errors = any(d.severity == ERROR for d in result.diagnostics)

    if cfg.subcommand == "check":
        if cfg.format == "json":
            _write(_diagnostics_json(result.diagnostics), cfg.out)
        else:
            text = "".join(d.render(filename) + "\n" for d in result.diagnostics)
            if has_errors:
                sys.stderr.write(text)
            else:
                _write(text, cfg.out)
        return EXIT_INVALID if has_errors else EXIT_OK

    for d in result.diagnostics:
        print(d.render(filename), file=sys.stderr)
    if result.program is None:
        return EXIT_INVALID
    program = result.program

    if cfg.subcommand == "run":
        trace = run(program, cfg.max_cycles, cfg.trace,
                    paper_literal_meminit=cfg.paper_literal_meminit, strict=cfg.strict)
        if cfg.format == "json":
            text = "".join(json.dumps(r) + "\n" for r in trace_json_records(trace))
        else:
            text = render_trace_text(trace)
        _write(text, cfg.out)
        if trace.status == RUNTIME_ERROR:
            return EXIT_RUNTIME_ERROR
        if trace.status == MAX_CYCLES:
            return EXIT_MAX_CYCLES
        return EXIT_OK

    if cfg.subcommand == "analyze":
        _, report = analyze(program)
        if cfg.format == "json":
            text = json.dumps(report.to_json(cfg.instances), indent=2) + "\n"
        else:
            text = report.render_text(cfg.instances)
        _write(text, cfg.out)
        return EXIT_OK

    if cfg.subcommand == "emit-chisel":
        ecfg = EmitterConfig(width=cfg.width, top_name=cfg.top)
        text = emit_chisel(program, ecfg)
        if cfg.out == "-":
            sys.stdout.write(text)
            return EXIT_OK
        path = cfg.out or output_filename(ecfg)
        if os.path.isdir(path):
            path = os.path.join(path, output_filename(ecfg))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {path}", file=sys.stderr)
        return EXIT_OK

    raise ValueError(f"unknown subcommand {cfg.subcommand!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = CliConfig(**{k: v for k, v in vars(args).items() if k in CliConfig.__dataclass_fields__})
    if cfg.width < 1:
        print("corechisel: --width must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return execute(cfg)
    except OSError as err:
        print(f"corechisel: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
