"""Command-line front end: ``check``, ``run`` and ``corpus``.

Exit status is 0 on success, 1 when a program is rejected or its run fails,
and 2 when the input cannot be read or parsed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from .ast import Program
from .checker import check_program, explain
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan
from .env import render_env_lines
from .frontend import load_program
from .interpreter import DEFAULT_FUEL, FuelExhausted, RuntimeFault, run, render_heap, unfinished
from .parser import ParseError

EXIT_OK, EXIT_REJECTED, EXIT_INPUT = 0, 1, 2


def _color_enabled(stream: TextIO) -> bool:
    flag = os.environ.get("PAPAYA_COLOR")
    if flag is not None:
        return flag == "1"
    return hasattr(stream, "isatty") and stream.isatty()


def _report(diags: list[Diagnostic], as_json: bool, out: TextIO, err: TextIO, ok: bool = False) -> None:
    if as_json:
        json.dump({"ok": ok, "diagnostics": [d.to_json() for d in diags]}, out, ensure_ascii=False)
        out.write("\n")
        return
    color = _color_enabled(err)
    for d in diags:
        err.write(d.render(color) + "\n")


def _load(path: str, as_json: bool, out: TextIO, err: TextIO) -> tuple[Program | None, int]:
    """Load a program, reporting errors; returns (program, exit status)."""
    try:
        return load_program(path), EXIT_OK
    except OSError as exc:
        d = Diagnostic("IOError", f"cannot read file: {exc.strerror or exc}", SourceSpan(path, 0, 0, 0, 0))
        _report([d], as_json, out, err)
        return None, EXIT_INPUT
    except ParseError as exc:
        _report(exc.diagnostics, as_json, out, err)
        return None, EXIT_INPUT
    except DiagnosticError as exc:
        _report(exc.diagnostics, as_json, out, err)
        return None, EXIT_REJECTED


def cmd_check(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    program, status = _load(args.path, args.json, out, err)
    if program is None:
        return status
    report = check_program(program, hash_envs=args.trace_rules)
    if args.trace_rules:
        for app in report.trace:
            out.write(f"{app}\n")
    if args.print_env and report.env is not None:
        out.write(render_env_lines(report.env) + "\n")
    if args.json:
        _report(report.diagnostics, True, out, err, ok=report.ok)
    elif report.diagnostics:
        for d in report.diagnostics:
            text = explain(d) if args.explain else d.render(_color_enabled(err))
            err.write(text + "\n")
    return EXIT_OK if report.ok else EXIT_REJECTED


def cmd_run(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    program, status = _load(args.path, False, out, err)
    if program is None:
        return status
    if not args.monitor_only:
        report = check_program(program)
        if not report.ok:
            for d in report.diagnostics:
                err.write(d.render(_color_enabled(err)) + "\n")
            return EXIT_REJECTED
    try:
        result = run(program, fuel=args.fuel)
    except RuntimeFault as exc:
        if args.trace:
            for rec in exc.trace:
                out.write(json.dumps(rec.to_json()) + "\n")
        if isinstance(exc, FuelExhausted):
            err.write(f"FuelExhausted: {exc}\n")
        else:
            err.write(f"{exc.kind}: {exc}\n")
        return EXIT_REJECTED
    if args.trace:
        for rec in result.trace:
            out.write(json.dumps(rec.to_json()) + "\n")
    if args.dump_heap:
        out.write(render_heap(result.final.heap) + "\n")
    if not result.completed:
        left = ", ".join(f"o{o}" for o in unfinished(result.monitor))
        err.write(f"UnfinishedProtocol: objects {left} did not finish their protocol\n")
        return EXIT_REJECTED
    return EXIT_OK


@dataclass
class CorpusOutcome:
    name: str
    expectation: str
    observed: str
    passed: bool


def run_corpus_entry(pap: Path) -> CorpusOutcome:
    """Evaluate one corpus program against its ``.expect`` file."""
    expect_file = pap.with_suffix(".expect")
    if not expect_file.exists():
        return CorpusOutcome(pap.name, "(missing .expect)", "-", False)
    expectation = expect_file.read_text(encoding="utf-8").strip()
    try:
        program = load_program(pap)
    except OSError as exc:
        return CorpusOutcome(pap.name, expectation, f"io error: {exc}", False)
    except DiagnosticError as exc:
        observed = f"reject: {exc.diagnostics[0].kind}"
        return CorpusOutcome(pap.name, expectation, observed, observed == expectation)
    report = check_program(program)
    if not report.ok:
        observed = f"reject: {report.diagnostics[0].kind}"
        return CorpusOutcome(pap.name, expectation, observed, observed == expectation)
    if expectation == "accept":
        return CorpusOutcome(pap.name, expectation, "accept", True)
    if expectation.startswith("run:"):
        trace_file = pap.parent / expectation[len("run:"):].strip()
        try:
            wanted = trace_file.read_text(encoding="utf-8").split()
        except OSError:
            return CorpusOutcome(pap.name, expectation, f"missing trace file {trace_file.name}", False)
        try:
            result = run(program)
        except RuntimeFault as exc:
            return CorpusOutcome(pap.name, expectation, f"run failed: {exc.kind}", False)
        labels = [str(l) for l in result.labels]
        if not result.completed:
            return CorpusOutcome(pap.name, expectation, "run: protocols unfinished", False)
        if labels != wanted:
            return CorpusOutcome(pap.name, expectation, "run: " + " ".join(labels), False)
        return CorpusOutcome(pap.name, expectation, expectation, True)
    return CorpusOutcome(pap.name, expectation, "accept", False)


def cmd_corpus(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        err.write(f"{directory}: not a directory\n")
        return EXIT_INPUT
    outcomes = [run_corpus_entry(p) for p in sorted(directory.glob("*.pap"))]
    width = max([len(o.name) for o in outcomes] + [7])
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        line = f"{status}  {o.name:<{width}}  expected {o.expectation}"
        if not o.passed:
            line += f", got {o.observed}"
        out.write(line + "\n")
    passed = sum(o.passed for o in outcomes)
    out.write(f"{passed} passed, {len(outcomes) - passed} failed\n")
    return EXIT_OK if passed == len(outcomes) else EXIT_REJECTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="typestate", description="Typestate checker and interpreter for .pap programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="type-check a program")
    check.add_argument("path")
    check.add_argument("--trace-rules", action="store_true", help="print one line per applied typing rule")
    check.add_argument("--json", action="store_true", help="print diagnostics as JSON")
    check.add_argument("--print-env", action="store_true", help="print the final typing environment")
    check.add_argument("--explain", action="store_true", help="add rule, object and usage to each diagnostic")
    check.set_defaults(func=cmd_check)

    run_p = sub.add_parser("run", help="type-check, then execute a program under the protocol monitor")
    run_p.add_argument("path")
    run_p.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="maximum number of steps")
    run_p.add_argument("--trace", action="store_true", help="print one JSON record per step")
    run_p.add_argument("--monitor-only", action="store_true", help="skip the type check (unsound on purpose)")
    run_p.add_argument("--dump-heap", action="store_true", help="print the final heap")
    run_p.set_defaults(func=cmd_run)

    corpus = sub.add_parser("corpus", help="check every .pap file in a directory against its .expect file")
    corpus.add_argument("dir")
    corpus.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "fuel", 1) <= 0:
        err.write("--fuel must be positive\n")
        return EXIT_INPUT
    return args.func(args, out, err)


if __name__ == "__main__":
    sys.exit(main())
