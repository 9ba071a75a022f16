"""Typestate checking for an object calculus with unrestricted aliasing.

Programs declare a usage (a protocol) per class. The checker follows every
object through the whole program, including through aliases held in fields
of other objects, and accepts only programs that respect and finish every
protocol. An interpreter with a run-time monitor executes the same programs.
"""

from .ast import Program
from .checker import CheckReport, check_expr, check_program, explain
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan
from .frontend import compile_source, load_program
from .interpreter import RunResult, run, step

__all__ = [
    "CheckReport",
    "Diagnostic",
    "DiagnosticError",
    "Program",
    "RunResult",
    "SourceSpan",
    "check_expr",
    "check_program",
    "compile_source",
    "explain",
    "load_program",
    "run",
    "step",
]
