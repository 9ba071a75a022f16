"""Source text to a checked-ready core program."""

from __future__ import annotations

from pathlib import Path

from .ast import Program
from .desugar import desugar
from .diagnostics import DiagnosticError
from .parser import parse
from .wellformed import check_program as well_formed_program


def compile_source(text: str, file: str = "<input>") -> Program:
    """Parse, desugar and well-formedness-check ``text``.

    Raises :class:`DiagnosticError` (or its subclass ``ParseError``) with
    every problem found by the failing phase.
    """
    program = desugar(parse(text, file))
    diags = well_formed_program(program)
    if diags:
        raise DiagnosticError(diags)
    return program


def load_program(path: str | Path) -> Program:
    path = Path(path)
    return compile_source(path.read_text(encoding="utf-8"), str(path))
