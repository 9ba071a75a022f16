"""Source spans and the diagnostic record shared by every phase."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class SourceSpan:
    """A half-open byte range in one source file.

    ``line`` and ``column`` are 1-based and describe ``start``.
    """

    file: str
    start: int
    end: int
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"span start {self.start} after end {self.end}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NO_SPAN = SourceSpan("<none>", 0, 0, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    """An error reported by the parser, the desugarer or one of the checks.

    ``kind`` is a stable machine-readable name (``MethodNotAvailable``,
    ``SyntaxError``, ...). ``rule`` names the typing rule or well-formedness
    clause that failed, when there is one.
    """

    kind: str
    message: str
    span: SourceSpan = NO_SPAN
    rule: str | None = None
    obj: str | None = None
    usage: str | None = None
    severity: str = "error"
    expected: tuple[str, ...] = field(default=())
    notes: tuple[str, ...] = field(default=())

    @property
    def location(self) -> str:
        return str(self.span) if self.span.line else self.span.file

    def render(self, color: bool = False) -> str:
        sev = self.severity
        if color:
            sev = f"\x1b[31m{sev}\x1b[0m" if sev == "error" else f"\x1b[33m{sev}\x1b[0m"
        lines = [f"{self.location}: {sev}: {self.message}"]
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "severity": self.severity,
            "kind": self.kind,
            "rule": self.rule,
            "span": {"file": self.span.file, "line": self.span.line, "col": self.span.column},
            "message": self.message,
        }
        if self.obj is not None:
            out["object"] = self.obj
        if self.usage is not None:
            out["usage"] = self.usage
        if self.notes:
            out["notes"] = list(self.notes)
        return out


class DiagnosticError(Exception):
    """Raised by a phase that cannot continue; carries its diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic] | Diagnostic):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))
