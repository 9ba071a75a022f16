"""Surface syntax tree and its pretty-printer.

The surface tree reuses the core expression nodes and adds the sugar the
concrete syntax allows: bare identifiers (a field of ``this`` or the method
parameter), implicit-``this`` assignment targets, optional parameter and
return types, and the ``main { ... }`` block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .ast import (
    BoolLit,
    Call,
    Continue,
    EnumLit,
    Expr,
    FieldAssign,
    FieldAssignNew,
    FieldRead,
    FloatAdd,
    FloatLit,
    FloatMul,
    If,
    Labelled,
    Match,
    Null,
    Seq,
    This,
    Unit,
    Usage,
)
from .diagnostics import NO_SPAN, SourceSpan


@dataclass(frozen=True)
class Name(Expr):
    """A bare identifier: the parameter if it is named so, else a field of ``this``."""

    ident: str


@dataclass(frozen=True)
class ImplicitThis(Expr):
    """Target of ``f = e`` written without ``this.``."""


@dataclass(frozen=True)
class SurfaceField:
    name: str
    type: str
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class SurfaceMethod:
    name: str
    param: tuple[str, str] | None
    ret: str | None
    body: Expr
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class SurfaceClass:
    name: str
    usage: Usage
    members: tuple[Union[SurfaceField, SurfaceMethod], ...]
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)
    usage_span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class SurfaceEnum:
    name: str
    labels: tuple[str, ...]
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class SurfaceMain:
    fields: tuple[SurfaceField, ...]
    body: Expr
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class SurfaceProgram:
    decls: tuple[Union[SurfaceClass, SurfaceEnum], ...]
    main: SurfaceMain
    file: str = "<input>"


# ---------------------------------------------------------------------------
# Pretty-printing
# ---------------------------------------------------------------------------

_INDENT = "    "

# binding strength: seq < assignment < + < * < atoms
_SEQ, _STMT, _SUM, _PROD, _ATOM = range(5)


def _prec(e: Expr) -> int:
    if isinstance(e, Seq):
        return _SEQ
    if isinstance(e, (FieldAssign, FieldAssignNew)):
        return _STMT
    if isinstance(e, FloatAdd):
        return _SUM
    if isinstance(e, FloatMul):
        return _PROD
    return _ATOM


def _float(v: float) -> str:
    return repr(float(v))


def _target(t: Expr) -> str:
    return "" if isinstance(t, ImplicitThis) else "this."


def _receiver(r: Expr) -> str:
    if isinstance(r, This):
        return "this"
    if isinstance(r, FieldRead):
        return f"this.{r.field}"
    if isinstance(r, Name):
        return r.ident
    raise TypeError(f"bad receiver {r!r}")


def print_expr(e: Expr, depth: int = 0, min_prec: int = _SEQ) -> str:
    if _prec(e) < min_prec:
        return "(" + print_expr(e, depth, _SEQ) + ")"
    pad = _INDENT * depth
    if isinstance(e, Seq):
        return print_expr(e.first, depth, _STMT) + ";\n" + pad + print_expr(e.second, depth, _SEQ)
    if isinstance(e, FieldAssign):
        return f"{_target(e.target)}{e.field} = {print_expr(e.value, depth, _STMT)}"
    if isinstance(e, FieldAssignNew):
        return f"{_target(e.target)}{e.field} = new {e.cls}"
    if isinstance(e, FloatAdd):
        return f"{print_expr(e.left, depth, _SUM)} + {print_expr(e.right, depth, _PROD)}"
    if isinstance(e, FloatMul):
        return f"{print_expr(e.left, depth, _PROD)} * {print_expr(e.right, depth, _ATOM)}"
    if isinstance(e, Unit):
        return "unit"
    if isinstance(e, Null):
        return "null"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, FloatLit):
        return _float(e.value)
    if isinstance(e, EnumLit):
        return f"#{e.label}"
    if isinstance(e, This):
        return "this"
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, FieldRead):
        return f"this.{e.field}"
    if isinstance(e, Call):
        arg = "" if isinstance(e.arg, Unit) else print_expr(e.arg, depth, _SEQ)
        return f"{_receiver(e.receiver)}.{e.method}({arg})"
    if isinstance(e, Continue):
        return f"continue {e.label}"
    if isinstance(e, If):
        return (
            f"if ({print_expr(e.cond, depth)}) {_block(e.then, depth)}"
            f" else {_block(e.orelse, depth)}"
        )
    if isinstance(e, Labelled):
        return f"label {e.label} {_block(e.body, depth)}"
    if isinstance(e, Match):
        inner = _INDENT * (depth + 1)
        arms = ",\n".join(
            f"{inner}{l}: {print_expr(b, depth + 2)}" for l, b in e.arms
        )
        return f"match ({print_expr(e.scrutinee, depth)}) {{\n{arms}\n{pad}}}"
    raise TypeError(f"cannot print {e!r}")


def _block(e: Expr, depth: int) -> str:
    pad = _INDENT * depth
    inner = _INDENT * (depth + 1)
    return "{\n" + inner + print_expr(e, depth + 1) + "\n" + pad + "}"


def _print_field(f: SurfaceField, pad: str) -> str:
    return f"{pad}val {f.name}: {f.type};"


def _print_method(m: SurfaceMethod, pad: str, depth: int) -> str:
    param = f"{m.param[0]}: {m.param[1]}" if m.param else ""
    ret = f": {m.ret}" if m.ret else ""
    return f"{pad}fun {m.name}({param}){ret} {_block(m.body, depth)}"


def pretty_print(p: SurfaceProgram) -> str:
    out: list[str] = []
    for d in p.decls:
        if isinstance(d, SurfaceEnum):
            out.append(f"enum {d.name} {{ {', '.join(d.labels)} }}")
            continue
        lines = [f"class {d.name}[{d.usage}] {{"]
        for m in d.members:
            if isinstance(m, SurfaceField):
                lines.append(_print_field(m, _INDENT))
            else:
                lines.append(_print_method(m, _INDENT, 1))
        lines.append("}")
        out.append("\n".join(lines))
    main = ["main {"]
    for f in p.main.fields:
        main.append(_print_field(f, _INDENT))
    main.append(_INDENT + print_expr(p.main.body, 1))
    main.append("}")
    out.append("\n".join(main))
    return "\n\n".join(out) + "\n"
