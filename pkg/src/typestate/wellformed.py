"""Well-formedness of expressions, methods and whole programs.

An expression is well-formed when
  1. nothing follows a ``continue`` once loops are unfolded,
  2. every ``continue`` names an enclosing loop,
  3. every ``continue`` sits under an ``if`` or ``match`` branch inside its loop,
  4. every loop body has a branch that does not end in ``continue``.
A method is well-formed when its body is, and its calls to itself on
``this`` are guarded by an ``if`` or ``match`` branch.
"""

from __future__ import annotations

from .ast import (
    MAIN_CLASS,
    MAIN_METHOD,
    Call,
    ClassDecl,
    Continue,
    Expr,
    If,
    Labelled,
    Match,
    MethodDecl,
    ObjVal,
    Program,
    Seq,
    This,
    VOID,
    children,
    walk,
)
from .desugar import MAIN_USAGE
from .diagnostics import Diagnostic

_VALUE_EXIT = None  # marker for "ends without continue"


def _exits(e: Expr) -> set[str | None]:
    """How the tail of ``e`` can end: a continued label, or ``None`` for a value."""
    if isinstance(e, Continue):
        return {e.label}
    if isinstance(e, Seq):
        return _exits(e.second)
    if isinstance(e, If):
        return _exits(e.then) | _exits(e.orelse)
    if isinstance(e, Match):
        out: set[str | None] = set()
        for _, b in e.arms:
            out |= _exits(b)
        return out
    if isinstance(e, Labelled):
        return _exits(e.body) - {e.label}
    return {_VALUE_EXIT}


def _diag(clause: int, message: str, e: Expr) -> Diagnostic:
    return Diagnostic("IllFormed", message, e.span, rule=f"well-formedness clause {clause}")


def well_formed_expr(e: Expr) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def go(x: Expr, bound: frozenset[str], tail: frozenset[str], guarded: frozenset[str]) -> None:
        if isinstance(x, Continue):
            if x.label not in bound:
                diags.append(_diag(2, f"continue {x.label} has no enclosing loop labelled {x.label}", x))
                return
            if x.label not in tail:
                diags.append(_diag(1, f"an expression follows continue {x.label} once the loop is unfolded", x))
            if x.label not in guarded:
                diags.append(_diag(3, f"continue {x.label} is not guarded by an if or match", x))
            return
        if isinstance(x, Labelled):
            if _VALUE_EXIT not in _exits(x.body):
                diags.append(_diag(4, f"every branch of loop {x.label} ends in continue", x))
            go(x.body, bound | {x.label}, tail | {x.label}, guarded - {x.label})
            return
        if isinstance(x, Seq):
            go(x.first, bound, frozenset(), guarded)
            go(x.second, bound, tail, guarded)
            return
        if isinstance(x, If):
            go(x.cond, bound, frozenset(), guarded)
            go(x.then, bound, tail, bound)
            go(x.orelse, bound, tail, bound)
            return
        if isinstance(x, Match):
            go(x.scrutinee, bound, frozenset(), guarded)
            for _, b in x.arms:
                go(b, bound, tail, bound)
            return
        for c in children(x):
            go(c, bound, frozenset(), guarded)

    go(e, frozenset(), frozenset(), frozenset())
    return diags


def _is_self_call(x: Expr, method: str) -> bool:
    return isinstance(x, Call) and x.method == method and isinstance(x.receiver, (This, ObjVal))


def well_formed_method(m: MethodDecl, enclosing: ClassDecl | None = None) -> list[Diagnostic]:
    diags = well_formed_expr(m.body)
    owner = f"{enclosing.name}." if enclosing is not None else ""

    def go(x: Expr, guarded: bool) -> None:
        if _is_self_call(x, m.name) and not guarded:
            diags.append(
                Diagnostic(
                    "UnguardedRecursion",
                    f"recursive call to {owner}{m.name} is not guarded by an if or match",
                    x.span,
                    rule="well-formed methods",
                )
            )
        if isinstance(x, If):
            go(x.cond, guarded)
            go(x.then, True)
            go(x.orelse, True)
        elif isinstance(x, Match):
            go(x.scrutinee, guarded)
            for _, b in x.arms:
                go(b, True)
        else:
            for c in children(x):
                go(c, guarded)

    go(m.body, False)
    return diags


def check_program(p: Program) -> list[Diagnostic]:
    """Program-level invariants plus well-formedness of every method."""
    diags: list[Diagnostic] = []
    main = p.main
    if main.name != MAIN_CLASS or main.usage != MAIN_USAGE:
        diags.append(Diagnostic("BadMain", "the main class must have usage {main; end}", main.span))
    if [m.name for m in main.methods] != [MAIN_METHOD] or main.methods[0].param_type != VOID:
        diags.append(Diagnostic("BadMain", "the main class must have exactly one method main(x: void)", main.span))
    for cls in p.classes.values():
        for m in cls.methods:
            diags.extend(well_formed_method(m, cls))
            for x in walk(m.body):
                if isinstance(x, ObjVal):
                    diags.append(
                        Diagnostic("IllFormed", "object references cannot appear in program text", x.span)
                    )
    return diags
