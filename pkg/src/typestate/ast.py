"""Core syntax: usages, expressions, declarations and programs.

Every node is an immutable dataclass. Source spans ride along on each node
but take no part in equality, so two expressions that differ only in where
they were written compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Union

from .diagnostics import NO_SPAN, SourceSpan

MAIN_CLASS = "Main"
MAIN_METHOD = "main"


def ref_name(ref: int) -> str:
    """Printable name of an object reference; reference 0 is the main object."""
    return "o_main" if ref == 0 else f"o{ref}"


# ---------------------------------------------------------------------------
# Usages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class End:
    def __str__(self) -> str:
        return "end"


@dataclass(frozen=True)
class UVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Usage"

    def __str__(self) -> str:
        return f"rec {self.var}.{self.body}"


@dataclass(frozen=True)
class Choice:
    """``<l1: U1, ..., ln: Un>``; only legal as a branch continuation."""

    arms: tuple[tuple[str, "Usage"], ...]

    def __str__(self) -> str:
        return "<" + ", ".join(f"{l}: {u}" for l, u in self.arms) + ">"


@dataclass(frozen=True)
class Branch:
    arms: tuple[tuple[str, Union["Usage", Choice]], ...]

    def __str__(self) -> str:
        return "{" + ", ".join(f"{m}; {w}" for m, w in self.arms) + "}"


Usage = Union[End, UVar, Rec, Branch]
Continuation = Union[End, UVar, Rec, Branch, Choice]


def free_usage_vars(u: Continuation, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(u, UVar):
        return set() if u.name in bound else {u.name}
    if isinstance(u, Rec):
        return free_usage_vars(u.body, bound | {u.var})
    if isinstance(u, (Branch, Choice)):
        out: set[str] = set()
        for _, w in u.arms:
            out |= free_usage_vars(w, bound)
        return out
    return set()


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Unit(Expr):
    pass


@dataclass(frozen=True)
class Null(Expr):
    pass


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class FloatLit(Expr):
    value: float


@dataclass(frozen=True)
class This(Expr):
    pass


@dataclass(frozen=True)
class Param(Expr):
    pass


@dataclass(frozen=True)
class ObjVal(Expr):
    """A concrete object reference; only produced by substitution."""

    ref: int


@dataclass(frozen=True)
class Hole(Expr):
    """Stand-in for a base-typed argument that is not yet a value.

    Only the checker creates these, when it expands a method body whose
    argument is an arbitrary expression; ``type`` is the argument's type.
    """

    type: Any


@dataclass(frozen=True)
class EnumLit(Expr):
    """``o.l``: the label ``l`` tied to the object ``owner`` (``This`` in source)."""

    label: str
    owner: Expr = field(default_factory=This)


@dataclass(frozen=True)
class FieldRead(Expr):
    target: Expr
    field: str


@dataclass(frozen=True)
class FieldAssign(Expr):
    target: Expr
    field: str
    value: Expr


@dataclass(frozen=True)
class FieldAssignNew(Expr):
    target: Expr
    field: str
    cls: str


@dataclass(frozen=True)
class Seq(Expr):
    first: Expr
    second: Expr


@dataclass(frozen=True)
class Call(Expr):
    """``r.m(e)`` where ``r`` is ``This``, ``Param``, an ``ObjVal`` or a
    ``FieldRead`` of one of those (the indirect form)."""

    receiver: Expr
    method: str
    arg: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Match(Expr):
    scrutinee: Expr
    arms: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Labelled(Expr):
    label: str
    body: Expr


@dataclass(frozen=True)
class Continue(Expr):
    label: str


@dataclass(frozen=True)
class FloatMul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class FloatAdd(Expr):
    left: Expr
    right: Expr


def is_value(e: Expr) -> bool:
    if isinstance(e, (Unit, Null, BoolLit, FloatLit, ObjVal)):
        return True
    return isinstance(e, EnumLit) and isinstance(e.owner, ObjVal)


def map_children(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``e`` with ``fn`` applied to each direct sub-expression."""
    s = e.span
    if isinstance(e, EnumLit):
        return EnumLit(e.label, fn(e.owner), span=s)
    if isinstance(e, FieldRead):
        return FieldRead(fn(e.target), e.field, span=s)
    if isinstance(e, FieldAssign):
        return FieldAssign(fn(e.target), e.field, fn(e.value), span=s)
    if isinstance(e, FieldAssignNew):
        return FieldAssignNew(fn(e.target), e.field, e.cls, span=s)
    if isinstance(e, Seq):
        return Seq(fn(e.first), fn(e.second), span=s)
    if isinstance(e, Call):
        return Call(fn(e.receiver), e.method, fn(e.arg), span=s)
    if isinstance(e, If):
        return If(fn(e.cond), fn(e.then), fn(e.orelse), span=s)
    if isinstance(e, Match):
        return Match(fn(e.scrutinee), tuple((l, fn(b)) for l, b in e.arms), span=s)
    if isinstance(e, Labelled):
        return Labelled(e.label, fn(e.body), span=s)
    if isinstance(e, FloatMul):
        return FloatMul(fn(e.left), fn(e.right), span=s)
    if isinstance(e, FloatAdd):
        return FloatAdd(fn(e.left), fn(e.right), span=s)
    return e


def children(e: Expr) -> list[Expr]:
    out: list[Expr] = []

    def collect(c: Expr) -> Expr:
        out.append(c)
        return c

    map_children(e, collect)
    return out


def walk(e: Expr):
    yield e
    for c in children(e):
        yield from walk(c)


def subst_this_param(e: Expr, obj: int, arg: Expr) -> Expr:
    """``e[this := obj][x := arg]``."""

    def go(x: Expr) -> Expr:
        if isinstance(x, This):
            return ObjVal(obj, span=x.span)
        if isinstance(x, Param):
            return arg
        return map_children(x, go)

    return go(e)


def subst_continue(e: Expr, label: str, replacement: Expr) -> Expr:
    """Replace free ``continue label`` in ``e``; inner loops rebinding the
    same label shadow it."""

    def go(x: Expr) -> Expr:
        if isinstance(x, Continue) and x.label == label:
            return replacement
        if isinstance(x, Labelled) and x.label == label:
            return x
        return map_children(x, go)

    return go(e)


def render_expr(e: Expr) -> str:
    """Compact one-line rendering in the calculus notation."""
    if isinstance(e, Unit):
        return "unit"
    if isinstance(e, Null):
        return "null"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, FloatLit):
        return repr(float(e.value))
    if isinstance(e, This):
        return "this"
    if isinstance(e, Param):
        return "x"
    if isinstance(e, ObjVal):
        return ref_name(e.ref)
    if isinstance(e, Hole):
        return f"<{e.type}>"
    if isinstance(e, EnumLit):
        return f"{render_expr(e.owner)}.{e.label}"
    if isinstance(e, FieldRead):
        return f"{render_expr(e.target)}.{e.field}"
    if isinstance(e, FieldAssign):
        return f"{render_expr(e.target)}.{e.field} = {render_expr(e.value)}"
    if isinstance(e, FieldAssignNew):
        return f"{render_expr(e.target)}.{e.field} = new {e.cls}"
    if isinstance(e, Seq):
        return f"{render_expr(e.first)}; {render_expr(e.second)}"
    if isinstance(e, Call):
        return f"{render_expr(e.receiver)}.{e.method}({render_expr(e.arg)})"
    if isinstance(e, If):
        return f"if ({render_expr(e.cond)}) {{{render_expr(e.then)}}} else {{{render_expr(e.orelse)}}}"
    if isinstance(e, Match):
        arms = ", ".join(f"{l}: {render_expr(b)}" for l, b in e.arms)
        return f"match ({render_expr(e.scrutinee)}) {{{arms}}}"
    if isinstance(e, Labelled):
        return f"{e.label}: {{{render_expr(e.body)}}}"
    if isinstance(e, Continue):
        return f"continue {e.label}"
    if isinstance(e, FloatMul):
        return f"({render_expr(e.left)} * {render_expr(e.right)})"
    if isinstance(e, FloatAdd):
        return f"({render_expr(e.left)} + {render_expr(e.right)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeAnnot:
    """A declared type: a class, an enum, or one of the base types."""

    kind: str  # "class" | "enum" | "void" | "bool" | "float"
    name: str

    def __str__(self) -> str:
        return self.name


VOID = TypeAnnot("void", "void")
BOOL = TypeAnnot("bool", "bool")
FLOAT = TypeAnnot("float", "float")


def class_type(name: str) -> TypeAnnot:
    return TypeAnnot("class", name)


def enum_type(name: str) -> TypeAnnot:
    return TypeAnnot("enum", name)


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: TypeAnnot
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class MethodDecl:
    name: str
    param: str
    param_type: TypeAnnot
    ret_type: TypeAnnot
    body: Expr
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class ClassDecl:
    name: str
    usage: Usage
    fields: tuple[FieldDecl, ...]
    methods: tuple[MethodDecl, ...]
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)

    def field_decl(self, name: str) -> FieldDecl | None:
        return next((f for f in self.fields if f.name == name), None)

    def method(self, name: str) -> MethodDecl | None:
        return next((m for m in self.methods if m.name == name), None)


@dataclass(frozen=True)
class EnumDecl:
    name: str
    labels: tuple[str, ...]
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


Decl = Union[ClassDecl, EnumDecl]


@dataclass(frozen=True)
class Program:
    decls: tuple[Decl, ...]
    main: ClassDecl

    @cached_property
    def classes(self) -> dict[str, ClassDecl]:
        out = {d.name: d for d in self.decls if isinstance(d, ClassDecl)}
        out[self.main.name] = self.main
        return out

    @cached_property
    def enums(self) -> dict[str, EnumDecl]:
        return {d.name: d for d in self.decls if isinstance(d, EnumDecl)}

    @cached_property
    def label_enum(self) -> dict[str, str]:
        """Enum label to the enum declaring it (labels are globally unique)."""
        out: dict[str, str] = {}
        for en in self.enums.values():
            for label in en.labels:
                out.setdefault(label, en.name)
        return out

    @property
    def main_method(self) -> MethodDecl:
        m = self.main.method(MAIN_METHOD)
        assert m is not None
        return m
