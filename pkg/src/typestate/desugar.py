"""Lowering of the surface tree to the core calculus."""

from __future__ import annotations

from .ast import (
    BOOL,
    FLOAT,
    MAIN_CLASS,
    MAIN_METHOD,
    VOID,
    Branch,
    Call,
    ClassDecl,
    Continuation,
    End,
    EnumDecl,
    Expr,
    FieldAssign,
    FieldAssignNew,
    FieldDecl,
    FieldRead,
    MethodDecl,
    Param,
    Program,
    Rec,
    This,
    TypeAnnot,
    Choice,
    class_type,
    enum_type,
    free_usage_vars,
    map_children,
)
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan
from .surface import (
    ImplicitThis,
    Name,
    SurfaceClass,
    SurfaceEnum,
    SurfaceField,
    SurfaceMethod,
    SurfaceProgram,
)

MAIN_USAGE = Branch(((MAIN_METHOD, End()),))
UNNAMED_PARAM = "_"


class _Lowering:
    def __init__(self, surface: SurfaceProgram):
        self.surface = surface
        self.diags: list[Diagnostic] = []
        self.classes = {d.name for d in surface.decls if isinstance(d, SurfaceClass)}
        self.enums = {d.name for d in surface.decls if isinstance(d, SurfaceEnum)}

    def error(self, kind: str, message: str, span: SourceSpan) -> None:
        self.diags.append(Diagnostic(kind, message, span))

    def type_annot(self, name: str, span: SourceSpan) -> TypeAnnot:
        if name == "void":
            return VOID
        if name == "bool":
            return BOOL
        if name == "float":
            return FLOAT
        if name in self.classes or name == MAIN_CLASS:
            return class_type(name)
        if name in self.enums:
            return enum_type(name)
        self.error("UnknownType", f"unknown type {name!r}", span)
        return VOID

    def check_usage(self, cls: str, u: Continuation, span: SourceSpan) -> None:
        free = free_usage_vars(u)
        if free:
            self.error("OpenUsage", f"usage of {cls} has unbound variables {', '.join(sorted(free))}", span)

        def dup(v: Continuation) -> None:
            if isinstance(v, (Branch, Choice)):
                names = [n for n, _ in v.arms]
                seen = {n for n in names if names.count(n) > 1}
                if seen:
                    what = "methods" if isinstance(v, Branch) else "labels"
                    self.error("DuplicateName", f"usage of {cls} repeats {what} {', '.join(sorted(seen))}", span)
                for _, w in v.arms:
                    dup(w)
            elif isinstance(v, Rec):
                dup(v.body)

        dup(u)

    def expr(self, e: Expr, fields: set[str], param: str) -> Expr:
        def resolve(name: Name) -> Expr:
            if name.ident == param:
                return Param(span=name.span)
            if name.ident in fields:
                return FieldRead(This(span=name.span), name.ident, span=name.span)
            self.error(
                "UnknownIdentifier",
                f"{name.ident!r} is neither a field of this class nor the method parameter",
                name.span,
            )
            return FieldRead(This(span=name.span), name.ident, span=name.span)

        def go(x: Expr) -> Expr:
            if isinstance(x, Name):
                return resolve(x)
            if isinstance(x, (FieldAssign, FieldAssignNew)) and isinstance(x.target, ImplicitThis):
                if x.field not in fields:
                    self.error("UnknownIdentifier", f"{x.field!r} is not a field of this class", x.span)
                target = This(span=x.target.span)
                if isinstance(x, FieldAssign):
                    return FieldAssign(target, x.field, go(x.value), span=x.span)
                return FieldAssignNew(target, x.field, x.cls, span=x.span)
            if isinstance(x, Call) and isinstance(x.receiver, Name):
                return Call(resolve(x.receiver), x.method, go(x.arg), span=x.span)
            return map_children(x, go)

        return go(e)

    def fields(self, fs: list[SurfaceField], owner: str) -> tuple[FieldDecl, ...]:
        out = []
        seen: set[str] = set()
        for f in fs:
            if f.name in seen:
                self.error("DuplicateName", f"field {f.name!r} declared twice in {owner}", f.span)
            seen.add(f.name)
            out.append(FieldDecl(f.name, self.type_annot(f.type, f.span), f.span))
        return tuple(out)

    def method(self, m: SurfaceMethod, fields: set[str]) -> MethodDecl:
        if m.param is None:
            pname, ptype = UNNAMED_PARAM, VOID
        else:
            pname, ptype = m.param[0], self.type_annot(m.param[1], m.span)
        ret = VOID if m.ret is None else self.type_annot(m.ret, m.span)
        body = self.expr(m.body, fields, pname)
        return MethodDecl(m.name, pname, ptype, ret, body, m.span)

    def run(self) -> Program:
        decls = []
        names: dict[str, SourceSpan] = {}
        label_owner: dict[str, str] = {}
        for d in self.surface.decls:
            if d.name == MAIN_CLASS:
                self.error("DuplicateName", f"{MAIN_CLASS!r} is reserved for the main block", d.span)
            if d.name in names:
                self.error("DuplicateName", f"{d.name!r} is declared more than once", d.span)
            names[d.name] = d.span
            if isinstance(d, SurfaceEnum):
                if len(set(d.labels)) != len(d.labels):
                    self.error("DuplicateName", f"enum {d.name} repeats a label", d.span)
                for label in d.labels:
                    if label in label_owner and label_owner[label] != d.name:
                        self.error(
                            "DuplicateName",
                            f"label {label!r} is declared by both {label_owner[label]} and {d.name}",
                            d.span,
                        )
                    label_owner.setdefault(label, d.name)
                decls.append(EnumDecl(d.name, d.labels, d.span))
                continue
            self.check_usage(d.name, d.usage, d.usage_span)
            fs = self.fields([m for m in d.members if isinstance(m, SurfaceField)], d.name)
            fnames = {f.name for f in fs}
            methods = []
            seen: set[str] = set()
            for m in d.members:
                if isinstance(m, SurfaceMethod):
                    if m.name in seen:
                        self.error("DuplicateName", f"method {m.name!r} declared twice in {d.name}", m.span)
                    seen.add(m.name)
                    methods.append(self.method(m, fnames))
            decls.append(ClassDecl(d.name, d.usage, fs, tuple(methods), d.span))

        sm = self.surface.main
        mfields = self.fields(list(sm.fields), MAIN_CLASS)
        body = self.expr(sm.body, {f.name for f in mfields}, UNNAMED_PARAM)
        main_method = MethodDecl(MAIN_METHOD, UNNAMED_PARAM, VOID, VOID, body, sm.span)
        main = ClassDecl(MAIN_CLASS, MAIN_USAGE, mfields, (main_method,), sm.span)
        if self.diags:
            raise DiagnosticError(self.diags)
        return Program(tuple(decls), main)


def desugar(surface: SurfaceProgram) -> Program:
    """Resolve names and fill in the implicit parts of a surface program.

    Raises :class:`DiagnosticError` listing every resolution problem found.
    """
    return _Lowering(surface).run()
