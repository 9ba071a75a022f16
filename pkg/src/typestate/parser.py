"""Lexer and recursive-descent parser for ``.pap`` source files.

Grammar (``;`` sequencing is right-associative, ``*`` binds tighter than
``+``; ``//`` starts a comment)::

    program   := decl* mainblock
    decl      := classdecl | enumdecl
    classdecl := "class" IDENT "[" usage "]" "{" (field | method)* "}"
    enumdecl  := "enum" IDENT "{" IDENT ("," IDENT)* "}"
    field     := "val" IDENT ":" type ";"?
    method    := "fun" IDENT "(" param? ")" (":" type)? block
    usage     := "end" | IDENT | "rec" IDENT "." usage | "{" branch ("," branch)* "}"
    branch    := IDENT ";" (usage | "<" IDENT ":" usage ("," IDENT ":" usage)* ">")
    mainblock := "main" "{" field* expr? "}"
    expr      := stmt (";" expr?)?
    stmt      := lval "=" ("new" IDENT | stmt) | sum
    sum       := product ("+" product)*
    product   := atom ("*" atom)*
    atom      := "unit" | "null" | "true" | "false" | FLOAT | "#" IDENT | "this"
               | lval | call | if | match | label | "continue" IDENT | "(" expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BoolLit,
    Branch,
    Call,
    Choice,
    Continuation,
    Continue,
    End,
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
    Rec,
    Seq,
    This,
    Unit,
    Usage,
    UVar,
)
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan
from .surface import (
    ImplicitThis,
    Name,
    SurfaceClass,
    SurfaceEnum,
    SurfaceField,
    SurfaceMain,
    SurfaceMethod,
    SurfaceProgram,
)
from .usage import is_contractive

KEYWORDS = {
    "class", "enum", "val", "fun", "main", "rec", "end", "if", "else", "match",
    "label", "continue", "new", "this", "unit", "null", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<float>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[\[\]{}()<>;:,.=*+\#])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "float", "punct", "eof"
    text: str
    span: SourceSpan


class ParseError(DiagnosticError):
    pass


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(file, pos, pos + 1, line, pos - line_start + 1)
            raise ParseError(Diagnostic("SyntaxError", f"unexpected character {text[pos]!r}", span))
        kind = m.lastgroup
        chunk = m.group()
        span = SourceSpan(file, pos, m.end(), line, pos - line_start + 1)
        if kind == "ident" and chunk in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, span))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(file, pos, pos, line, pos - line_start + 1)))
    return tokens


def _join(a: SourceSpan, b: SourceSpan) -> SourceSpan:
    return SourceSpan(a.file, a.start, max(a.end, b.end), a.line, a.column)


class Parser:
    def __init__(self, text: str, file: str = "<input>"):
        self.file = file
        self.tokens = tokenize(text, file)
        self.pos = 0

    # -- token helpers -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, text: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t.kind in ("punct", "kw") and t.text == text

    def at_ident(self, offset: int = 0) -> bool:
        return self.peek(offset).kind == "ident"

    def advance(self) -> Token:
        t = self.peek()
        self.pos += 1
        return t

    def error(self, expected: tuple[str, ...], message: str | None = None) -> ParseError:
        t = self.peek()
        found = "end of input" if t.kind == "eof" else repr(t.text)
        msg = message or f"expected {' or '.join(expected)}, found {found}"
        return ParseError(Diagnostic("SyntaxError", msg, t.span, expected=expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error((repr(text),))
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if not self.at_ident():
            raise self.error((what,))
        return self.advance()

    def last_span(self) -> SourceSpan:
        return self.tokens[self.pos - 1].span

    # -- declarations ------------------------------------------------------

    def program(self) -> SurfaceProgram:
        decls: list[SurfaceClass | SurfaceEnum] = []
        while True:
            if self.at("class"):
                decls.append(self.classdecl())
            elif self.at("enum"):
                decls.append(self.enumdecl())
            else:
                break
        if not self.at("main"):
            raise self.error(("'class'", "'enum'", "'main'"))
        main = self.mainblock()
        if self.peek().kind != "eof":
            raise self.error(("end of input",))
        return SurfaceProgram(tuple(decls), main, self.file)

    def classdecl(self) -> SurfaceClass:
        start = self.expect("class").span
        name = self.ident("class name").text
        self.expect("[")
        ustart = self.peek().span
        usage = self.usage()
        uspan = _join(ustart, self.last_span())
        self.expect("]")
        self.expect("{")
        members: list[SurfaceField | SurfaceMethod] = []
        while not self.at("}"):
            if self.at("val"):
                members.append(self.fielddecl())
            elif self.at("fun"):
                members.append(self.method())
            else:
                raise self.error(("'val'", "'fun'", "'}'"))
        self.expect("}")
        return SurfaceClass(name, usage, tuple(members), _join(start, self.last_span()), uspan)

    def enumdecl(self) -> SurfaceEnum:
        start = self.expect("enum").span
        name = self.ident("enum name").text
        self.expect("{")
        labels = [self.ident("enum label").text]
        while self.at(","):
            self.advance()
            labels.append(self.ident("enum label").text)
        self.expect("}")
        return SurfaceEnum(name, tuple(labels), _join(start, self.last_span()))

    def fielddecl(self) -> SurfaceField:
        start = self.expect("val").span
        name = self.ident("field name").text
        self.expect(":")
        ty = self.type_name()
        if self.at(";"):
            self.advance()
        return SurfaceField(name, ty, _join(start, self.last_span()))

    def type_name(self) -> str:
        return self.ident("type").text

    def method(self) -> SurfaceMethod:
        start = self.expect("fun").span
        name = self.ident("method name").text
        self.expect("(")
        param = None
        if self.at_ident():
            pname = self.advance().text
            self.expect(":")
            param = (pname, self.type_name())
        self.expect(")")
        ret = None
        if self.at(":"):
            self.advance()
            ret = self.type_name()
        body = self.block()
        return SurfaceMethod(name, param, ret, body, _join(start, self.last_span()))

    def mainblock(self) -> SurfaceMain:
        start = self.expect("main").span
        self.expect("{")
        fields = []
        while self.at("val"):
            fields.append(self.fielddecl())
        if self.at("}"):
            body: Expr = Unit(span=self.peek().span)
        else:
            body = self.expr()
        self.expect("}")
        return SurfaceMain(tuple(fields), body, _join(start, self.last_span()))

    # -- usages ------------------------------------------------------------

    def usage(self) -> Usage:
        t = self.peek()
        if self.at("end"):
            self.advance()
            return End()
        if self.at("rec"):
            self.advance()
            var = self.ident("usage variable").text
            self.expect(".")
            u = Rec(var, self.usage())
            if not is_contractive(u):
                raise ParseError(
                    Diagnostic("NonContractive", f"recursive usage {u} is not contractive", t.span)
                )
            return u
        if self.at_ident():
            return UVar(self.advance().text)
        if self.at("{"):
            self.advance()
            arms = [self.branch()]
            while self.at(","):
                self.advance()
                arms.append(self.branch())
            self.expect("}")
            return Branch(tuple(arms))
        raise self.error(("usage",))

    def branch(self) -> tuple[str, Continuation]:
        m = self.ident("method name").text
        self.expect(";")
        if self.at("<"):
            self.advance()
            arms = [self.choice_arm()]
            while self.at(","):
                self.advance()
                arms.append(self.choice_arm())
            self.expect(">")
            return m, Choice(tuple(arms))
        return m, self.usage()

    def choice_arm(self) -> tuple[str, Usage]:
        label = self.ident("label").text
        self.expect(":")
        return label, self.usage()

    # -- expressions -------------------------------------------------------

    def block(self) -> Expr:
        self.expect("{")
        if self.at("}"):
            span = self.advance().span
            return Unit(span=span)
        e = self.expr()
        self.expect("}")
        return e

    def _expr_follows(self) -> bool:
        if self.at("}") or self.at(")") or self.at(",") or self.peek().kind == "eof":
            return False
        # ``l: e`` starts the next match arm
        return not (self.at_ident() and self.at(":", 1))

    def expr(self) -> Expr:
        first = self.stmt()
        if self.at(";"):
            self.advance()
            if self._expr_follows():
                second = self.expr()
                return Seq(first, second, span=_join(first.span, second.span))
        return first

    def stmt(self) -> Expr:
        start = self.peek().span
        target: Expr | None = None
        if self.at_ident() and self.at("=", 1):
            target = ImplicitThis(span=start)
            fname = self.advance().text
        elif self.at("this") and self.at(".", 1) and self.peek(2).kind == "ident" and self.at("=", 3):
            self.advance()
            self.advance()
            target = This(span=start)
            fname = self.advance().text
        if target is None:
            return self.sum()
        self.expect("=")
        if self.at("new"):
            self.advance()
            cls = self.ident("class name").text
            return FieldAssignNew(target, fname, cls, span=_join(start, self.last_span()))
        value = self.stmt()
        return FieldAssign(target, fname, value, span=_join(start, value.span))

    def sum(self) -> Expr:
        left = self.product()
        while self.at("+"):
            self.advance()
            right = self.product()
            left = FloatAdd(left, right, span=_join(left.span, right.span))
        return left

    def product(self) -> Expr:
        left = self.atom()
        while self.at("*"):
            self.advance()
            right = self.atom()
            left = FloatMul(left, right, span=_join(left.span, right.span))
        return left

    def call_tail(self, receiver: Expr, start: SourceSpan) -> Expr:
        method = self.ident("method name").text
        self.expect("(")
        if self.at(")"):
            arg: Expr = Unit(span=self.peek().span)
        else:
            arg = self.expr()
        self.expect(")")
        return Call(receiver, method, arg, span=_join(start, self.last_span()))

    def atom(self) -> Expr:
        t = self.peek()
        s = t.span
        if t.kind == "float":
            self.advance()
            return FloatLit(float(t.text), span=s)
        if t.kind == "kw":
            if t.text in ("unit", "null", "true", "false"):
                self.advance()
                if t.text == "unit":
                    return Unit(span=s)
                if t.text == "null":
                    return Null(span=s)
                return BoolLit(t.text == "true", span=s)
            if t.text == "this":
                self.advance()
                if not self.at("."):
                    return This(span=s)
                self.advance()
                name = self.ident("field or method name")
                if self.at("("):
                    self.pos -= 1
                    return self.call_tail(This(span=s), s)
                recv = FieldRead(This(span=s), name.text, span=_join(s, name.span))
                if self.at(".") and self.at_ident(1) and self.at("(", 2):
                    self.advance()
                    return self.call_tail(recv, s)
                return recv
            if t.text == "if":
                return self.if_expr()
            if t.text == "match":
                return self.match_expr()
            if t.text == "label":
                self.advance()
                k = self.ident("loop label").text
                body = self.block()
                return Labelled(k, body, span=_join(s, self.last_span()))
            if t.text == "continue":
                self.advance()
                k = self.ident("loop label").text
                return Continue(k, span=_join(s, self.last_span()))
        if t.kind == "ident":
            self.advance()
            if self.at(".") and self.at_ident(1) and self.at("(", 2):
                self.advance()
                return self.call_tail(Name(t.text, span=s), s)
            return Name(t.text, span=s)
        if self.at("#"):
            self.advance()
            label = self.ident("enum label")
            return EnumLit(label.text, This(span=s), span=_join(s, label.span))
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(("expression",))

    def if_expr(self) -> Expr:
        start = self.expect("if").span
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        if not self.at("else"):
            raise self.error(("'else'",), "expected 'else': both branches of an if are required")
        self.advance()
        orelse = self.block()
        return If(cond, then, orelse, span=_join(start, self.last_span()))

    def match_expr(self) -> Expr:
        start = self.expect("match").span
        self.expect("(")
        scrut = self.expr()
        self.expect(")")
        self.expect("{")
        arms = []
        while True:
            label = self.ident("match arm label").text
            self.expect(":")
            arms.append((label, self.expr()))
            if self.at(","):
                self.advance()
            if self.at("}"):
                break
        self.expect("}")
        return Match(scrut, tuple(arms), span=_join(start, self.last_span()))


def parse(text: str, file: str = "<input>") -> SurfaceProgram:
    """Parse a whole program. Raises :class:`ParseError` on the first error."""
    return Parser(text, file).program()


def parse_usage(text: str, file: str = "<usage>") -> Usage:
    p = Parser(text, file)
    u = p.usage()
    if p.peek().kind != "eof":
        raise p.error(("end of input",))
    return u


def parse_expr(text: str, file: str = "<expr>") -> Expr:
    """Parse a surface expression (used by tests and tooling)."""
    p = Parser(text, file)
    e = p.expr()
    if p.peek().kind != "eof":
        raise p.error(("end of input",))
    return e
