"""Global typestate analysis.

The checker threads a typing environment through the whole program graph:
every method call is expanded in place, so a change to an object's usage
made through one alias is visible through all the others. Two snapshot
maps bound the expansion. The recursion map holds, per (object, method),
the environment installed when that method was last expanded; the label
map holds the environment at entry to each enclosing loop. A recursive
call or a ``continue`` that arrives in the recorded environment produces a
:class:`Pending` result, which adopts whatever the sibling branches produce
when the enclosing ``if``/``match`` joins.
"""

from __future__ import annotations

import hashlib
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

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
    Hole,
    If,
    Labelled,
    Match,
    Null,
    ObjVal,
    Program,
    Seq,
    Unit,
    is_value,
    ref_name,
    render_expr,
    subst_this_param,
)
from .diagnostics import Diagnostic, DiagnosticError, NO_SPAN, SourceSpan
from .env import (
    BASE_BOT,
    BOOL_T,
    BOT_T,
    FLOAT_T,
    VOID_T,
    Binding,
    EnumLink,
    EnumType,
    ObjectType,
    Reference,
    TypeEnv,
    ValueType,
    agree,
    env_equal,
    get_type,
    init_types,
    new_binding,
    render_env,
    returns,
    term,
    types_equal,
    vtype,
)
from .usage import LabelAct, MethodAct, available, terminated, usage_step
from .ast import End

TYPING_RULES = (
    "Main", "Assign", "Field", "New", "Unit", "Bool", "Enum", "Null", "Const", "Obj",
    "Call-d", "Call-d-rec", "Call-ind", "Call-ind-rec", "If", "Comp", "Label",
    "Continue", "Case",
)

DEFAULT_MAX_DEPTH = 150

if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)


@dataclass(frozen=True)
class Done:
    type: ValueType
    env: TypeEnv


@dataclass(frozen=True)
class Pending:
    """Result of ``continue k`` (origin ``("continue", k)``) or of a recursive
    call that hit its base case (origin ``("call", ref, method)``)."""

    origin: tuple
    span: SourceSpan = field(default=NO_SPAN, compare=False)


CheckResult = Done | Pending
RecEnv = Mapping[tuple[int, str], TypeEnv]
LabelEnv = Mapping[str, TypeEnv]


class TypeCheckError(DiagnosticError):
    @property
    def diagnostic(self) -> Diagnostic:
        return self.diagnostics[0]


@dataclass(frozen=True)
class RuleApp:
    rule: str
    span: SourceSpan
    env_hash: str = ""

    def __str__(self) -> str:
        return f"RULE {self.rule} {self.span} {self.env_hash}".rstrip()


@dataclass
class CheckReport:
    """Outcome of checking a whole program."""

    ok: bool
    env: TypeEnv | None = None
    type: ValueType | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)
    trace: list[RuleApp] = field(default_factory=list)
    expansions: Counter = field(default_factory=Counter)

    @property
    def rules_used(self) -> set[str]:
        return {r.rule for r in self.trace}


def env_hash(env: TypeEnv) -> str:
    return hashlib.sha1(render_env(env).encode()).hexdigest()[:10]


def _usage_text(u) -> str:
    offers = sorted(str(a) for a in available(u))
    return f"{u} (offers {', '.join(offers) if offers else 'nothing'})"


class Checker:
    """One checking session over a program.

    ``forget`` is a test hook: when a recursive call meets its snapshot the
    hook is asked whether to drop that snapshot and expand the method again.
    """

    def __init__(
        self,
        program: Program,
        *,
        hash_envs: bool = False,
        max_depth: int = DEFAULT_MAX_DEPTH,
        forget: Callable[[int, str], bool] | None = None,
    ):
        self.program = program
        self.hash_envs = hash_envs
        self.max_depth = max_depth
        self.forget = forget
        self.trace: list[RuleApp] = []
        self.expansions: Counter = Counter()
        self._depth = 0
        self._calls: list[tuple[SourceSpan, str]] = []

    # -- helpers -----------------------------------------------------------

    def _rule(self, name: str, e: Expr | None, env: TypeEnv) -> None:
        h = env_hash(env) if self.hash_envs else ""
        self.trace.append(RuleApp(name, e.span if e is not None else NO_SPAN, h))

    def fail(self, kind: str, rule: str, e: Expr, message: str, obj: int | None = None, usage=None):
        raise TypeCheckError(
            Diagnostic(
                kind,
                message,
                e.span,
                rule=rule,
                obj=ref_name(obj) if obj is not None else None,
                usage=str(usage) if usage is not None else None,
                notes=tuple(f"inside {what}, called at {span}" for span, what in reversed(self._calls)),
            )
        )

    def _done(self, r: CheckResult, e: Expr, what: str) -> Done:
        if isinstance(r, Pending):
            if r.origin[0] == "continue":
                msg = f"continue {r.origin[1]} cannot be used as {what}"
            else:
                msg = (
                    f"recursive call {ref_name(r.origin[1])}.{r.origin[2]} cannot be used as {what}; "
                    "recursive calls must end their method"
                )
            self.fail("RecursionNotInTail" if r.origin[0] == "call" else "ContinueNotInTail", "Comp", e, msg)
        return r

    def _obj(self, e: Expr, rule: str) -> int:
        if isinstance(e, ObjVal):
            return e.ref
        self.fail("InternalError", rule, e, f"expected an object reference, found {render_expr(e)}")

    def _binding(self, env: TypeEnv, ref: int, e: Expr, rule: str) -> Binding:
        if ref not in env:
            self.fail("DanglingReference", rule, e, f"{ref_name(ref)} is not in the typing environment")
        return env[ref]

    def join(self, results: list[CheckResult], e: Expr, rule: str) -> CheckResult:
        dones = [r for r in results if isinstance(r, Done)]
        if not dones:
            return results[0]
        first = dones[0]
        for other in dones[1:]:
            if not types_equal(first.type, other.type):
                self.fail(
                    "BranchMismatch", rule, e,
                    f"branches produce different types: {first.type} and {other.type}",
                )
            if not env_equal(first.env, other.env):
                detail = _env_difference(first.env, other.env)
                self.fail("BranchMismatch", rule, e, f"branches end in different typing environments: {detail}")
        return first

    # -- the judgment --------------------------------------------------------

    def check(
        self,
        theta: RecEnv,
        omega: LabelEnv,
        env: TypeEnv,
        e: Expr,
        link: bool = False,
    ) -> CheckResult:
        """``theta; omega; env |- e : T -| env'``.

        ``link`` is set where an enum value may be consumed by a ``match``:
        the scrutinee itself and the tail of a method called there. In those
        positions an enum literal ``o.l`` gets the link type ``L link o``;
        elsewhere it gets the plain enum type.
        """
        if isinstance(e, Unit):
            self._rule("Unit", e, env)
            return Done(VOID_T, env)
        if isinstance(e, BoolLit):
            self._rule("Bool", e, env)
            return Done(BOOL_T, env)
        if isinstance(e, Null):
            self._rule("Null", e, env)
            return Done(BOT_T, env)
        if isinstance(e, FloatLit):
            self._rule("Float", e, env)
            return Done(FLOAT_T, env)
        if isinstance(e, Hole):
            return Done(e.type, env)
        if isinstance(e, ObjVal):
            self._rule("Obj", e, env)
            return Done(self._binding(env, e.ref, e, "Obj").type, env)
        if isinstance(e, EnumLit):
            return self._enum(env, e, link)
        if isinstance(e, FieldRead):
            return self._field(env, e)
        if isinstance(e, FieldAssign):
            return self._assign(theta, omega, env, e)
        if isinstance(e, FieldAssignNew):
            return self._new(env, e)
        if isinstance(e, Seq):
            self._rule("Comp", e, env)
            first = self._done(self.check(theta, omega, env, e.first), e.first, "the left side of a sequence")
            return self.check(theta, omega, first.env, e.second, link)
        if isinstance(e, Call):
            return self._call(theta, omega, env, e, link)
        if isinstance(e, If):
            self._rule("If", e, env)
            c = self._done(self.check(theta, omega, env, e.cond), e.cond, "a condition")
            if c.type != BOOL_T:
                self.fail("ConditionNotBool", "If", e.cond, f"condition has type {c.type}, expected bool")
            then = self.check(theta, omega, c.env, e.then, link)
            orelse = self.check(theta, omega, c.env, e.orelse, link)
            return self.join([then, orelse], e, "If")
        if isinstance(e, Match):
            return self._case(theta, omega, env, e, link)
        if isinstance(e, Labelled):
            self._rule("Label", e, env)
            inner = dict(omega)
            inner[e.label] = env
            r = self.check(theta, inner, env, e.body, link)
            if isinstance(r, Pending) and r.origin == ("continue", e.label):
                self.fail("LoopNeverExits", "Label", e, f"loop {e.label} has no branch that exits")
            return r
        if isinstance(e, Continue):
            self._rule("Continue", e, env)
            if e.label not in omega:
                self.fail("UnboundLabel", "Continue", e, f"continue {e.label} outside a loop labelled {e.label}")
            if not env_equal(omega[e.label], env):
                detail = _env_difference(omega[e.label], env)
                self.fail(
                    "ContinueEnvMismatch", "Continue", e,
                    f"continue {e.label} reached with an environment different from the loop entry: {detail}",
                )
            return Pending(("continue", e.label), e.span)
        if isinstance(e, (FloatMul, FloatAdd)):
            self._rule("FloatOp", e, env)
            left = self._done(self.check(theta, omega, env, e.left), e.left, "an operand")
            right = self._done(self.check(theta, omega, left.env, e.right), e.right, "an operand")
            for side in (left, right):
                if side.type != FLOAT_T:
                    self.fail("OperandNotFloat", "FloatOp", e, f"arithmetic operand has type {side.type}")
            return Done(FLOAT_T, right.env)
        self.fail("InternalError", "?", e, f"cannot type {render_expr(e)} (unsubstituted this or parameter?)")

    # -- individual rules --------------------------------------------------

    def _enum(self, env: TypeEnv, e: EnumLit, link: bool) -> Done:
        enum = self.program.label_enum.get(e.label)
        if enum is None:
            self.fail("UnknownLabel", "Const", e, f"{e.label} is not a label of any enum")
        owner = self._obj(e.owner, "Enum")
        if link:
            self._rule("Enum", e, env)
            return Done(EnumLink(enum, owner), env)
        self._rule("Const", e, env)
        return Done(EnumType(enum), env)

    def _field(self, env: TypeEnv, e: FieldRead) -> Done:
        self._rule("Field", e, env)
        o = self._obj(e.target, "Field")
        z = self._binding(env, o, e, "Field").field(e.field)
        if z is None:
            self.fail("UnknownField", "Field", e, f"{env[o].type.cls} has no field {e.field}", o)
        return Done(get_type(z, env), env)

    def _assign(self, theta, omega, env: TypeEnv, e: FieldAssign) -> Done:
        self._rule("Assign", e, env)
        r = self._done(self.check(theta, omega, env, e.value), e.value, "an assigned value")
        o = self._obj(e.target, "Assign")
        cls = self.program.classes[self._binding(r.env, o, e, "Assign").type.cls]
        decl = cls.field_decl(e.field)
        if decl is None:
            self.fail("UnknownField", "Assign", e, f"{cls.name} has no field {e.field}", o)
        if isinstance(r.type, EnumLink):
            self.fail(
                "LinkNotStorable", "Assign", e,
                f"{r.type} cannot be stored in field {e.field}; match on it instead",
            )
        if not agree(decl.type, r.type):
            self.fail("AssignMismatch", "Assign", e, f"cannot store {r.type} in field {e.field}: {decl.type}", o)
        return Done(VOID_T, r.env.with_field(o, e.field, vtype(r.type)))

    def _new(self, env: TypeEnv, e: FieldAssignNew) -> Done:
        self._rule("New", e, env)
        o = self._obj(e.target, "New")
        owner = self.program.classes[self._binding(env, o, e, "New").type.cls]
        cls = self.program.classes.get(e.cls)
        if cls is None:
            self.fail("UnknownClass", "New", e, f"unknown class {e.cls}")
        decl = owner.field_decl(e.field)
        if decl is None:
            self.fail("UnknownField", "New", e, f"{owner.name} has no field {e.field}", o)
        if decl.type.kind != "class" or decl.type.name != e.cls:
            self.fail("AssignMismatch", "New", e, f"field {e.field}: {decl.type} cannot hold a new {e.cls}", o)
        fresh = env.fresh_ref()
        out = env.set(fresh, new_binding(fresh, cls)).with_field(o, e.field, Reference(fresh))
        return Done(VOID_T, out)

    def _case(self, theta, omega, env: TypeEnv, e: Match, link: bool) -> CheckResult:
        self._rule("Case", e, env)
        s = self._done(self.check(theta, omega, env, e.scrutinee, True), e.scrutinee, "a match scrutinee")
        if not isinstance(s.type, EnumLink):
            self.fail(
                "LinkExpected", "Case", e.scrutinee,
                f"match scrutinee has type {s.type}; only an enum returned by a method "
                "(or written literally) can drive a choice",
            )
        enum = self.program.enums[s.type.enum]
        arms = dict(e.arms)
        missing = [l for l in enum.labels if l not in arms]
        if missing:
            self.fail(
                "NonExhaustiveMatch", "Case", e,
                f"match on {enum.name} is missing labels {', '.join(missing)}",
            )
        extra = [l for l, _ in e.arms if l not in enum.labels]
        if extra or len(arms) != len(e.arms):
            self.fail("UnknownLabel", "Case", e, f"match arms {', '.join(extra) or 'repeated'} do not fit {enum.name}")
        o = s.type.ref
        usage = s.env.usage(o)
        results = []
        for label in enum.labels:
            nxt = usage_step(usage, LabelAct(label))
            if nxt is None:
                self.fail(
                    "LabelNotAvailable", "Case", e,
                    f"{ref_name(o)} cannot take label {label}: its usage is {_usage_text(usage)}",
                    o, usage,
                )
            results.append(self.check(theta, omega, s.env.with_usage(o, nxt), arms[label], link))
        return self.join(results, e, "Case")

    def _call(self, theta: RecEnv, omega: LabelEnv, env: TypeEnv, e: Call, link: bool) -> CheckResult:
        direct = not isinstance(e.receiver, FieldRead)
        rule = "Call-d" if direct else "Call-ind"
        arg = self._done(self.check(theta, omega, env, e.arg), e.arg, "a method argument")
        env2 = arg.env

        recv = e.receiver
        if isinstance(recv, ObjVal):
            target = recv.ref
            self._binding(env2, target, e, rule)
        elif isinstance(recv, FieldRead):
            o = self._obj(recv.target, rule)
            z = self._binding(env2, o, e, rule).field(recv.field)
            if z is None:
                self.fail("UnknownField", rule, e, f"{env2[o].type.cls} has no field {recv.field}", o)
            if z == BASE_BOT:
                self.fail(
                    "NullReceiver", rule, e,
                    f"cannot call {e.method} on {ref_name(o)}.{recv.field}: the field is null here",
                    o,
                )
            if not isinstance(z, Reference):
                self.fail("NotAnObject", rule, e, f"field {recv.field} holds {z}, not an object", o)
            target = z.ref
        elif isinstance(recv, Null):
            self.fail("NullReceiver", rule, e, f"cannot call {e.method} on null")
        elif isinstance(recv, Hole) and recv.type == BOT_T:
            self.fail("NullReceiver", rule, e, f"cannot call {e.method} on null")
        else:
            self.fail("NotAnObject", rule, e, f"cannot call {e.method} on {render_expr(recv)}")

        b = env2[target]
        cls = self.program.classes[b.type.cls]
        md = cls.method(e.method)
        if md is None:
            self.fail("UnknownMethod", rule, e, f"class {cls.name} has no method {e.method}", target)
        if not agree(md.param_type, arg.type):
            self.fail(
                "ArgumentMismatch", rule, e.arg,
                f"argument of {cls.name}.{e.method} has type {arg.type}, expected {md.param_type}",
            )
        usage = b.type.usage
        nxt = usage_step(usage, MethodAct(e.method))
        if nxt is None:
            self.fail(
                "MethodNotAvailable", rule, e,
                f"cannot call {e.method} on {ref_name(target)} ({cls.name}): usage {_usage_text(usage)}",
                target, usage,
            )
        env3 = env2.with_usage(target, nxt)
        key = (target, e.method)

        if key in theta and env_equal(theta[key], env3):
            if self.forget is not None and self.forget(target, e.method):
                theta = {k: v for k, v in theta.items() if k != key}
            else:
                self._rule(rule + "-rec", e, env)
                return Pending(("call", target, e.method), e.span)

        self._rule(rule, e, env)
        if self._depth >= self.max_depth:
            self.fail(
                "RecursiveEnvMismatch" if key in theta else "ExpansionLimit", rule, e,
                f"more than {self.max_depth} nested method expansions; recursion never returns "
                "to a recorded environment",
            )
        self.expansions[(e.span, target, e.method)] += 1
        body = subst_this_param(md.body, target, _param_value(e.arg, arg.type))
        inner = dict(theta)
        inner[key] = env3
        self._depth += 1
        self._calls.append((e.span, f"{ref_name(target)}.{e.method}"))
        try:
            r = self.check(inner, omega, env3, body, link and md.ret_type.kind == "enum")
        finally:
            self._depth -= 1
            self._calls.pop()
        if isinstance(r, Pending):
            if r.origin == ("call", target, e.method):
                self.fail(
                    "RecursionNeverReturns", rule, e,
                    f"every path through {cls.name}.{e.method} calls it again",
                )
            return r
        if not returns(md.ret_type, r.type):
            self.fail(
                "ReturnMismatch", rule, e,
                f"{cls.name}.{e.method} is declared to return {md.ret_type} but returns {r.type}",
            )
        return r


def _param_value(arg: Expr, T: ValueType) -> Expr:
    """What replaces the parameter when a method body is expanded.

    Objects are passed by reference; values are passed as themselves; any
    other base-typed argument is replaced by a hole of its type.
    """
    if isinstance(T, ObjectType):
        return ObjVal(T.ref)
    if T == BOT_T:
        return Null()
    if is_value(arg):
        return arg
    return Hole(T)


def _env_difference(g1: TypeEnv, g2: TypeEnv) -> str:
    only1 = sorted(set(g1) - set(g2))
    only2 = sorted(set(g2) - set(g1))
    if only1 or only2:
        names = ", ".join(ref_name(o) for o in only1 + only2)
        return f"objects {names} exist on only one side"
    for o in g1:
        b1, b2 = g1[o], g2[o]
        if b1.fields != b2.fields:
            for (f, z1), (_, z2) in zip(b1.fields, b2.fields):
                if z1 != z2:
                    return f"{ref_name(o)}.{f} is {z1} on one side and {z2} on the other"
        if not types_equal(b1.type, b2.type):
            return f"{ref_name(o)} has usage {b1.type.usage} on one side and {b2.type.usage} on the other"
    return "no difference"


def initial_env(program: Program) -> TypeEnv:
    main = program.main
    return TypeEnv({0: Binding(ObjectType(0, main.name, End()), init_types(main.fields))})


def main_body(program: Program) -> Expr:
    return subst_this_param(program.main_method.body, 0, Unit())


def check_expr(
    program: Program,
    theta: RecEnv,
    omega: LabelEnv,
    env: TypeEnv,
    e: Expr,
    link_hint: bool = False,
) -> CheckResult:
    """Check one expression; raises :class:`TypeCheckError` on rejection."""
    return Checker(program).check(theta, omega, env, e, link_hint)


def check_program(
    program: Program,
    *,
    hash_envs: bool = False,
    forget: Callable[[int, str], bool] | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> CheckReport:
    """Check ``program`` from its main block and require every protocol finished."""
    checker = Checker(program, hash_envs=hash_envs, forget=forget, max_depth=max_depth)
    env0 = initial_env(program)
    checker.trace.append(RuleApp("Main", program.main.span, env_hash(env0) if hash_envs else ""))
    report = CheckReport(ok=False, trace=checker.trace, expansions=checker.expansions)
    try:
        r = checker.check({}, {}, env0, main_body(program))
        if isinstance(r, Pending):
            checker._done(r, program.main_method.body, "the result of main")
    except TypeCheckError as err:
        report.diagnostics = err.diagnostics
        return report
    report.env, report.type = r.env, r.type
    for o in r.env:
        u = r.env.usage(o)
        if not terminated(u):
            b = r.env[o]
            report.diagnostics.append(
                Diagnostic(
                    "UnfinishedProtocol",
                    f"{ref_name(o)} ({b.type.cls}) ends with unfinished usage {_usage_text(u)}",
                    program.main.span,
                    rule="Main",
                    obj=ref_name(o),
                    usage=str(u),
                )
            )
    report.ok = not report.diagnostics and term(r.env)
    return report


def explain(diag: Diagnostic) -> str:
    """Readable multi-line account of a checker diagnostic."""
    lines = [f"{diag.location}: {diag.severity}[{diag.kind}]: {diag.message}"]
    if diag.rule:
        lines.append(f"  rule: {diag.rule}")
    if diag.obj:
        lines.append(f"  object: {diag.obj}")
    if diag.usage:
        lines.append(f"  usage: {diag.usage}")
    lines.extend(f"  note: {n}" for n in diag.notes)
    return "\n".join(lines)
