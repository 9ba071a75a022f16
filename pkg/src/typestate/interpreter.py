"""Small-step execution with a run-time protocol monitor.

A configuration is a heap and a closed expression. :func:`step` finds the
redex through the evaluation contexts and applies one base rule; method
calls and match selections carry a label, everything else is silent. The
monitor replays those labels on each object's usage, so a run of an
ill-typed program stops at the first protocol violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .ast import (
    BoolLit,
    Call,
    Continuation,
    Continue,
    End,
    EnumDecl,
    EnumLit,
    Expr,
    FieldAssign,
    FieldAssignNew,
    FieldDecl,
    FieldRead,
    FloatAdd,
    FloatLit,
    FloatMul,
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
    subst_continue,
    subst_this_param,
)
from .env import (
    BASE_BOOL,
    BASE_BOT,
    BASE_FLOAT,
    BASE_VOID,
    EPS,
    BaseEnum,
    ChoiceLabel,
    EnvLabel,
    Eps,
    MethodLabel,
    Reference,
    TypeEnv,
)
from .usage import LabelAct, MethodAct, available, terminated, usage_step

DEFAULT_FUEL = 1_000_000

REDUCTION_RULES = (
    "ctx", "assign", "seq", "if-true", "if-false", "lab", "match", "call-d", "call-ind", "new", "fld",
)


class RuntimeFault(Exception):
    """A run that cannot continue. ``trace`` holds the steps taken so far."""

    kind = "RuntimeFault"

    def __init__(self, message: str):
        super().__init__(message)
        self.trace: list[StepRecord] = []


class FuelExhausted(RuntimeFault):
    kind = "FuelExhausted"


class StuckConfig(RuntimeFault):
    kind = "StuckConfig"


class NullDereference(RuntimeFault):
    kind = "NullDereference"


class UnknownEnum(RuntimeFault):
    kind = "UnknownEnum"


class MonitorViolation(RuntimeFault):
    kind = "MonitorViolation"

    def __init__(self, ref: int, action: str, usage: Continuation):
        offers = ", ".join(sorted(str(a) for a in available(usage))) or "nothing"
        super().__init__(
            f"protocol violation: {ref_name(ref)} cannot do {action}; its usage {usage} offers {offers}"
        )
        self.ref = ref
        self.action = action
        self.usage = usage


# ---------------------------------------------------------------------------
# Heaps and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeapObject:
    cls: str
    fields: tuple[tuple[str, Expr], ...]

    def field(self, name: str) -> Expr | None:
        for f, v in self.fields:
            if f == name:
                return v
        return None

    def with_field(self, name: str, v: Expr) -> "HeapObject":
        return HeapObject(self.cls, tuple((f, v if f == name else old) for f, old in self.fields))


Heap = Mapping[int, HeapObject]


@dataclass(frozen=True)
class Config:
    heap: Heap
    expr: Expr


@dataclass(frozen=True)
class Allocation:
    """Side event of the (new) rule: ``ref`` was allocated with class ``cls``."""

    ref: int
    cls: str


@dataclass(frozen=True)
class Step:
    label: EnvLabel
    rule: str
    config: Config
    under_context: bool = False
    allocation: Allocation | None = None
    written: tuple[int, str] | None = None


@dataclass(frozen=True)
class StepRecord:
    step: int
    label: EnvLabel
    rule: str
    under_context: bool = False

    def to_json(self) -> dict:
        return {"step": self.step, "label": str(self.label), "rule": self.rule}


def init_vals(fields: tuple[FieldDecl, ...], enums: Mapping[str, EnumDecl], owner: int) -> tuple[tuple[str, Expr], ...]:
    """Initial field values of a fresh object ``owner``."""
    out = []
    for f in fields:
        t = f.type
        if t.kind == "class":
            v: Expr = Null()
        elif t.kind == "bool":
            v = BoolLit(False)
        elif t.kind == "void":
            v = Unit()
        elif t.kind == "float":
            v = FloatLit(0.0)
        else:
            enum = enums.get(t.name)
            if enum is None:
                raise UnknownEnum(f"field {f.name} has undeclared enum type {t.name}")
            v = EnumLit(enum.labels[0], ObjVal(owner))
        out.append((f.name, v))
    return tuple(out)


def initial_config(p: Program) -> Config:
    main = p.main
    heap = {0: HeapObject(main.name, init_vals(main.fields, p.enums, 0))}
    return Config(heap, subst_this_param(p.main_method.body, 0, Unit()))


# ---------------------------------------------------------------------------
# One step
# ---------------------------------------------------------------------------


def _ref(e: Expr, what: str) -> int:
    if isinstance(e, ObjVal):
        return e.ref
    if isinstance(e, Null):
        raise NullDereference(f"{what} on null")
    raise StuckConfig(f"{what}: {render_expr(e)} is not an object reference")


def _object(h: Heap, ref: int) -> HeapObject:
    if ref not in h:
        raise StuckConfig(f"{ref_name(ref)} is not in the heap")
    return h[ref]


def _call(p: Program, h: Heap, ref: int, method: str, arg: Expr) -> Expr:
    obj = _object(h, ref)
    md = p.classes[obj.cls].method(method)
    if md is None:
        raise StuckConfig(f"class {obj.cls} has no method {method}")
    return subst_this_param(md.body, ref, arg)


def _base(p: Program, h: Heap, e: Expr) -> Step | None:
    """Apply a base rule at the root of ``e``, or return None if ``e`` needs
    a step inside an evaluation context first."""
    if isinstance(e, FieldAssign):
        if not is_value(e.value):
            return None
        o = _ref(e.target, f"assignment to field {e.field}")
        obj = _object(h, o)
        if obj.field(e.field) is None:
            raise StuckConfig(f"{obj.cls} has no field {e.field}")
        heap = dict(h)
        heap[o] = obj.with_field(e.field, e.value)
        return Step(EPS, "assign", Config(heap, Unit()), written=(o, e.field))
    if isinstance(e, FieldAssignNew):
        o = _ref(e.target, f"assignment to field {e.field}")
        obj = _object(h, o)
        cls = p.classes.get(e.cls)
        if cls is None or obj.field(e.field) is None:
            raise StuckConfig(f"cannot allocate {e.cls} into {ref_name(o)}.{e.field}")
        fresh = max(h) + 1 if h else 0
        heap = dict(h)
        heap[fresh] = HeapObject(cls.name, init_vals(cls.fields, p.enums, fresh))
        heap[o] = obj.with_field(e.field, ObjVal(fresh))
        return Step(EPS, "new", Config(heap, Unit()), allocation=Allocation(fresh, cls.name), written=(o, e.field))
    if isinstance(e, Seq):
        if not is_value(e.first):
            return None
        return Step(EPS, "seq", Config(h, e.second))
    if isinstance(e, If):
        if not is_value(e.cond):
            return None
        if isinstance(e.cond, BoolLit):
            return Step(EPS, "if-true" if e.cond.value else "if-false", Config(h, e.then if e.cond.value else e.orelse))
        raise StuckConfig(f"if condition {render_expr(e.cond)} is not a boolean")
    if isinstance(e, Match):
        if not is_value(e.scrutinee):
            return None
        s = e.scrutinee
        if not isinstance(s, EnumLit):
            raise StuckConfig(f"match on {render_expr(s)}, which is not an enum value")
        for label, arm in e.arms:
            if label == s.label:
                return Step(ChoiceLabel(s.owner.ref, label), "match", Config(h, arm))
        raise StuckConfig(f"match has no arm for {s.label}")
    if isinstance(e, Labelled):
        return Step(EPS, "lab", Config(h, subst_continue(e.body, e.label, e)))
    if isinstance(e, Call):
        if not is_value(e.arg):
            return None
        r = e.receiver
        if isinstance(r, FieldRead):
            o = _ref(r.target, f"call of {e.method}")
            target = _object(h, o).field(r.field)
            if target is None:
                raise StuckConfig(f"{ref_name(o)} has no field {r.field}")
            if isinstance(target, Null):
                raise NullDereference(f"{ref_name(o)}.{r.field}.{e.method}(...) called while {r.field} is null")
            t = _ref(target, f"call of {e.method}")
            return Step(MethodLabel(t, e.method), "call-ind", Config(h, _call(p, h, t, e.method, e.arg)))
        o = _ref(r, f"call of {e.method}")
        return Step(MethodLabel(o, e.method), "call-d", Config(h, _call(p, h, o, e.method, e.arg)))
    if isinstance(e, FieldRead):
        o = _ref(e.target, f"read of field {e.field}")
        v = _object(h, o).field(e.field)
        if v is None:
            raise StuckConfig(f"{ref_name(o)} has no field {e.field}")
        return Step(EPS, "fld", Config(h, v))
    if isinstance(e, (FloatMul, FloatAdd)):
        if not (is_value(e.left) and is_value(e.right)):
            return None
        if not (isinstance(e.left, FloatLit) and isinstance(e.right, FloatLit)):
            raise StuckConfig(f"arithmetic on non-float values in {render_expr(e)}")
        if isinstance(e, FloatMul):
            return Step(EPS, "float-op", Config(h, FloatLit(e.left.value * e.right.value)))
        return Step(EPS, "float-op", Config(h, FloatLit(e.left.value + e.right.value)))
    if isinstance(e, Continue):
        raise StuckConfig(f"continue {e.label} outside its loop")
    raise StuckConfig(f"no rule applies to {render_expr(e)}")


def _hole(e: Expr) -> tuple[Expr, callable]:
    """Split ``e`` into the sub-expression in evaluation position and a plug."""
    s = e.span
    if isinstance(e, FieldAssign):
        return e.value, lambda x: FieldAssign(e.target, e.field, x, span=s)
    if isinstance(e, Seq):
        return e.first, lambda x: Seq(x, e.second, span=s)
    if isinstance(e, Call):
        return e.arg, lambda x: Call(e.receiver, e.method, x, span=s)
    if isinstance(e, If):
        return e.cond, lambda x: If(x, e.then, e.orelse, span=s)
    if isinstance(e, Match):
        return e.scrutinee, lambda x: Match(x, e.arms, span=s)
    if isinstance(e, (FloatMul, FloatAdd)):
        kind = type(e)
        if not is_value(e.left):
            return e.left, lambda x: kind(x, e.right, span=s)
        return e.right, lambda x: kind(e.left, x, span=s)
    raise StuckConfig(f"no evaluation context in {render_expr(e)}")


def step(p: Program, c: Config) -> Step | None:
    """One reduction of ``c``; None when its expression is a value."""
    if is_value(c.expr):
        return None
    plugs = []
    e = c.expr
    while True:
        s = _base(p, c.heap, e)
        if s is not None:
            break
        inner, plug = _hole(e)
        plugs.append(plug)
        e = inner
    out = s.config.expr
    for plug in reversed(plugs):
        out = plug(out)
    return Step(s.label, s.rule, Config(s.config.heap, out), bool(plugs), s.allocation, s.written)


# ---------------------------------------------------------------------------
# Monitoring
# ---------------------------------------------------------------------------

Monitor = Mapping[int, Continuation]


def monitor_step(m: Monitor, label: EnvLabel, allocation: Allocation | None = None, program: Program | None = None) -> dict[int, Continuation]:
    """Advance the tracked usage of the labelled object.

    An allocation event adds the fresh object with its class's usage (this
    needs ``program``).
    """
    out = dict(m)
    if allocation is not None:
        if program is None:
            raise ValueError("allocation events need the program to look up the class usage")
        out[allocation.ref] = program.classes[allocation.cls].usage
    if isinstance(label, Eps):
        return out
    if isinstance(label, MethodLabel):
        ref, act = label.ref, MethodAct(label.method)
    else:
        ref, act = label.ref, LabelAct(label.label)
    if ref not in out:
        raise MonitorViolation(ref, str(act), End())
    nxt = usage_step(out[ref], act)
    if nxt is None:
        raise MonitorViolation(ref, str(act), out[ref])
    out[ref] = nxt
    return out


def check_completion(m: Monitor) -> bool:
    return all(terminated(u) for u in m.values())


def unfinished(m: Monitor) -> list[int]:
    return [o for o in sorted(m) if not terminated(m[o])]


# ---------------------------------------------------------------------------
# Whole runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    trace: list[StepRecord]
    final: Config
    monitor: dict[int, Continuation]
    completed: bool
    steps: list[Step] = field(default_factory=list, repr=False)

    @property
    def labels(self) -> list[EnvLabel]:
        return [r.label for r in self.trace if not isinstance(r.label, Eps)]


def run(p: Program, fuel: int = DEFAULT_FUEL, monitor: bool = True, keep_steps: bool = False) -> RunResult:
    """Run ``p`` from its main block until it reaches a value.

    Every label goes through the monitor unless ``monitor`` is False.
    Raises :class:`FuelExhausted` after ``fuel`` steps.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    c = initial_config(p)
    mon: dict[int, Continuation] = {0: End()}
    trace: list[StepRecord] = []
    steps: list[Step] = []
    try:
        for n in range(fuel + 1):
            s = step(p, c)
            if s is None:
                return RunResult(trace, c, mon, check_completion(mon), steps)
            if n == fuel:
                raise FuelExhausted(f"no value reached within {fuel} steps")
            if monitor:
                mon = monitor_step(mon, s.label, s.allocation, p)
            elif s.allocation is not None:
                mon[s.allocation.ref] = p.classes[s.allocation.cls].usage
            trace.append(StepRecord(n + 1, s.label, s.rule, s.under_context))
            if keep_steps:
                steps.append(s)
            c = s.config
    except RuntimeFault as err:
        err.trace = trace
        raise
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Heap consistency and rendering
# ---------------------------------------------------------------------------


def _value_fits(z, v: Expr, enums: Mapping[str, EnumDecl] | None) -> bool:
    if isinstance(z, Reference):
        return isinstance(v, ObjVal) and v.ref == z.ref
    if z == BASE_BOT:
        return isinstance(v, Null)
    if z == BASE_BOOL:
        return isinstance(v, BoolLit)
    if z == BASE_VOID:
        return isinstance(v, Unit)
    if z == BASE_FLOAT:
        return isinstance(v, FloatLit)
    if isinstance(z, BaseEnum):
        if not isinstance(v, EnumLit):
            return False
        return enums is None or (z.enum in enums and v.label in enums[z.enum].labels)
    return False


def consistent(env: TypeEnv, h: Heap, enums: Mapping[str, EnumDecl] | None = None) -> bool:
    """Do ``env`` and ``h`` hold the same objects with matching fields?"""
    if set(env) != set(h):
        return False
    for o in env:
        b, obj = env[o], h[o]
        if b.type.cls != obj.cls:
            return False
        if [f for f, _ in b.fields] != [f for f, _ in obj.fields]:
            return False
        for (_, z), (_, v) in zip(b.fields, obj.fields):
            if not _value_fits(z, v, enums):
                return False
    return True


def render_value(v: Expr) -> str:
    if isinstance(v, EnumLit):
        return v.label
    return render_expr(v)


def render_heap(h: Heap) -> str:
    lines = []
    for o in sorted(h):
        obj = h[o]
        fields = ", ".join(f"{f} ↦ {render_value(v)}" for f, v in obj.fields)
        lines.append(f"{ref_name(o)} ↦ ({obj.cls}, {{{fields}}})")
    return "\n".join(lines)
