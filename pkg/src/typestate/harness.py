"""Executable versions of the soundness results, for corpus programs.

Each harness runs a checked program and compares every run-time step with
the typing environments: the subject-reduction harness replays the step on
the environment and re-checks what is left of the program, the progress
harness requires the run to reach a value, and the conformance harness
requires the monitor to accept every label and find all protocols finished.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import BoolLit, EnumLit, Expr, FloatLit, Null, ObjVal, Program, Unit
from .checker import Checker, Done, TypeCheckError, check_program, initial_env
from .env import (
    BASE_BOOL,
    BASE_BOT,
    BASE_FLOAT,
    BASE_VOID,
    BaseEnum,
    ChoiceLabel,
    MethodLabel,
    Reference,
    TypeEnv,
    env_equal,
    env_step_check,
    new_binding,
    render_env,
    types_equal,
)
from .interpreter import (
    DEFAULT_FUEL,
    MonitorViolation,
    NullDereference,
    RuntimeFault,
    Step,
    StuckConfig,
    check_completion,
    consistent,
    initial_config,
    run,
    unfinished,
)
from .usage import LabelAct, MethodAct, usage_step


@dataclass
class HarnessReport:
    name: str
    steps: int = 0
    failures: list[str] = field(default_factory=list)
    rules: set[str] = field(default_factory=set)

    @property
    def ok(self) -> bool:
        return not self.failures


def _tag(v: Expr, program: Program):
    if isinstance(v, ObjVal):
        return Reference(v.ref)
    if isinstance(v, Null):
        return BASE_BOT
    if isinstance(v, BoolLit):
        return BASE_BOOL
    if isinstance(v, Unit):
        return BASE_VOID
    if isinstance(v, FloatLit):
        return BASE_FLOAT
    if isinstance(v, EnumLit):
        return BaseEnum(program.label_enum[v.label])
    raise ValueError(f"not a value: {v!r}")


def replay(env: TypeEnv, s: Step, program: Program) -> TypeEnv:
    """The environment transition matching run-time step ``s``."""
    label = s.label
    if isinstance(label, (MethodLabel, ChoiceLabel)):
        act = MethodAct(label.method) if isinstance(label, MethodLabel) else LabelAct(label.label)
        nxt = usage_step(env.usage(label.ref), act)
        if nxt is None:
            raise ValueError(f"{label} has no usage transition in the environment")
        return env.with_usage(label.ref, nxt)
    if s.allocation is not None:
        o, f = s.written
        fresh = s.allocation.ref
        return env.set(fresh, new_binding(fresh, program.classes[s.allocation.cls])).with_field(
            o, f, Reference(fresh)
        )
    if s.written is not None:
        o, f = s.written
        return env.with_field(o, f, _tag(s.config.heap[o].field(f), program))
    return env


def subject_reduction(program: Program, name: str = "<program>", fuel: int = DEFAULT_FUEL) -> HarnessReport:
    """Replay every step on the typing environment and re-check the residue.

    At each step the replayed transition must be one environment transition
    for the step's label, the heap must stay consistent with the
    environment, and the remaining expression must still check from the new
    environment with empty snapshot maps, reaching the original result.
    """
    report = HarnessReport(name)
    checked = check_program(program)
    if not checked.ok:
        report.failures.append(f"program does not type-check: {checked.diagnostics[0].message}")
        return report
    final_type, final_env = checked.type, checked.env
    try:
        result = run(program, fuel=fuel, keep_steps=True)
    except RuntimeFault as err:
        report.failures.append(f"{err.kind}: {err}")
        return report

    env = initial_env(program)
    if not consistent(env, initial_config(program).heap, program.enums):
        report.failures.append("initial heap is not consistent with the initial environment")
    for i, s in enumerate(result.steps, start=1):
        report.rules.add(s.rule)
        if s.under_context:
            report.rules.add("ctx")
        try:
            env2 = replay(env, s, program)
        except ValueError as err:
            report.failures.append(f"step {i}: {err}")
            break
        if not env_step_check(env, s.label, env2, program.classes):
            report.failures.append(f"step {i} ({s.rule}, {s.label}): no environment transition matches")
        if not consistent(env2, s.config.heap, program.enums):
            report.failures.append(f"step {i} ({s.rule}): heap inconsistent with {render_env(env2)}")
        try:
            r = Checker(program).check({}, {}, env2, s.config.expr)
        except TypeCheckError as err:
            report.failures.append(f"step {i} ({s.rule}): residual rejected: {err.diagnostic.message}")
        else:
            if not isinstance(r, Done):
                report.failures.append(f"step {i} ({s.rule}): residual is pending")
            elif not types_equal(r.type, final_type) or not env_equal(r.env, final_env):
                report.failures.append(
                    f"step {i} ({s.rule}): residual ends in {r.type} / {render_env(r.env)}, "
                    f"expected {final_type} / {render_env(final_env)}"
                )
        env = env2
        report.steps = i
    return report


def progress(program: Program, name: str = "<program>", fuel: int = DEFAULT_FUEL) -> HarnessReport:
    """A well-typed program runs to a value without getting stuck."""
    report = HarnessReport(name)
    try:
        result = run(program, fuel=fuel, monitor=False)
    except (StuckConfig, NullDereference) as err:
        report.failures.append(f"{err.kind}: {err}")
        return report
    except RuntimeFault as err:
        report.failures.append(f"{err.kind}: {err}")
        return report
    report.steps = len(result.trace)
    return report


def conformance(program: Program, name: str = "<program>", fuel: int = DEFAULT_FUEL) -> HarnessReport:
    """The monitor accepts every label and all protocols finish."""
    report = HarnessReport(name)
    try:
        result = run(program, fuel=fuel, monitor=True)
    except MonitorViolation as err:
        report.failures.append(str(err))
        return report
    except RuntimeFault as err:
        report.failures.append(f"{err.kind}: {err}")
        return report
    report.steps = len(result.trace)
    if not check_completion(result.monitor):
        left = ", ".join(f"o{o}" for o in unfinished(result.monitor))
        report.failures.append(f"protocols not finished at the end of the run: {left}")
    return report
