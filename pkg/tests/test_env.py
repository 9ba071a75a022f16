import itertools

import pytest
from hypothesis import given, settings, strategies as st

from typestate.ast import FLOAT, VOID, BOOL, End, FieldDecl, class_type, enum_type
from typestate.checker import check_program
from typestate.env import (
    BASE_BOOL,
    BASE_BOT,
    BASE_FLOAT,
    BASE_VOID,
    BOOL_T,
    BOT_T,
    EPS,
    FLOAT_T,
    VOID_T,
    Binding,
    EnumLink,
    EnumType,
    LinkNotStorable,
    MethodLabel,
    ObjectType,
    Reference,
    TypeEnv,
    agree,
    env_equal,
    env_step_check,
    get_type,
    init_types,
    returns,
    term,
    vtype,
)
from typestate.frontend import compile_source
from typestate.parser import parse_usage
from typestate.usage import unfold
from typestate.ast import Rec
from typestate.checker import initial_env
from typestate.harness import replay
from typestate.interpreter import run

from conftest import CORPUS, accepted_corpus
from typestate.frontend import load_program

ACC = class_type("BankAccount")


def _env(*bindings):
    return TypeEnv({b.type.ref: b for b in bindings})


def _obj(ref, cls, usage, **fields):
    return Binding(ObjectType(ref, cls, parse_usage(usage) if isinstance(usage, str) else usage), tuple(fields.items()))


def example_env(bank):
    """The environment after the two setAccount calls of the bank program."""
    src = (CORPUS / "bankaccount.pap").read_text()
    prefix = src[: src.index("manager.addSalary")] + "}\n"
    report = check_program(compile_source(prefix, "prefix.pap"))
    assert report.env is not None
    return report.env


def test_init_types_examples():
    assert init_types([FieldDecl("account", ACC)]) == (("account", BASE_BOT),)
    assert init_types([]) == ()
    assert init_types([FieldDecl("amount", FLOAT)]) == (("amount", BASE_FLOAT),)


def test_agree_examples():
    assert agree(ACC, BOT_T)
    assert agree(ACC, ObjectType(1, "BankAccount", End()))
    assert not agree(ACC, ObjectType(1, "DataStorage", End()))


def test_returns_examples():
    L = enum_type("L")
    assert returns(L, EnumLink("L", 1))
    assert returns(BOOL, BOOL_T)
    assert not returns(L, BOOL_T)


def test_get_type_examples():
    env = _env(_obj(1, "BankAccount", "{getMoney; end}", amount=BASE_FLOAT))
    assert get_type(Reference(1), env) == env[1].type
    assert get_type(BASE_BOOL, env) == BOOL_T
    assert get_type(BASE_BOT, TypeEnv()) == BOT_T


def test_vtype_examples():
    assert vtype(ObjectType(3, "C", End())) == Reference(3)
    assert vtype(VOID_T) == BASE_VOID
    with pytest.raises(LinkNotStorable):
        vtype(EnumLink("L", 1))


def test_term_examples():
    assert term(TypeEnv())
    assert term(_env(_obj(1, "C", "end")))
    assert not term(_env(_obj(1, "C", "{m; end}")))


def test_env_equal_examples():
    g = _env(_obj(1, "C", "rec X.{m; X}", f=Reference(2)), _obj(2, "D", "end"))
    assert env_equal(g, g)
    unfolded = g.with_usage(1, unfold(g.usage(1)))
    assert unfolded != g and env_equal(g, unfolded)
    assert not env_equal(g, g.with_field(1, "f", BASE_BOT))


def test_example_environment_shape(bank):
    g = example_env(bank)
    assert g.usage(0) == End()
    assert g[1].type.cls == "BankAccount" and g.usage(1) == parse_usage("{setMoney; {applyInterest; {getMoney; end}}}")
    assert g[2].type.cls == "SalaryManager" and g.usage(2) == parse_usage("{addSalary; end}")
    assert g[3].type.cls == "DataStorage" and g.usage(3) == parse_usage("{store; end}")
    assert g[2].field("account") == g[3].field("account") == Reference(1)
    assert g[0].fields == (("account", Reference(1)), ("manager", Reference(2)), ("db", Reference(3)))


def test_env_step_check_examples(bank):
    g = example_env(bank)
    after = g.with_usage(2, End())
    assert env_step_check(g, MethodLabel(2, "addSalary"), after, bank.classes)
    assert env_step_check(g, EPS, g)
    both = after.with_usage(3, End())
    assert not env_step_check(g, MethodLabel(2, "addSalary"), both)


# -- properties -------------------------------------------------------------------

_VALUE_TYPES = [VOID_T, BOOL_T, FLOAT_T, BOT_T, EnumType("L"), EnumLink("L", 1), EnumType("M"),
                ObjectType(1, "C", End()), ObjectType(2, "D", End())]
_ANNOTS = [VOID, BOOL, FLOAT, enum_type("L"), enum_type("M"), class_type("C"), class_type("D")]


def test_agree_implies_returns():
    for t, T in itertools.product(_ANNOTS, _VALUE_TYPES):
        if agree(t, T):
            assert returns(t, T), (t, T)


def _corpus_envs():
    """Final environments plus every environment replayed along each run,
    each also with its recursive usages unfolded once."""
    envs = []
    for path in accepted_corpus():
        program = load_program(path)
        envs.append(check_program(program).env)
        g = initial_env(program)
        for s in run(program, keep_steps=True).steps:
            g = replay(g, s, program)
            envs.append(g)
    for g in list(envs):
        for o in g:
            if isinstance(g.usage(o), Rec):
                envs.append(g.with_usage(o, unfold(g.usage(o))))
    return envs


CORPUS_ENVS = _corpus_envs()


def test_vtype_inverts_get_type_on_corpus_environments():
    for g in CORPUS_ENVS:
        for o in g:
            for _, z in g[o].fields:
                assert vtype(get_type(z, g)) == z


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(CORPUS_ENVS), st.sampled_from(CORPUS_ENVS), st.sampled_from(CORPUS_ENVS))
def test_env_equal_is_an_equivalence(a, b, c):
    assert env_equal(a, a)
    assert env_equal(a, b) == env_equal(b, a)
    if env_equal(a, b) and env_equal(b, c):
        assert env_equal(a, c)


def test_empty_step_is_always_allowed():
    for g in CORPUS_ENVS:
        assert env_step_check(g, EPS, g)


def test_env_equal_agrees_with_itself_pairwise_on_a_run():
    # every pair of environments along one run: symmetric, and transitive via a third
    envs = CORPUS_ENVS[:60]
    eq = {(i, j): env_equal(a, b) for i, a in enumerate(envs) for j, b in enumerate(envs)}
    for (i, j), v in eq.items():
        assert v == eq[(j, i)]
        if v:
            assert all(eq[(i, k)] == eq[(j, k)] for k in range(len(envs)))
