import pytest

from typestate.ast import End, Unit
from typestate.checker import (
    TYPING_RULES,
    Checker,
    Done,
    TypeCheckError,
    check_expr,
    check_program,
    explain,
    initial_env,
    main_body,
)
from typestate.env import VOID_T, render_env_lines, term
from typestate.frontend import compile_source, load_program
from typestate.parser import parse_usage

from conftest import CORPUS, accepted_corpus, corpus_files


def _first(report):
    assert not report.ok
    return report.diagnostics[0]


def test_bank_program_is_accepted(bank):
    report = check_program(bank)
    assert report.ok and term(report.env)
    assert [report.env[o].type.cls for o in report.env] == ["Main", "BankAccount", "SalaryManager", "DataStorage"]


def test_swapped_bank_program_is_rejected(bank_swapped):
    d = _first(check_program(bank_swapped))
    assert d.kind == "MethodNotAvailable" and d.obj == "o1"
    text = explain(d)
    assert "getMoney" in text and "setMoney" in text
    assert d.usage == "{setMoney; {applyInterest; {getMoney; end}}}"
    assert d.usage in text


def test_trivial_main():
    report = check_program(compile_source("main { unit }"))
    assert report.ok
    assert render_env_lines(report.env) == "o_main ↦ (Main[end], {})"
    assert report.type == VOID_T


def test_unit_leaves_the_environment_alone(bank):
    g0 = initial_env(bank)
    assert check_expr(bank, {}, {}, g0, Unit()) == Done(VOID_T, g0)


def _prefix(upto: str):
    src = (CORPUS / "bankaccount.pap").read_text()
    return compile_source(src[: src.index(upto)] + "}\n", "prefix.pap")


def test_environment_after_the_set_account_calls():
    report = check_program(_prefix("manager.addSalary"), forget=None)
    assert render_env_lines(report.env).splitlines() == [
        "o_main ↦ (Main[end], {account ↦ o1, manager ↦ o2, db ↦ o3})",
        "o1 ↦ (BankAccount[{setMoney; {applyInterest; {getMoney; end}}}], {amount ↦ float})",
        "o2 ↦ (SalaryManager[{addSalary; end}], {account ↦ o1})",
        "o3 ↦ (DataStorage[{store; end}], {account ↦ o1})",
    ]


def test_add_salary_updates_account_and_manager():
    before = check_program(_prefix("manager.addSalary")).env
    after = check_program(_prefix("db.store")).env
    assert after.usage(1) == parse_usage("{getMoney; end}")
    # the manager's protocol is finished after addSalary
    assert after.usage(2) == End()
    assert after.usage(3) == before.usage(3)


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.name)
def test_checking_is_deterministic(path):
    try:
        program = load_program(path)
    except Exception:
        return
    a = check_program(program, hash_envs=True)
    b = check_program(program, hash_envs=True)
    assert [str(r) for r in a.trace] == [str(r) for r in b.trace]
    assert a.env == b.env and a.diagnostics == b.diagnostics


@pytest.mark.parametrize("name", ["guarded_recursion", "mutual_recursion", "iterator", "nested_loops"])
def test_bounded_expansions(name):
    report = check_program(load_program(CORPUS / f"{name}.pap"))
    assert report.ok
    assert max(report.expansions.values()) <= 2


@pytest.mark.parametrize("name", ["guarded_recursion", "mutual_recursion"])
def test_forgetting_a_snapshot_gives_the_same_result(name):
    program = load_program(CORPUS / f"{name}.pap")
    plain = check_program(program)
    dropped = []

    def forget_once(ref, method):
        if dropped:
            return False
        dropped.append((ref, method))
        return True

    again = check_program(program, forget=forget_once)
    assert dropped, "no recursive call met its snapshot"
    assert again.ok and plain.ok
    assert again.type == plain.type and again.env == plain.env
    assert sum(again.expansions.values()) > sum(plain.expansions.values())


def test_recursion_that_never_returns():
    src = """
    enum Coin { heads, tails }
    class Loop[rec X.{run; {flip; <heads: X, tails: X>}}] {
        fun flip(): Coin { #heads }
        fun run() { match (this.flip()) { heads: this.run(), tails: this.run() } }
    }
    main { val l: Loop l = new Loop; l.run() }
    """
    assert _first(check_program(compile_source(src))).kind == "RecursionNeverReturns"


def test_nonexhaustive_match_names_the_missing_label():
    d = _first(check_program(load_program(CORPUS / "nonexhaustive.pap")))
    assert d.kind == "NonExhaustiveMatch"
    assert "ff" in explain(d)


def test_unfinished_protocol_names_the_object():
    d = _first(check_program(load_program(CORPUS / "unfinished.pap")))
    assert d.kind == "UnfinishedProtocol"
    text = explain(d)
    assert "o1" in text and "{getMoney; end}" in text


def test_diagnostic_inside_a_method_notes_the_call_site():
    src = """
    class A[{go; end}] { val b: B fun go() { this.b.twice() } }
    class B[{twice; end}] { fun twice() {} }
    main { val a: A a = new A; a.go() }
    """
    d = _first(check_program(compile_source(src, "n.pap")))
    assert d.kind == "NullReceiver"
    assert any("called at n.pap" in n for n in d.notes)


class _Recording(Checker):
    """Checker that records the domains of every successful sub-derivation."""

    def __init__(self, program):
        super().__init__(program)
        self.pairs = []

    def check(self, theta, omega, env, e, link=False):
        r = super().check(theta, omega, env, e, link)
        if isinstance(r, Done):
            self.pairs.append((set(env), set(r.env)))
        return r


@pytest.mark.parametrize("path", accepted_corpus(), ids=lambda p: p.name)
def test_allocation_is_monotone(path):
    program = load_program(path)
    c = _Recording(program)
    c.check({}, {}, initial_env(program), main_body(program))
    assert c.pairs
    for before, after in c.pairs:
        assert before <= after


def test_rule_names_are_the_nineteen_rules():
    assert len(TYPING_RULES) == 19 and len(set(TYPING_RULES)) == 19


def test_check_expr_raises_on_rejection(bank_swapped):
    with pytest.raises(TypeCheckError):
        check_expr(bank_swapped, {}, {}, initial_env(bank_swapped), main_body(bank_swapped))
