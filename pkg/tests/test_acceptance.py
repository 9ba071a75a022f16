"""Acceptance suite: one test per primary criterion.

Each test prints a single ``PASS``/``FAIL`` line naming its criterion; run
with ``pytest tests/test_acceptance.py -s`` to see them.
"""

import time
from contextlib import contextmanager

import pytest

from typestate.checker import TYPING_RULES, check_program
from typestate.env import render_env_lines, term
from typestate.frontend import load_program
from typestate.harness import conformance, progress, subject_reduction
from typestate.interpreter import REDUCTION_RULES, check_completion, run
from typestate.parser import parse_usage
from typestate.usage import available, bisimilar, unfold, usage_step

import oracles
from conftest import CORPUS, accepted_corpus, corpus_files
from test_usage import ALL_ACTIONS, USAGES, _act


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nFAIL  {name}")
        raise
    print(f"\nPASS  {name}")


def test_bank_account_acceptance():
    with criterion("BankAccount acceptance"):
        start = time.perf_counter()
        report = check_program(load_program(CORPUS / "bankaccount.pap"))
        elapsed = time.perf_counter() - start
        assert report.ok and term(report.env)
        g = report.env
        assert [g[o].type.cls for o in g] == ["Main", "BankAccount", "SalaryManager", "DataStorage"]
        assert render_env_lines(g).splitlines() == [
            "o_main ↦ (Main[end], {account ↦ o1, manager ↦ o2, db ↦ o3})",
            "o1 ↦ (BankAccount[end], {amount ↦ float})",
            "o2 ↦ (SalaryManager[end], {account ↦ o1})",
            "o3 ↦ (DataStorage[end], {account ↦ o1})",
        ]
        assert elapsed < 1.0, f"checking took {elapsed:.3f}s"


def test_bank_account_rejection():
    with criterion("BankAccount rejection"):
        report = check_program(load_program(CORPUS / "bankaccount_swapped.pap"))
        assert not report.ok
        d = report.diagnostics[0]
        assert d.kind == "MethodNotAvailable" and d.obj == "o1" and "getMoney" in d.message
        assert parse_usage(d.usage) == load_program(CORPUS / "bankaccount.pap").classes["BankAccount"].usage


def test_execution_oracle():
    with criterion("Execution oracle"):
        result = run(load_program(CORPUS / "bankaccount.pap"))
        labels = [str(l) for l in result.labels]
        assert labels == ["o2.setAccount", "o3.setAccount", "o2.addSalary", "o1.setMoney",
                          "o1.applyInterest", "o3.store", "o1.getMoney"]
        assert labels[-5:] == ["o2.addSalary", "o1.setMoney", "o1.applyInterest", "o3.store", "o1.getMoney"]
        assert result.final.heap[1].field("amount").value == pytest.approx(105.0, abs=1e-6)
        assert result.completed and check_completion(result.monitor)


def test_subject_reduction_harness():
    with criterion("Subject-reduction harness"):
        programs = accepted_corpus()
        assert len(programs) >= 10
        start = time.perf_counter()
        failures = []
        for path in programs:
            report = subject_reduction(load_program(path), path.name)
            failures += [f"{path.name}: {f}" for f in report.failures]
        elapsed = time.perf_counter() - start
        assert not failures, failures
        assert elapsed < 30.0, f"harness took {elapsed:.1f}s"


def test_progress_harness():
    with criterion("Progress harness"):
        failures = []
        for path in accepted_corpus():
            failures += progress(load_program(path), path.name).failures
        assert not failures, failures


def test_conformance_and_completion():
    with criterion("Conformance and completion"):
        failures = []
        for path in accepted_corpus():
            failures += conformance(load_program(path), path.name).failures
        assert not failures, failures


def test_usage_lts_oracle():
    with criterion("Usage-LTS oracle"):
        assert len(USAGES) >= 1000
        for u in USAGES:
            enabled = set()
            for kind, name in ALL_ACTIONS:
                ref = oracles.step(u, kind, name)
                assert usage_step(u, _act(kind, name)) == ref
                if ref is not None:
                    enabled.add(_act(kind, name))
            assert available(u) == enabled
            assert bisimilar(u, u)
            if hasattr(u, "var"):
                assert bisimilar(u, unfold(u)) and bisimilar(unfold(u), u)
        classes = {}
        for u in USAGES:
            classes.setdefault(oracles.canonical(u), []).append(u)
        for members in classes.values():
            assert all(bisimilar(members[0], u) for u in members)


def test_recursion_machinery():
    with criterion("Recursion machinery"):
        program = load_program(CORPUS / "guarded_recursion.pap")
        plain = check_program(program)
        assert plain.ok
        assert max(plain.expansions.values()) <= 2
        hits = []

        def forget_once(ref, method):
            hits.append((ref, method))
            return len(hits) == 1

        again = check_program(program, forget=forget_once)
        assert hits and again.ok
        assert (again.type, again.env) == (plain.type, plain.env)


def test_rule_coverage():
    with criterion("Rule coverage"):
        typing, reduction = set(), set()
        for path in corpus_files():
            try:
                program = load_program(path)
            except Exception:
                continue
            report = check_program(program)
            typing |= report.rules_used
            if report.ok:
                for s in run(program, keep_steps=True).steps:
                    reduction.add(s.rule)
                    if s.under_context:
                        reduction.add("ctx")
        assert set(TYPING_RULES) <= typing, set(TYPING_RULES) - typing
        assert set(REDUCTION_RULES) <= reduction, set(REDUCTION_RULES) - reduction
