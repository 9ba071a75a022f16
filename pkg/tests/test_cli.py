import io
import json
import shutil

import pytest

from typestate.cli import main

from conftest import CORPUS, corpus_files


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(autouse=True)
def no_color(monkeypatch):
    monkeypatch.setenv("PAPAYA_COLOR", "0")


def test_check_accepts_the_bank_program():
    assert cli("check", str(CORPUS / "bankaccount.pap"))[0] == 0


def test_check_rejects_the_swapped_program():
    code, _, err = cli("check", str(CORPUS / "bankaccount_swapped.pap"))
    assert code == 1 and "getMoney" in err


def test_check_missing_file():
    code, _, err = cli("check", "missing.pap")
    assert code == 2 and err.startswith("missing.pap: error: cannot read file")


def test_parse_error_exits_2(tmp_path):
    bad = tmp_path / "bad.pap"
    bad.write_text("class C[{m; ] {}")
    code, _, err = cli("check", str(bad))
    assert code == 2 and f"{bad}:1:13" in err


def test_bad_arguments_exit_2():
    assert cli("frobnicate")[0] == 2
    assert cli("run", str(CORPUS / "bankaccount.pap"), "--fuel", "0")[0] == 2


def test_print_env():
    code, out, _ = cli("check", str(CORPUS / "bankaccount.pap"), "--print-env")
    assert code == 0
    assert out.splitlines()[0] == "o_main ↦ (Main[end], {account ↦ o1, manager ↦ o2, db ↦ o3})"
    assert "o1 ↦ (BankAccount[end], {amount ↦ float})" in out


def test_trace_rules_lines():
    code, out, _ = cli("check", str(CORPUS / "bankaccount.pap"), "--trace-rules")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("RULE Main ")
    assert all(l.startswith("RULE ") and len(l.split()) == 4 for l in lines)


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.name)
def test_json_output_is_valid(path):
    code, out, _ = cli("check", str(path), "--json")
    doc = json.loads(out)
    assert doc["ok"] == (code == 0)
    for d in doc["diagnostics"]:
        assert {"severity", "rule", "span", "message"} <= set(d)
        assert set(d["span"]) == {"file", "line", "col"}


def test_explain_adds_object_and_usage():
    _, _, err = cli("check", str(CORPUS / "bankaccount_swapped.pap"), "--explain")
    assert "object: o1" in err and "usage: {setMoney;" in err


def test_color_follows_the_environment(monkeypatch):
    path = str(CORPUS / "bankaccount_swapped.pap")
    assert "\x1b[" not in cli("check", path)[2]
    monkeypatch.setenv("PAPAYA_COLOR", "1")
    assert "\x1b[31m" in cli("check", path)[2]


def test_run_dumps_the_heap():
    code, out, _ = cli("run", str(CORPUS / "bankaccount.pap"), "--dump-heap")
    assert code == 0 and "o1 ↦ (BankAccount, {amount ↦ 105.0})" in out


def test_run_trace_records():
    code, out, _ = cli("run", str(CORPUS / "bankaccount.pap"), "--trace")
    recs = [json.loads(l) for l in out.splitlines()]
    assert code == 0
    assert [r["step"] for r in recs] == list(range(1, len(recs) + 1))
    assert {"label": "o2.addSalary", "rule": "call-ind"}.items() <= next(r for r in recs if r["label"] == "o2.addSalary").items()
    assert all(set(r) == {"step", "label", "rule"} for r in recs)
    assert any(r["label"] == "eps" for r in recs)


def test_trace_is_byte_stable():
    args = ("run", str(CORPUS / "iterator.pap"), "--trace")
    assert cli(*args) == cli(*args)


def test_run_rejects_ill_typed_programs_unless_monitor_only():
    path = str(CORPUS / "bankaccount_swapped.pap")
    code, _, err = cli("run", path)
    assert code == 1 and "getMoney" in err
    code, _, err = cli("run", path, "--monitor-only")
    assert code == 1 and err.startswith("MonitorViolation") and "getMoney" in err


def test_run_out_of_fuel():
    code, _, err = cli("run", str(CORPUS / "diverging" / "loop_forever.pap"), "--fuel", "100")
    assert code == 1 and "FuelExhausted" in err


def test_run_reports_unfinished_protocols_in_monitor_only_mode():
    code, _, err = cli("run", str(CORPUS / "unfinished.pap"), "--monitor-only")
    assert code == 1 and "UnfinishedProtocol" in err and "o1" in err


def test_corpus_passes():
    code, out, _ = cli("corpus", str(CORPUS))
    assert code == 0
    assert out.splitlines()[-1] == f"{len(corpus_files())} passed, 0 failed"


def test_corpus_with_the_two_bank_variants(tmp_path):
    for name in ("bankaccount", "bankaccount_swapped"):
        for ext in (".pap", ".expect"):
            shutil.copy(CORPUS / (name + ext), tmp_path)
    shutil.copy(CORPUS / "bankaccount.trace", tmp_path)
    code, out, _ = cli("corpus", str(tmp_path))
    assert code == 0 and out.count("PASS") == 2


def test_corpus_mismatch_fails(tmp_path):
    shutil.copy(CORPUS / "bankaccount.pap", tmp_path)
    (tmp_path / "bankaccount.expect").write_text("reject: MethodNotAvailable\n")
    code, out, _ = cli("corpus", str(tmp_path))
    assert code == 1 and "FAIL" in out and "got accept" in out


def test_empty_corpus(tmp_path):
    code, out, _ = cli("corpus", str(tmp_path))
    assert code == 0 and out.strip() == "0 passed, 0 failed"


def test_corpus_exit_codes_match_check():
    for path in corpus_files():
        expect = path.with_suffix(".expect").read_text().strip()
        code = cli("check", str(path))[0]
        assert code == (1 if expect.startswith("reject") else 0), path.name
