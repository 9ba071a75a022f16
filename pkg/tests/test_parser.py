import pytest
from hypothesis import given, settings, strategies as st

from typestate.ast import Branch, End, Rec, UVar
from typestate.parser import ParseError, parse, parse_expr, parse_usage
from typestate.surface import SurfaceClass, SurfaceMethod, pretty_print

from conftest import CORPUS, corpus_files


def test_bank_program_has_three_classes_and_main():
    p = parse((CORPUS / "bankaccount.pap").read_text(), "bankaccount.pap")
    names = [d.name for d in p.decls if isinstance(d, SurfaceClass)]
    assert names == ["BankAccount", "SalaryManager", "DataStorage"]
    assert [f.name for f in p.main.fields] == ["account", "manager", "db"]


def test_minimal_class():
    p = parse("class C[end] {} main { unit }")
    (c,) = p.decls
    assert c.name == "C" and c.usage == End() and c.members == ()


def test_unbalanced_usage_reports_the_bracket():
    src = "class C[{m; ] {}"
    with pytest.raises(ParseError) as info:
        parse(src)
    d = info.value.diagnostics[0]
    assert d.kind == "SyntaxError"
    assert src[d.span.start] == "]"
    assert (d.span.line, d.span.column) == (1, src.index("]") + 1)


def test_parse_usage_examples():
    assert parse_usage("{setMoney; {applyInterest; {getMoney; end}}}") == Branch(
        (("setMoney", Branch((("applyInterest", Branch((("getMoney", End()),))),))),)
    )
    assert parse_usage("end") == End()
    assert parse_usage("rec X. {m; X}") == Rec("X", Branch((("m", UVar("X")),)))


def test_method_without_return_type_or_parameter():
    p = parse("class C[end] { fun applyInterest(rate: float) { unit } } main { unit }")
    m = p.decls[0].members[0]
    assert isinstance(m, SurfaceMethod)
    assert m.param == ("rate", "float") and m.ret is None


def test_spans_are_line_and_column():
    src = "class C[end] {}\nmain {\n  unit\n}"
    p = parse(src, "f.pap")
    assert p.main.span.file == "f.pap"
    assert p.main.span.line == 2 and p.main.span.column == 1


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.name)
def test_pretty_print_round_trip(path):
    once = pretty_print(parse(path.read_text(), path.name))
    twice = pretty_print(parse(once, path.name))
    assert once == twice
    assert parse(once) == parse(path.read_text())


@pytest.mark.parametrize("src", ["1.5 * 2.0 + 0.25", "if (true) { unit } else { null }", "this.f.m(#tt)"])
def test_parse_expr_accepts_expressions(src):
    parse_expr(src)


# -- properties -------------------------------------------------------------------

_fragments = st.sampled_from(
    ["class", "C", "[", "]", "{", "}", "(", ")", ";", ":", ",", ".", "<", ">", "end", "rec", "X",
     "main", "fun", "val", "m", "unit", "if", "else", "match", "label", "continue", "#tt", "=", "new",
     "1.0", "*", "+", "\n", " ", "@", "true"]
)


@settings(max_examples=300, deadline=None)
@given(st.lists(_fragments, max_size=30).map(" ".join))
def test_parse_errors_point_inside_the_input(src):
    try:
        parse(src)
    except ParseError as err:
        for d in err.diagnostics:
            assert 0 <= d.span.start <= len(src)
            assert d.span.end <= len(src)
            assert d.span.line >= 1 and d.span.column >= 1
            assert d.span.line <= src.count("\n") + 1
