import glob
import os

import pytest
from hypothesis import given, settings, strategies as st

from tmev.gen import generate_corpus
from tmev.lang import (Binary, Bool, Index, LangSyntaxError, Name, Num, Sender, Unary,
                       ValidationError, format_expr, parse, parse_contract, parse_expr,
                       pretty_print)

from conftest import CORPUS


def test_guarded_shape(guarded_source):
    c = parse_contract(guarded_source)
    assert c.name == "TokenTY"
    assert [v.name for v in c.state_vars] == ["balance", "ts", "pause", "t1"]
    assert [f.name for f in c.functions] == ["balanceOf", "rebase1", "rebase2", "pauseTransfer"]
    assert c.state_var("balance").kind == "mapping"
    assert c.state_var("ts").initializer == 1000
    assert c.function("balanceOf").returns == "int"
    assert list(c.function("rebase2").param_names) == ["t2"]


def test_empty_contract():
    unit = parse("contract E {}")
    assert len(unit.contracts) == 1
    c = unit.contracts[0]
    assert c.state_vars == () or list(c.state_vars) == []
    assert list(c.functions) == []
    assert pretty_print(unit) == "contract E {\n}\n"


def test_return_in_non_returning_function_is_rejected():
    with pytest.raises(ValidationError):
        parse("contract X { f(){ return } }")


@pytest.mark.parametrize("src", [
    "contract A { uint x; uint x; }",
    "contract A { f() { } f() { } }",
    "contract A { f() { y = 1; } }",
    "contract A { mapping(address => uint) m; f() { m = 1; } }",
    "contract A { uint x; f(uint x) { } }",
    "contract A { balanceOf(address a) returns (uint) { if (1 > 0) { return 1; } } }",
    "contract A {} contract A {}",
])
def test_validation_errors(src):
    with pytest.raises(ValidationError):
        parse(src)


def test_syntax_error_position():
    with pytest.raises(LangSyntaxError) as info:
        parse("contract A {\n  uint x = ;\n}")
    assert (info.value.line, info.value.col) == (2, 12)


def test_unexpected_character():
    with pytest.raises(LangSyntaxError) as info:
        parse("contract A { $ }")
    assert info.value.col == 14


def test_exponent_literal():
    c = parse_contract("contract A { uint one = 1e18; }")
    assert c.state_var("one").initializer == 10 ** 18


def test_mapping_printed():
    text = pretty_print(parse("contract M { mapping(address => uint) bal; }"))
    assert "mapping(address => uint)" in text


def test_semicolon_optional_before_brace():
    c = parse_contract("contract A { uint x; f() { x = 1 } }")
    assert len(c.function("f").body) == 1


def test_msg_sender_and_owner_only():
    c = parse_contract("""contract A { mapping(address => uint) b;
        @owner_only mint(uint v) { b[msg.sender] += v; } }""")
    f = c.function("mint")
    assert f.owner_only
    assert isinstance(f.body[0].target.key, Sender)


def _all_sources():
    for path in sorted(glob.glob(os.path.join(CORPUS, "*.tok"))):
        with open(path, encoding="utf-8") as fh:
            yield os.path.basename(path), fh.read()
    for name, _, src in generate_corpus(40, seed=11):
        yield name, src


@pytest.mark.parametrize("name,src", list(_all_sources()))
def test_pretty_print_round_trip(name, src):
    unit = parse(src, name)
    text = pretty_print(unit)
    again = parse(text, name)
    assert again.contracts == unit.contracts
    assert pretty_print(again) == text


def test_parse_expr_rejects_trailing_tokens():
    with pytest.raises(LangSyntaxError):
        parse_expr("a + b c")


_names = st.sampled_from(["a", "b", "pause_0", "ts_1", "x_c0"])
_leaves = st.one_of(
    st.integers(min_value=0, max_value=10 ** 30).map(Num),
    st.booleans().map(Bool),
    _names.map(Name),
    st.just(Sender()),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(["!", "-"]), children),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "/", "==", "!=", "<", "<=",
                                           ">", ">=", "&&", "||"]), children, children),
        st.builds(Index, st.sampled_from(["bal", "m"]), children),
    )


@settings(max_examples=300, deadline=None)
@given(st.recursive(_leaves, _extend, max_leaves=12))
def test_expression_print_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e
