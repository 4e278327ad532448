"""Parsing, diagnostics and serialization of graph specs."""

from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MDG_FIXTURES, check_parse_robust, fixture_corpus, fixture_path, fuzz_case, load_spec
from entangled_id.gspec_parser import (
    CondensedUnrepresentableWarning,
    ParseError,
    normalize_indicator,
    parse,
    parse_with_diagnostics,
    serialize,
)


def test_simulation_graph_role_counts():
    spec = load_spec("fig9")
    assert len(spec.units) == 3
    assert spec.count_roles() == {"counterfactual": 5, "indicator": 3, "proxy": 3, "covariate": 3}


def test_dangling_edge_reports_syntax_error_at_semicolon():
    result = parse_with_diagnostics("edge A -> ;")
    assert not result.ok
    d = result.diagnostics[0]
    assert d.code == "SyntaxError"
    assert (d.span.line, d.span.column) == (1, 11)


def test_parse_raises_with_all_diagnostics():
    with pytest.raises(ParseError) as err:
        parse("unit 1 {\n  missing\n}\nZ9[1] -> R_Z9\n")
    assert len(err.value.diagnostics) >= 1


def test_diagnostic_carries_undeclared_reference():
    result = parse_with_diagnostics("unit 1 {\n  covariate C\n}\nO.C -> O.D\n")
    assert not result.ok
    assert any("O.D" in d.message for d in result.diagnostics)


def test_invalid_utf8_is_a_diagnostic():
    result = parse_with_diagnostics(b"unit 1 {\xff}")
    assert not result.ok
    assert result.diagnostics[0].span.offset == 8


def test_indicator_spellings_normalize():
    assert normalize_indicator("r2") == "R_2"
    assert normalize_indicator("R_2") == "R_2"
    assert normalize_indicator("Z1") is None


def test_edge_keyword_and_bare_form_agree():
    head = "unit 1 {\n  covariate C\n  missing Y\n}\n"
    assert parse(head + "O.C -> Y[1]\n") == parse(head + "edge O.C -> Y[1]\n")


def test_family_wildcard_expands_to_every_member():
    spec = parse("unit 1 {\n  covariate C\n  missing Z1 [r2]\n}\nunit 2 {\n  missing Z2\n}\nO.C -> Z1[*]\n")
    targets = sorted(e.target for e in spec.edges)
    assert targets == ["Z1[1;r2=0]", "Z1[1;r2=1]"]


def test_queries_are_parsed():
    spec = load_spec("three_unit_singleworld")
    q = spec.queries[0]
    assert q.kind == "singleworld"
    assert q.counterfactuals == ("Z1[1;r2=0,r3=1]", "Z3[1;r1=1,r2=0]")
    assert dict(q.given) == {"R_1": 1, "R_2": 0, "R_3": 1}


def test_empty_spec_serializes_to_empty_string():
    spec = parse("")
    assert spec.is_empty
    assert serialize(spec) == ""


def test_full_network_condenses_to_family_lines():
    text = serialize(load_spec("fig5"), "condensed")
    for i in (1, 2, 3):
        assert text.count(f"ctf_family Z{i}\n") == 1
    assert "Z1[1;" not in text


def test_uneven_family_falls_back_with_warning():
    spec = load_spec("fig6b")
    with pytest.warns(CondensedUnrepresentableWarning):
        text = serialize(spec, "condensed")
    assert "Z2[1;r1=1] -> R_3" in text
    assert parse(text) == spec


@pytest.mark.parametrize("name", MDG_FIXTURES)
@pytest.mark.parametrize("style", ["expanded", "condensed"])
def test_fixture_round_trip_is_fixed_point(name, style):
    spec = load_spec(name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CondensedUnrepresentableWarning)
        once = serialize(spec, style)
        again = serialize(parse(once), style)
    assert parse(once) == spec
    assert again == once


def test_fixture_text_round_trip():
    for name in MDG_FIXTURES:
        assert check_parse_robust(fixture_path(name).read_text())


_CORPUS = fixture_corpus()


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mutated_inputs_never_crash(seed):
    check_parse_robust(fuzz_case(np.random.default_rng(seed), _CORPUS))


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_arbitrary_text_never_crashes(text):
    check_parse_robust(text)
