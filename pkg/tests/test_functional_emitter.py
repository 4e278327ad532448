"""Identifying functionals: emission, evaluation and reconstruction oracles."""

from __future__ import annotations

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_graph, schema, three_indicator_spec
from entangled_id.functional_emitter import (
    STORE,
    CriterionNotEstablished,
    OddsRatio,
    Prob,
    emit_full_law_functional,
    emit_full_observability_functional,
    emit_g_formula,
    emit_or_mechanism,
    emit_single_world_functional,
    evaluate,
    iter_nodes,
    observed_law,
    random_full_law,
    render,
    to_json,
)
from entangled_id.graph_model import build_and_validate
from entangled_id.gspec_parser import parse
from entangled_id.id_engine import SingleWorldQuery
from entangled_id.tables import Table


def _reconstruction_error(g, emit, rng, floor=0.02) -> tuple[float, float]:
    """Error from the observed margin and from the full law (the direct route)."""
    full = random_full_law(g, rng, floor=floor)
    ast = emit(g)
    from_observed = evaluate(ast, observed_law(full))
    direct = evaluate(ast, full)
    target = full.table.marginal(from_observed.variables)
    return from_observed.max_abs_diff(target), direct.max_abs_diff(target)


# g-formula -----------------------------------------------------------------------------------


def test_adjustment_formula_shape():
    ast = emit_g_formula(load_graph("fig1a"), ["O.A"], {"O.A": 1})
    assert render(ast) == "(p(O.C) * p(O.Y | O.A, O.C))|_{O.A=1}"


def test_empty_intervention_is_the_factorization():
    g = load_graph("fig1a")
    rng = np.random.default_rng(0)
    law = random_full_law(g, rng)
    assert evaluate(emit_g_formula(g, [], {}), law).max_abs_diff(law.table) < 1e-14


def test_dyad_interference_formula_reads_parent_sets():
    text = render(emit_g_formula(load_graph("fig1c"), ["O.A1", "O.A2"], {"O.A1": 1, "O.A2": 0}))
    assert "p(O.Y1 | O.A1, O.A2, O.C1, O.C2)" in text
    assert "p(O.Y2 | O.A1, O.A2, O.C1, O.C2)" in text
    assert "p(O.C1) * p(O.C2)" in text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 1))
def test_adjustment_matches_direct_computation(seed, a):
    g = load_graph("fig1a")
    law = random_full_law(g, np.random.default_rng(seed))
    got = evaluate(emit_g_formula(g, ["O.A"], {"O.A": a}), law)
    p = law.table.transpose(("O.C", "O.A", "O.Y")).values
    p_c = p.sum(axis=(1, 2))
    p_y_given = p[:, a, :] / p[:, a, :].sum(axis=1, keepdims=True)
    expected = Table(("O.Y",), (p_c[:, None] * p_y_given).sum(axis=0))
    assert got.marginal(["O.Y"]).max_abs_diff(expected) < 1e-12


def test_uniform_law_margins_are_uniform():
    g = load_graph("fig1a")
    law = random_full_law(g, np.random.default_rng(1))
    uniform = type(law)(Table(law.variables, np.full(law.table.values.shape, 1 / 8)), graph=law.graph)
    out = evaluate(emit_g_formula(g, ["O.A"], {"O.A": 0}), uniform)
    np.testing.assert_allclose(out.values, 1 / 4)


# mechanism --------------------------------------------------------------------------------


def test_mar_dyad_mechanism_has_no_odds_ratio():
    ast = emit_or_mechanism(load_graph("fig2d"))
    assert render(ast) == "p(R_A | O.C1, O.C2) * p(R_Y | O.C1, O.C2)"
    assert not any(isinstance(n, OddsRatio) for n in iter_nodes(ast))


def test_three_unit_mechanism_uses_odds_ratio_under_restriction():
    ast = emit_or_mechanism(load_graph("fig6a"))
    ors = [n for n in iter_nodes(ast) if isinstance(n, OddsRatio)]
    assert ors
    assert "R_3=1" in render(ast)


def test_single_indicator_mechanism_is_one_conditional():
    ast = emit_or_mechanism(load_graph("fig3b"))
    assert isinstance(ast, Prob)
    assert render(ast) == "p(R_Y | O.O)"


# full law and full observability -----------------------------------------------------------


def test_mar_dyad_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(5):
        err, direct = _reconstruction_error(load_graph("fig2d"), emit_full_law_functional, rng)
        assert err < 1e-10 and direct < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_three_indicator_reconstruction(seed):
    rng = np.random.default_rng(seed)
    g = build_and_validate(parse(three_indicator_spec(rng)))
    err, direct = _reconstruction_error(g, emit_full_law_functional, rng)
    assert err < 1e-8
    assert direct < 1e-8


@pytest.mark.parametrize("name", ["fig6a", "fig9_mnar"])
def test_full_observability_reconstruction(name):
    rng = np.random.default_rng(6)
    err, direct = _reconstruction_error(load_graph(name), emit_full_observability_functional, rng)
    assert err < 1e-8 and direct < 1e-8


def test_simulation_graph_mechanism_shape():
    text = render(emit_or_mechanism(load_graph("fig9_mnar")))
    assert "p(R_3 | O.C3)" in text
    assert "Z3[1]" in text


def test_mcar_full_observability_collapses():
    g = load_graph("fig9_mcar")
    text = render(emit_full_observability_functional(g))
    assert "Z3[1] |" not in text
    rng = np.random.default_rng(2)
    err, _ = _reconstruction_error(g, emit_full_observability_functional, rng)
    assert err < 1e-8


def test_non_identified_graph_refuses_emission():
    with pytest.raises(CriterionNotEstablished):
        emit_full_observability_functional(load_graph("fig6b"))
    with pytest.raises(CriterionNotEstablished):
        emit_full_law_functional(load_graph("fig4a_selfcensoring"))


def test_wrong_functional_does_not_reconstruct_colluding_graph():
    # the functional of the identified three-unit graph, applied to data from the
    # graph with the colluding path, must show a visible error
    g_ok, g_bad = load_graph("fig6a"), load_graph("fig6b")
    rng = np.random.default_rng(12)
    full = random_full_law(g_bad, rng, floor=0.02)
    ast = emit_full_observability_functional(g_ok)
    got = evaluate(ast, observed_law(full))
    assert got.max_abs_diff(full.table.marginal(got.variables)) > 1e-3


# single world --------------------------------------------------------------------------------

_DYAD_MCAR = "unit 1 {\n  missing Z1 [r2]\n}\nunit 2 {\n  missing Z2\n}\n"


def test_mcar_single_world_is_restriction_only():
    g = build_and_validate(parse(_DYAD_MCAR))
    q = SingleWorldQuery.build(["Z1[1;r2=0]"], {"R_1": 1, "R_2": 0})
    ast = emit_single_world_functional(g, q)
    assert render(ast) == "p(Z1[1;r2=0] | R_1=1, R_2=0)"
    mcar = _independent_indicators(random_full_law(g, np.random.default_rng(1)))
    got = evaluate(ast, observed_law(mcar))
    assert got.max_abs_diff(mcar.table.marginal(["Z1[1;r2=0]"])) < 1e-12


def _independent_indicators(full):
    """The law with indicators made independent of every counterfactual."""
    t = full.table
    rs = [v for v in t.variables if v.startswith("R_")]
    others = [v for v in t.variables if v not in rs]
    joint = t.marginal(others) * t.marginal(rs)
    return type(full)(joint.transpose(t.variables), graph=full.graph)


def test_mar_single_world_standardizes_over_covariates():
    g = load_graph("fig9_mar")
    q = SingleWorldQuery.build(["Z1[1;r2=1]"], {"R_1": 1, "R_2": 1})
    text = render(emit_single_world_functional(g, q))
    assert text.startswith("sum_{O.C1, O.C2}")
    assert "p(O.C1, O.C2)" in text


def test_mar_single_world_recovers_counterfactual_margin():
    text = "unit 1 {\n  covariate C\n  missing Z1 [r2]\n}\nunit 2 {\n  missing Z2\n}\n"
    text += "O.C -> Z1[*]\nO.C -> R_1\nO.C -> R_2\nctf_family Z1\n"
    g = build_and_validate(parse(text))
    q = SingleWorldQuery.build(["Z1[1;r2=1]"], {"R_1": 1, "R_2": 1})
    ast = emit_single_world_functional(g, q)
    for seed in range(5):
        full = random_full_law(g, np.random.default_rng(seed))
        got = evaluate(ast, observed_law(full))
        assert got.max_abs_diff(full.table.marginal(["Z1[1;r2=1]"])) < 1e-12


def test_empty_single_world_query_is_identity():
    g = build_and_validate(parse(_DYAD_MCAR))
    ast = emit_single_world_functional(g, SingleWorldQuery.build([], {}))
    assert render(ast) == "1.0"


# store and serialization -----------------------------------------------------------------------


def test_store_ids_are_structural():
    a = emit_full_law_functional(load_graph("fig2d"))
    b = emit_full_law_functional(load_graph("fig2d"))
    fid = STORE.register(a)
    assert fid == STORE.register(b)
    assert fid.startswith("fn-") and len(fid) == 19
    assert render(STORE.get(fid)) == render(a)


def test_json_form_matches_schema():
    node_schema = schema("functional")
    for name, emit in [("fig2d", emit_full_law_functional), ("fig6a", emit_full_observability_functional)]:
        ast = emit(load_graph(name))
        doc = {"functional_id": STORE.register(ast), "target": "full-law", "text": render(ast), "ast": to_json(ast)}
        jsonschema.validate(doc, node_schema)


def test_graph_without_missingness_gives_the_observed_joint():
    g = load_graph("fig1a")
    ast = emit_full_law_functional(g)
    assert render(ast) == "p(O.A, O.C, O.Y)"
    law = random_full_law(g, np.random.default_rng(0))
    assert evaluate(ast, law).max_abs_diff(law.table) < 1e-15
