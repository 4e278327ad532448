"""Mechanism classes and the identification checks."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_graph, load_spec, three_indicator_spec
from entangled_id.errors import InputError
from entangled_id.graph_model import build_and_validate
from entangled_id.gspec_parser import parse
from entangled_id.id_engine import (
    Assumption1Violated,
    Decision,
    IdVerdict,
    Mechanism,
    SingleWorldQuery,
    UnknownCounterfactual,
    Witness,
    check_assumption_1,
    check_full_law_id,
    check_full_observability_id,
    check_id,
    check_single_world_query,
    classify_mechanism,
    detect_e_structures,
    resolve_theorem,
)


@pytest.mark.parametrize(
    "name, expected",
    [("fig3a", Mechanism.MCAR), ("fig3b", Mechanism.MAR), ("fig3c", Mechanism.MNAR)],
)
def test_mechanism_classes_of_single_variable_graphs(name, expected):
    assert classify_mechanism(load_graph(name)) is expected


def test_mechanism_of_indicator_subset():
    g = load_graph("fig9_mnar")
    assert classify_mechanism(g, ["R_3"]) is not Mechanism.MNAR
    assert classify_mechanism(g) is Mechanism.MNAR


# full law ---------------------------------------------------------------------------


def test_mar_dyad_full_law_identified():
    v = check_full_law_id(load_graph("fig2d"))
    assert v.decision is Decision.IDENTIFIED
    assert v.functional_id and v.functional_id.startswith("fn-")


def test_self_censoring_prevents_identification():
    v = check_full_law_id(load_graph("fig4a_selfcensoring"), attach_functional=False)
    assert v.decision is Decision.NOT_IDENTIFIED
    edges = {(w.kind, w.vertices) for w in v.witnesses}
    assert ("self_censoring", ("A[1]", "R_A")) in edges
    assert ("self_censoring", ("Y[1]", "R_Y")) in edges


def test_bidirected_colluding_path_prevents_identification():
    v = check_full_law_id(load_graph("fig4b_colluding"), attach_functional=False)
    assert v.decision is Decision.NOT_IDENTIFIED
    assert v.witnesses[0].vertices == ("A1[1]", "A2[1]", "R_A1")
    assert v.witnesses[0].kind == "colluding_path"


def test_without_the_colluding_path_dyad_is_identified():
    assert check_full_law_id(load_graph("fig4b"), attach_functional=False).identified


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_graphs_without_self_censoring_or_colluders_are_identified(seed):
    rng = np.random.default_rng(seed)
    g = build_and_validate(parse(three_indicator_spec(rng)))
    assert check_full_law_id(g, attach_functional=False).identified
    x = ["X1", "X2", "X3"][int(rng.integers(3))]
    censored = g.with_edges(add_directed=[(f"{x}[1]", f"R_{x}")])
    v = check_full_law_id(censored, attach_functional=False)
    assert v.decision is Decision.NOT_IDENTIFIED
    assert any(w.vertices == (f"{x}[1]", f"R_{x}") for w in v.witnesses)


# entangled structures -----------------------------------------------------------------


def test_assumption_holds_when_only_all_ones_counterfactuals_point_into_indicators():
    assert check_assumption_1(load_graph("fig6a")) == (True, [])
    assert check_assumption_1(load_graph("fig2d")) == (True, [])


def test_assumption_fails_for_zero_pattern_parent_of_indicator():
    g = load_graph("fig4c").with_edges(add_directed=[("Z1[1;r2=0]", "R_2")])
    ok, bad = check_assumption_1(g)
    assert not ok
    assert [w.vertices for w in bad] == [("Z1[1;r2=0]", "R_2")]
    with pytest.raises(Assumption1Violated):
        check_full_observability_id(g)


def test_entangled_colluder_detected():
    e = detect_e_structures(load_graph("fig6b"))
    assert ["Z2[1;r1=1]", "R_3", "R_1"] in e.to_json()["e_colluders"]


def test_affector_censoring_detected():
    e = detect_e_structures(load_graph("fig4c"))
    assert ["Z2[1;r1=1]", "R_1"] in e.to_json()["affector_censoring"]


def test_identified_three_unit_graph_has_no_entangled_structures():
    assert detect_e_structures(load_graph("fig6a")).empty


# full observability ---------------------------------------------------------------------


def test_full_observability_identified_without_colluding_path():
    v = check_full_observability_id(load_graph("fig6a"))
    assert v.identified
    assert v.to_json()["witnesses"] == []


def test_full_observability_not_identified_with_colluding_path():
    v = check_full_observability_id(load_graph("fig6b"))
    assert v.decision is Decision.NOT_IDENTIFIED
    assert v.to_json()["witnesses"] == [["Z2[1;r1=1]", "R_3", "R_1"]]


def test_simulation_graph_with_every_mechanism_edge_identified():
    assert check_full_observability_id(load_graph("fig9_mnar")).identified


# single world ---------------------------------------------------------------------------


def _queries(name):
    return [SingleWorldQuery.build(q.counterfactuals, q.given) for q in load_spec(name).queries]


def test_consistent_single_world_query_accepted():
    g = load_graph("three_unit_singleworld")
    v = check_single_world_query(g, _queries("three_unit_singleworld")[0])
    assert v.identified
    assert v.mechanism is Mechanism.MCAR


def test_query_with_inconsistent_pattern_rejected():
    g = load_graph("three_unit_singleworld")
    r = {"R_1": 1, "R_2": 0, "R_3": 1}
    for ctf in [c for c in g.counterfactuals() if g.role(c).name == "Z2"]:
        q = SingleWorldQuery.build(["Z1[1;r2=0,r3=1]", ctf], r)
        v = check_single_world_query(g, q)
        assert v.decision is Decision.CONDITIONS_NOT_MET
        assert all(w.kind == "inconsistent_pattern" for w in v.witnesses)


def test_all_ones_world_is_always_valid():
    g = load_graph("three_unit_singleworld")
    ones = [c for c in g.counterfactuals() if g.role(c).all_ones]
    q = SingleWorldQuery.build(ones, {r: 1 for r in g.indicators()})
    assert check_single_world_query(g, q).identified


def test_single_world_query_input_errors():
    g = load_graph("three_unit_singleworld")
    with pytest.raises(UnknownCounterfactual):
        check_single_world_query(g, SingleWorldQuery.build(["Z9[1]"], {"R_1": 1}))
    with pytest.raises(InputError):
        check_single_world_query(g, SingleWorldQuery.build(["Z1[1;r2=0,r3=1]"], {"R_1": 1}))


# dispatch and verdict invariants --------------------------------------------------------


def test_theorem_aliases():
    assert resolve_theorem("1") == "full-law-dag"
    assert resolve_theorem("4") == "full-observability"
    assert resolve_theorem("auto") == "auto"
    with pytest.raises(InputError):
        resolve_theorem("7")


def test_auto_dispatch_picks_check_by_graph_kind():
    assert check_id(load_graph("fig2d"))[0].theorem.startswith("full-law")
    assert check_id(load_graph("fig6a"))[0].theorem == "full-observability"
    with pytest.raises(InputError):
        check_id(load_graph("three_unit_singleworld"), "single-world")
    verdicts = check_id(load_graph("three_unit_singleworld"), "3", _queries("three_unit_singleworld"))
    assert [v.decision for v in verdicts] == [Decision.IDENTIFIED, Decision.CONDITIONS_NOT_MET]


def test_dag_check_refuses_bidirected_graphs():
    with pytest.raises(InputError):
        check_id(load_graph("fig4b_colluding"), "full-law-dag")


def test_verdict_witness_invariants():
    with pytest.raises(ValueError):
        IdVerdict(Decision.NOT_IDENTIFIED, "full-law-admg")
    with pytest.raises(ValueError):
        IdVerdict(Decision.IDENTIFIED, "full-law-admg", (Witness("mnar", ("R_1",)),))


def test_verdicts_are_deterministic():
    a = check_full_observability_id(load_graph("fig9_mnar")).to_json()
    b = check_full_observability_id(load_graph("fig9_mnar")).to_json()
    assert a == b
