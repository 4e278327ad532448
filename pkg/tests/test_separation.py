"""m-separation, Markov blankets and collider paths against independent oracles."""

from __future__ import annotations

import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import conditional_independence_gap, load_graph, moral_separated, random_admg
from entangled_id.functional_emitter import random_full_law
from entangled_id.graph_model import MixedGraph
from entangled_id.separation import (
    BlanketDivergenceWarning,
    DegenerateExplosion,
    InvalidSeparationQuery,
    VertexNotInGraph,
    collider_paths_between,
    m_separated,
    markov_blanket,
)


def test_mar_dyad_indicators_separated_from_counterfactuals():
    g = load_graph("fig2d")
    assert m_separated(g, {"R_A", "R_Y"}, {"A[1]", "Y[1]"}, {"O.C1", "O.C2"})
    assert not m_separated(g, {"R_A", "R_Y"}, {"A[1]", "Y[1]"})


def test_collider_opens_when_conditioned():
    g = MixedGraph.build("ABC", [("A", "B"), ("C", "B")])
    assert m_separated(g, {"A"}, {"C"})
    assert not m_separated(g, {"A"}, {"C"}, {"B"})


def test_descendant_of_collider_opens_path():
    g = MixedGraph.build("ABCD", [("A", "B"), ("C", "B"), ("B", "D")])
    assert not m_separated(g, {"A"}, {"C"}, {"D"})


def test_bidirected_collider():
    g = MixedGraph.build("ABC", [], [("A", "B"), ("B", "C")])
    assert m_separated(g, {"A"}, {"C"})
    assert not m_separated(g, {"A"}, {"C"}, {"B"})


def test_mar_single_variable():
    g = load_graph("fig3b")
    assert m_separated(g, {"R_Y"}, {"Y[1]"}, {"O.O"})


def test_query_validation():
    g = load_graph("fig2d")
    with pytest.raises(VertexNotInGraph):
        m_separated(g, {"A"}, {"R_Y"})
    with pytest.raises(VertexNotInGraph):
        m_separated(g, {"nope"}, {"R_Y"})
    with pytest.raises(InvalidSeparationQuery):
        m_separated(g, {"R_A"}, {"R_A"})
    with pytest.raises(InvalidSeparationQuery):
        m_separated(g, set(), {"R_A"})


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_agrees_with_moral_graph_oracle(seed):
    rng = np.random.default_rng(seed)
    g = random_admg(rng, 7)
    vs = sorted(g.vertices)
    if len(vs) < 2:
        return
    for _ in range(10):
        perm = list(rng.permutation(vs))
        kx = int(rng.integers(1, len(vs)))
        ky = int(rng.integers(1, len(vs) - kx + 1))
        xs, ys = perm[:kx], perm[kx : kx + ky]
        zs = [v for v in perm[kx + ky :] if rng.random() < 0.5]
        assert m_separated(g, xs, ys, zs) == moral_separated(g, xs, ys, zs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_separation_implies_numeric_independence(seed):
    rng = np.random.default_rng(seed)
    g = random_admg(rng, 5)
    law = random_full_law(g, rng).table
    vs = sorted(g.vertices)
    for x, y in itertools.combinations(vs, 2):
        rest = [v for v in vs if v not in (x, y)]
        zs = [v for v in rest if rng.random() < 0.5]
        gap = conditional_independence_gap(law, [x], [y], zs)
        if m_separated(g, [x], [y], zs):
            assert gap < 1e-12
        else:
            # random Dirichlet tables are faithful with probability one
            assert gap > 1e-9


# Markov blankets ----------------------------------------------------------------


def test_self_censoring_puts_counterfactual_in_blanket():
    g = load_graph("fig3c")
    assert "Y[1]" in markov_blanket(g, "R_Y")


def test_isolated_vertex_has_empty_blanket():
    g = MixedGraph.build("AB")
    assert markov_blanket(g, "A") == frozenset()


def test_blanket_of_indicator_in_three_unit_graph():
    g = load_graph("fig6a")
    assert markov_blanket(g, "R_1") == {"Z3[1]", "R_2"}


def test_blanket_matches_numeric_independence_on_three_unit_graph():
    g = load_graph("fig6a").proxy_free()
    rng = np.random.default_rng(5)
    law = random_full_law(g, rng).table
    mb = markov_blanket(g, "R_1")
    rest = sorted(g.vertices - mb - {"R_1"})
    assert conditional_independence_gap(law, ["R_1"], rest, sorted(mb)) < 1e-12
    for m in mb:
        smaller = sorted(mb - {m})
        assert conditional_independence_gap(law, ["R_1"], rest + [m], smaller) > 1e-6


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_blanket_definitions_agree_and_separate(seed):
    rng = np.random.default_rng(seed)
    g = random_admg(rng, 6)
    for v in sorted(g.vertices):
        with warnings.catch_warnings():
            warnings.simplefilter("error", BlanketDivergenceWarning)
            mb = markov_blanket(g, v)
        assert mb == markov_blanket(g, v, "district_formula", check=False)
        rest = g.vertices - mb - {v}
        if rest:
            assert m_separated(g, {v}, rest, mb)


def test_unknown_blanket_definition():
    with pytest.raises(ValueError):
        markov_blanket(MixedGraph.build("A"), "A", "bogus")


# collider paths -------------------------------------------------------------------


def test_entangled_colluding_path_found():
    g = load_graph("fig6b")
    paths = collider_paths_between(g, "Z2[1;r1=1]", "R_1")
    assert [p.vertices for p in paths] == [("Z2[1;r1=1]", "R_3", "R_1")]
    assert paths[0].marks == ("->", "<-")
    assert str(paths[0]) == "Z2[1;r1=1] -> R_3 <- R_1"


def test_no_colluding_path_in_identified_graph():
    g = load_graph("fig6a")
    assert collider_paths_between(g, "Z2[1;r1=1]", "R_1") == []


def test_direct_edge_is_degenerate_path():
    g = load_graph("fig3c")
    paths = collider_paths_between(g, "Y[1]", "R_Y")
    assert paths[0].vertices == ("Y[1]", "R_Y")
    assert paths[0].is_direct


def test_forbidden_interior_vertices():
    g = load_graph("fig6b")
    assert collider_paths_between(g, "Z2[1;r1=1]", "R_1", forbidden={"R_3"}) == []


def test_path_explosion_is_capped():
    names = [f"V{i}" for i in range(10)]
    g = MixedGraph.build(names, [], itertools.combinations(names, 2))
    with pytest.raises(DegenerateExplosion):
        collider_paths_between(g, "V0", "V9", cap=50)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_collider_paths_have_collider_interiors(seed):
    g = random_admg(np.random.default_rng(seed), 6)
    vs = sorted(g.vertices)
    for a, b in itertools.combinations(vs, 2):
        for p in collider_paths_between(g, a, b):
            assert p.vertices[0] == a and p.vertices[-1] == b
            assert len(set(p.vertices)) == len(p.vertices)
            for left, right in zip(p.marks, p.marks[1:]):
                assert left in ("->", "<->") and right in ("<-", "<->")
            # every vertex reached along a collider path lies in the blanket
            assert set(p.vertices[1:]) <= markov_blanket(g, a, check=False)
