"""Block scenarios, seeded simulation, CSV round trips and ground truth."""

from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np
import pytest

from conftest import FIXTURES, load_graph, schema
from entangled_id.id_engine import Mechanism, classify_mechanism
from entangled_id.simulator import (
    MISSING,
    CovarianceNotPD,
    PositivityMarginViolated,
    ScenarioError,
    UnsupportedScenario,
    ground_truth,
    load_scenario,
    monte_carlo_truth,
    oracle_path,
    read_dataset,
    scenario_from_json,
    simulate,
    write_dataset,
)

SCENARIO_FILE = FIXTURES / "fig9_default.scenario.json"
RAW = json.loads(SCENARIO_FILE.read_text())
GRAPH = load_graph("fig9_default")


def scenario(edit=None, mechanism=None):
    data = copy.deepcopy(RAW)
    if edit:
        edit(data)
    scn = scenario_from_json(data, GRAPH)
    return scn.with_mechanism(mechanism) if mechanism else scn


def test_frozen_scenario_matches_schema_and_loads():
    jsonschema.validate(RAW, schema("scenario"))
    scn = load_scenario(SCENARIO_FILE)
    assert scn.mechanism is Mechanism.MNAR
    assert load_scenario(FIXTURES / "fig9_default.mdg").to_json() == scn.to_json()


@pytest.mark.parametrize("mech", ["MCAR", "MAR", "MNAR"])
def test_toggle_effective_graph_has_matching_class(mech):
    scn = scenario(mechanism=mech)
    assert classify_mechanism(scn.effective_graph()).value == mech


def test_mcar_observation_rate():
    def edit(d):
        for m in d["missingness"].values():
            m["mcar_probability"] = 0.7

    ds = simulate(scenario(edit, "MCAR"), 100_000, seed=1)
    for r, x in ds.indicators.items():
        assert abs(x.mean() - 0.7) < 0.01, r


def test_empty_dataset_keeps_schema():
    ds = simulate(scenario(), 0, seed=0)
    assert ds.n == 0
    assert set(ds.proxies) == set(GRAPH.proxies())
    assert set(ds.oracle) == set(GRAPH.counterfactuals())
    assert all(len(v) == 0 for v in ds.indicators.values())


def test_proxies_equal_the_pattern_matched_counterfactual():
    ds = simulate(scenario(), 5000, seed=3)
    r1, r2, r3 = (ds.indicators[k] for k in ("R_1", "R_2", "R_3"))
    for name, own, other, key in [("Z1", r1, r2, "r2"), ("Z2", r2, r1, "r1")]:
        for v in (0, 1):
            rows = (own == 1) & (other == v)
            np.testing.assert_array_equal(ds.proxies[name][rows], ds.oracle[f"{name}[1;{key}={v}]"][rows])
        assert not ds.observed[name][own == 0].any()
    np.testing.assert_array_equal(ds.proxies["Z3"][r3 == 1], ds.oracle["Z3[1]"][r3 == 1])
    assert ds.cell(int(np.argmin(r3)), "Z3") == MISSING
    assert ds.proxy("Z3").mask.sum() == (r3 == 0).sum()


def test_same_seed_same_data_independent_of_threads():
    a = simulate(scenario(), 3000, seed=9, threads=1)
    b = simulate(scenario(), 3000, seed=9, threads=4)
    c = simulate(scenario(), 3000, seed=10)
    for k in a.oracle:
        np.testing.assert_array_equal(a.oracle[k], b.oracle[k])
    for k in a.indicators:
        np.testing.assert_array_equal(a.indicators[k], b.indicators[k])
    assert not np.array_equal(a.oracle["Z3[1]"], c.oracle["Z3[1]"])


def test_prefix_stability():
    small = simulate(scenario(), 100, seed=4)
    large = simulate(scenario(), 400, seed=4)
    np.testing.assert_array_equal(small.oracle["Z1[1;r2=1]"], large.oracle["Z1[1;r2=1]"][:100])


def test_csv_round_trip(tmp_path):
    ds = simulate(scenario(), 200, seed=5)
    path = tmp_path / "d.csv"
    write_dataset(ds, GRAPH, path)
    assert oracle_path(path).exists()
    header = path.read_text().splitlines()[0].split(",")
    assert "unit1.Z1" in header and "R_1" in header
    back = read_dataset(path, GRAPH)
    for k in ds.proxies:
        np.testing.assert_array_equal(back.observed[k], ds.observed[k])
        np.testing.assert_allclose(back.proxies[k][ds.observed[k]], ds.proxies[k][ds.observed[k]], rtol=0)
    for k in ds.oracle:
        np.testing.assert_allclose(back.oracle[k], ds.oracle[k], rtol=0)


def test_csv_rejects_proxy_disagreeing_with_indicator(tmp_path):
    ds = simulate(scenario(), 20, seed=6)
    path = tmp_path / "d.csv"
    write_dataset(ds, GRAPH, path, oracle=False)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    j = header.index("R_3")
    row = lines[1].split(",")
    row[j] = "0" if row[j] == "1" else "1"
    lines[1] = ",".join(row)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(Exception, match="disagrees"):
        read_dataset(path, GRAPH)


# ground truth -----------------------------------------------------------------------------


def test_zero_coefficients_give_zero_means():
    def edit(d):
        for k in d["counterfactuals"].values():
            k["intercept"] = 0.0
            k["coefficients"] = {c: 0.0 for c in k["coefficients"]}

    scn = scenario(edit)
    assert all(ground_truth(scn, k).value == 0.0 for k in scn.ctf_order)


def test_linear_truth_is_intercept_plus_slope_times_mean():
    def edit(d):
        d["covariates"]["O.C1"]["mean"] = 2.0

    scn = scenario(edit)
    spec = RAW["counterfactuals"]["Z1[1;r2=1]"]
    assert ground_truth(scn, "Z1[1;r2=1]").value == pytest.approx(spec["intercept"] + spec["coefficients"]["O.C1"] * 2.0)


def test_monte_carlo_truth_agrees_with_analytic():
    scn = scenario()
    ds = simulate(scn, 200_000, seed=7)
    for k in scn.ctf_order:
        mc = monte_carlo_truth(ds, k)
        assert abs(mc.value - ground_truth(scn, k).value) < 3 * mc.se + 1e-12, k


# scenario validation ------------------------------------------------------------------------


def test_non_positive_definite_covariance():
    def edit(d):
        d["covariance"]["matrix"][0][0] = -1.0

    with pytest.raises(CovarianceNotPD):
        scenario(edit)


def test_covariance_without_bidirected_edge():
    from entangled_id.graph_model import validate_graph

    dropped = frozenset({"Z1[1;r2=0]", "Z3[1]"})
    assert dropped in GRAPH.graph.bidirected
    directed = set(GRAPH.graph.directed) - set(GRAPH.deterministic)
    g = validate_graph(GRAPH.roles, directed, set(GRAPH.graph.bidirected) - {dropped}, GRAPH.mode)
    with pytest.raises(ScenarioError):
        scenario_from_json(copy.deepcopy(RAW), g)


def test_realized_probability_outside_margin():
    def edit(d):
        d["missingness"]["R_3"]["intercept"] = 12.0

    with pytest.raises(PositivityMarginViolated):
        simulate(scenario(edit), 1000, seed=0)


def test_mcar_probability_outside_margin():
    def edit(d):
        d["missingness"]["R_1"]["mcar_probability"] = 1.0

    with pytest.raises(PositivityMarginViolated):
        scenario(edit)


def test_coefficient_without_edge_rejected():
    def edit(d):
        d["missingness"]["R_3"]["coefficients"]["C1"] = 0.3

    with pytest.raises(ScenarioError):
        scenario(edit)


def test_null_mcar_probability_is_drawn_in_range():
    def edit(d):
        d["missingness"]["R_1"]["mcar_probability"] = None

    a, b = scenario(edit), scenario(edit)
    p = a.indicators["R_1"].mcar_probability
    assert 0.3 <= p <= 0.7
    assert p == b.indicators["R_1"].mcar_probability


def test_hidden_vertices_unsupported():
    from entangled_id.graph_model import build_and_validate
    from entangled_id.gspec_parser import parse

    g = build_and_validate(parse("unit 1 {\n  missing Z\n  hidden H\n}\nH.H -> Z[1]\n"))
    with pytest.raises(UnsupportedScenario):
        scenario_from_json({"covariates": {}, "counterfactuals": {"Z[1]": {}}, "missingness": {"R_Z": {"mcar_probability": 0.5}}}, g)


def test_unknown_mechanism_rejected():
    with pytest.raises(ScenarioError):
        scenario(mechanism="sometimes")
