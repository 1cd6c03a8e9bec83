"""Scenario engine, GraphML ingestion, and study tests."""
import pytest

from overlaylab.scenarios import (
    PAPER_SCENARIOS,
    Scenario,
    ScenarioError,
    add_sites,
    build_paper_scenario,
    hop_study,
    load_bundled_topology,
    parse_graphml,
    random_path_study,
    run_experiment,
)

GRAPHML = """<?xml version="1.0" encoding="UTF-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <graph id="G" edgedefault="undirected">
    <node id="n0"/><node id="n1"/><node id="n2"/>
    <edge source="n0" target="n1"/>
    <edge source="n1" target="n2"/>
  </graph>
</graphml>
"""


def test_parse_graphml_counts():
    topo = parse_graphml(GRAPHML)
    assert len(topo.nodes) == 3
    assert len(topo.links) == 4  # undirected edges expand both ways
    assert all(k == "router" for k in topo.nodes.values())


def test_parse_graphml_rejects_duplicate_edge():
    bad = GRAPHML.replace(
        '<edge source="n1" target="n2"/>',
        '<edge source="n1" target="n2"/><edge source="n0" target="n1"/>',
    )
    with pytest.raises(ScenarioError):
        parse_graphml(bad)


def test_parse_graphml_rejects_self_loop():
    bad = GRAPHML.replace(
        '<edge source="n1" target="n2"/>', '<edge source="n1" target="n1"/>'
    )
    with pytest.raises(ScenarioError):
        parse_graphml(bad)


def test_bundled_topologies_load():
    ab = load_bundled_topology("abilene")
    assert len(ab.nodes) == 11
    assert len(ab.links) == 28
    btn = load_bundled_topology("btn")
    assert len(btn.nodes) == 16
    assert len(btn.links) == 48


def test_unknown_bundled_topology():
    with pytest.raises(ScenarioError):
        load_bundled_topology("nope")


def test_add_sites_attaches_one_site_per_router():
    base = parse_graphml(GRAPHML)
    topo = add_sites(base, uplink_mbps=30.0, core_mbps=10.0)
    sites = [n for n, k in topo.nodes.items() if k == "site"]
    assert sorted(sites) == ["s-n0", "s-n1", "s-n2"]
    assert topo.link("s-n0->n0").capacity_mbps == 30.0
    assert topo.link("n0->n1").capacity_mbps == 10.0


@pytest.mark.parametrize("name", PAPER_SCENARIOS)
def test_paper_scenarios_build_and_round_trip(name):
    s = build_paper_scenario(name)
    again = Scenario.from_json_dict(s.to_json_dict())
    assert again.to_json() == s.to_json()


def test_unknown_scenario_name():
    with pytest.raises(ScenarioError):
        build_paper_scenario("missing-scenario")


def test_triangle_experiment_hits_planned_targets():
    result = run_experiment(build_paper_scenario("triangle-basic"))
    lines = result.summary_csv().strip().split("\n")
    assert lines[0] == "path,target_mbps,actual_mbps"
    rows = {r.split(",")[0]: r.split(",")[1:] for r in lines[1:]}
    assert rows["A|C"] == ["10", "10"]
    assert rows["A|B|C"] == ["5", "5"]


def test_failure_scenario_has_three_phases():
    result = run_experiment(build_paper_scenario("failure-triangle"))
    lines = result.phase_csv().strip().split("\n")
    assert lines[0] == "phase_start,phase_end,mean_utility"
    assert len(lines) == 4


def test_experiment_determinism():
    a = run_experiment(build_paper_scenario("triangle-basic"))
    b = run_experiment(build_paper_scenario("triangle-basic"))
    assert a.trace.to_csv() == b.trace.to_csv()
    assert a.summary_csv() == b.summary_csv()


def test_hop_study_is_monotone():
    topo = add_sites(parse_graphml(GRAPHML), uplink_mbps=30.0, core_mbps=10.0)
    rows = hop_study({"toy": topo}, hop_limits=(1, 2, 3), seed=7)
    utils = [u for _, _, u in rows]
    assert utils == sorted(utils) or all(
        b >= a - 1e-9 for a, b in zip(utils, utils[1:])
    )


def test_random_path_study_monotone_in_k():
    topo = add_sites(load_bundled_topology("abilene"), uplink_mbps=30.0, core_mbps=10.0)
    rows = random_path_study(topo, k_values=(0, 2), trials=2, seed=3)
    frac = dict(rows)
    assert 0.0 < frac[0] <= frac[2] <= 1.0 + 1e-9
