import csv
import json
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartqueue.agents import make_policy
from smartqueue.env import MBPS
from smartqueue.errors import ConfigError, PreconditionError
from smartqueue.harness import (
    CampaignResult,
    SnapshotRecord,
    build_abilene_scenario,
    build_sdwan_scenario,
    comm_overhead,
    compare_results,
    empirical_cdf,
    export_distributions,
    feature_bandwidth,
    five_number,
    load_scenario,
    policy_pairs,
    run_campaign,
    sla_table,
    write_result,
)
from smartqueue.harness.scenarios import ABILENE_EDGES, Scenario
from smartqueue.netsim import FlowGroup, SnapshotMetrics


# -- scenarios -----------------------------------------------------------------

def test_five_branch_groups():
    sc = build_sdwan_scenario(5, "internet")
    assert len(sc.flows) == 10
    assert sc.group_counts() == (4, 3, 3)
    assert sc.thresholds.throughput == (30 * MBPS, 10 * MBPS, 5 * MBPS)
    assert sc.bounds.high[0] == 40 * MBPS and sc.snapshot == 10.0


def test_two_branches_cover_all_groups():
    sc = build_sdwan_scenario(2, "mpls")
    assert len(sc.flows) == 4
    assert set(sc.group_counts()) != {0} and all(c > 0 for c in sc.group_counts())


def test_branch_mixes_differ():
    sc = build_sdwan_scenario(3, "internet")
    mixes = [tuple(sorted(int(f.group) for f in sc.flows if f.src == b)) for b in ("B1", "B2", "B3")]
    assert len(set(mixes)) == 3


def test_star_neighbourhoods():
    sc = build_sdwan_scenario(4, "internet")
    assert sc.neighbors[0] == [1, 2, 3, 4]
    assert all(nb == [0] for nb in sc.neighbors[1:])


def test_desk_scenario_settings():
    sc = load_scenario("sdwan-desk")
    assert sc.n_agents == 4 and sc.snapshot == 2.0 and sc.snapshots == 60
    assert sc.thresholds.throughput == (12 * MBPS, 8 * MBPS, 6 * MBPS)
    assert sc.bounds.high[0] == 20 * MBPS


def test_sdwan_preconditions():
    with pytest.raises(PreconditionError):
        build_sdwan_scenario(1)
    with pytest.raises(PreconditionError):
        build_sdwan_scenario(3, "lte")


def test_abilene_layout():
    sc = build_abilene_scenario()
    assert sc.n_agents == 11 and len(sc.flows) == 9
    assert sc.group_counts() == (3, 3, 3)
    sink_port = sc.agent_links[6]
    assert all(sink_port in f.route for f in sc.flows)
    assert {f.src for f in sc.flows} == {"S1", "S2", "S3"}
    edges = {(min(i, j) + 1, max(i, j) + 1) for i, nb in enumerate(sc.neighbors) for j in nb}
    assert edges == {tuple(sorted(e)) for e in ABILENE_EDGES}
    assert all(i in sc.neighbors[j] for i, nb in enumerate(sc.neighbors) for j in nb)


def test_scenario_file_roundtrip(tmp_path):
    sc = build_sdwan_scenario(3, "mpls")
    path = tmp_path / "sc.json"
    sc.save(path)
    back = load_scenario(str(path))
    assert back.to_dict() == sc.to_dict()


def test_bad_scenario_file(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "bad.json"))
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "missing.json"))


# -- overhead and bandwidth --------------------------------------------------------

def test_beta_examples():
    full = set(combinations(range(6), 2))
    star = {(0, j) for j in range(1, 6)}
    assert comm_overhead([full] * 7, 15, 7) == 1.0
    assert comm_overhead([set()] * 7, 15, 7) == 0.0
    assert Fraction(comm_overhead([star] * 7, 15, 7)).limit_denominator(100) == Fraction(1, 3)
    assert comm_overhead([star] * 7, 15, 7) == pytest.approx(1 / 3, abs=1e-15)


def test_beta_counts_unordered_distinct_pairs():
    assert comm_overhead([[(0, 1), (1, 0), (2, 2)]], 3, 1) == pytest.approx(1 / 3)


@pytest.mark.parametrize("R,T", [(0, 5), (5, 0)])
def test_beta_needs_positive_sizes(R, T):
    with pytest.raises(PreconditionError):
        comm_overhead([set()], R, T)


def test_policy_pairs():
    sc = build_sdwan_scenario(5, "internet")
    R = 15
    assert comm_overhead([policy_pairs("dgn", sc)], R, 1) == pytest.approx(1 / 3)
    assert comm_overhead([policy_pairs("madqn-central", sc)], R, 1) == 1.0
    assert policy_pairs("madqn-dist", sc) == set() == policy_pairs("pq", sc)


def test_feature_bandwidth_examples():
    assert feature_bandwidth(2, 128, 4, 10) == 0.8192
    assert feature_bandwidth(1, 128, 4, 10) == 0.4096
    assert feature_bandwidth(0, 128, 4, 10) == 0.0


# -- distributions -------------------------------------------------------------

def quartile_oracle(values, q):
    """Sort, then interpolate linearly between order statistics."""
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (pos - lo) * (v[hi] - v[lo])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_five_number_matches_sort_oracle(values):
    got = five_number(values)
    for key, q in zip(("min", "q1", "median", "q3", "max"), (0, 0.25, 0.5, 0.75, 1)):
        assert got[key] == pytest.approx(quartile_oracle(values, q), rel=1e-12, abs=1e-9)


def test_constant_series():
    assert set(five_number([3.5] * 9).values()) == {3.5}
    x, p = empirical_cdf([3.5] * 4)
    assert x.tolist() == [3.5] * 4 and p[-1] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_cdf_non_decreasing(values):
    x, p = empirical_cdf(values)
    assert np.all(np.diff(x) >= 0) and np.all(np.diff(p) > 0)
    assert 0 < p[0] and p[-1] == 1.0


def test_five_number_empty():
    with pytest.raises(PreconditionError):
        five_number([])


# -- SLA accounting and campaigns ----------------------------------------------

def _metrics(tp, delay, offered):
    return SnapshotMetrics(0.0, 1.0, [], [], [], [], [], list(tp), list(delay), list(offered), [])


def _record(k, tp, delay, offered, congested):
    return SnapshotRecord(k, _metrics(tp, delay, offered), congested, [(0.5, 0.3, 0.2)], [0], [0.0], [False])


TH = {"throughput": [10.0, 5.0, 2.0], "delay": [0.1, 0.2, 0.3]}


def test_sla_table_gating():
    recs = [
        _record(0, [12, 4, 3], [0.05, 0.25, 0.1], [20, 20, 20], [True, True, False]),
        _record(1, [8, 6, 0], [0.05, 0.1, None], [20, 20, 5], [True, False, True]),
        _record(2, [1, 1, 0], [0.5, 0.1, None], [1, 1, 0], [False, False, False]),
    ]
    t = sla_table(recs, TH)
    assert t["throughput"] == {"gold": 0.5, "silver": 0.0, "bronze": 0.0}
    assert t["congested"] == {"gold": 2, "silver": 1, "bronze": 1}
    # bronze: met, starved with offered load (violation), idle (met)
    assert t["delay"]["bronze"] == pytest.approx(2 / 3)
    assert t["delay"]["gold"] == pytest.approx(2 / 3)


def test_sla_table_without_congestion():
    t = sla_table([_record(0, [1, 1, 1], [0.05] * 3, [1, 1, 1], [False] * 3)], TH)
    assert t["throughput"]["gold"] is None
    assert sla_table([], TH)["delay"]["gold"] is None


def _fast_desk():
    return build_sdwan_scenario(3, "internet", snapshot=0.5, snapshots=8)


def test_zero_snapshot_campaign():
    sc = _fast_desk()
    res = run_campaign(sc, make_policy("pq", sc.n_agents), 0)
    assert len(res) == 0 and res.sla()["snapshots"] == 0


def test_campaign_agent_mismatch():
    sc = _fast_desk()
    with pytest.raises(ConfigError):
        run_campaign(sc, make_policy("pq", 6), 2)


def test_dgn_campaign_reports_overhead():
    sc = _fast_desk()
    res = run_campaign(sc, make_policy("dgn", sc.n_agents), 2)
    assert res.beta == pytest.approx(3 / 6)
    assert res.bandwidth_kbps == feature_bandwidth(2, 128, 4, 0.5)
    assert len(res.records) == 2


def test_write_and_compare(tmp_path):
    sc = _fast_desk()
    dirs = []
    for name in ("pq", "madqn-dist"):
        res = run_campaign(sc, make_policy(name, sc.n_agents, seed=1), 4, seed=3)
        d = tmp_path / name
        summary = write_result(res, d, sc.agent_links, [[0, 1, 2], [0, 1], [0, 2], [1, 2]])
        assert summary["snapshots"] == 4
        dirs.append(d)
    rows = list(csv.DictReader(open(dirs[0] / "metrics.csv")))
    assert len(rows) == 4 * sc.n_agents * 3
    assert {r["group"] for r in rows} == {"gold", "silver", "bronze"}
    merged = compare_results(dirs, tmp_path / "cmp")
    assert merged["policies"] == ["pq", "madqn-dist"]
    header = next(csv.reader(open(tmp_path / "cmp" / "compare.csv")))
    assert header == ["sla", "group", "pq", "madqn-dist"]
    long = list(csv.DictReader(open(tmp_path / "cmp" / "cdf_bronze_throughput.csv")))
    assert {r["policy"] for r in long} == {"pq", "madqn-dist"}


def test_compare_is_identity_on_single_result(tmp_path):
    sc = _fast_desk()
    res = run_campaign(sc, make_policy("pq", sc.n_agents), 3, seed=2)
    write_result(res, tmp_path / "r", sc.agent_links, [[0, 1, 2]] * 4)
    merged = compare_results([tmp_path / "r"], tmp_path / "c")
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    for kind, lab, val in merged["sla"]:
        assert summary["sla"][kind][lab] == val
    single = list(csv.reader(open(tmp_path / "r" / "cdf_pq_gold_throughput.csv")))[1:]
    combined = list(csv.reader(open(tmp_path / "c" / "cdf_gold_throughput.csv")))[1:]
    assert [r[1:] for r in combined] == single


def test_compare_missing_summary(tmp_path):
    with pytest.raises(ConfigError):
        compare_results([tmp_path], tmp_path / "out")


def test_export_empty_result(tmp_path):
    with pytest.raises(PreconditionError):
        export_distributions(CampaignResult("s", "pq", 0, TH), tmp_path)


def test_export_quartiles_follow_records(tmp_path):
    recs = [_record(k, [k, 2 * k, 0.0], [0.01 * k, None, None], [1, 1, 0], [True] * 3) for k in range(1, 6)]
    res = CampaignResult("s", "dgn", 0, TH, recs)
    q = export_distributions(res, tmp_path)
    assert q["gold"]["throughput"]["median"] == 3.0
    assert q["silver"]["delay"] is None
    rows = list(csv.reader(open(tmp_path / "cdf_dgn_gold_delay.csv")))
    assert rows[0] == ["value", "cdf"] and len(rows) == 6
