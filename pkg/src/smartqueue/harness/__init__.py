"""Scenarios, evaluation campaigns and result export."""

from .campaign import (
    CampaignResult,
    SnapshotRecord,
    comm_overhead,
    feature_bandwidth,
    policy_pairs,
    run_campaign,
    sla_table,
)
from .export import compare_results, empirical_cdf, export_distributions, five_number, write_result
from .scenarios import (
    Scenario,
    build_abilene_scenario,
    build_sdwan_scenario,
    load_scenario,
)

__all__ = [
    "CampaignResult",
    "Scenario",
    "SnapshotRecord",
    "build_abilene_scenario",
    "build_sdwan_scenario",
    "comm_overhead",
    "compare_results",
    "empirical_cdf",
    "export_distributions",
    "feature_bandwidth",
    "five_number",
    "load_scenario",
    "policy_pairs",
    "run_campaign",
    "sla_table",
    "write_result",
]
