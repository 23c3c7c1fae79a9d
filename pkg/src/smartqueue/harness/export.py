"""Result files: ``metrics.csv``, per-distribution CDFs, quartiles and ``summary.json``.

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError, PreconditionError
from ..netsim import GROUPS, FlowGroup
from .campaign import CampaignResult, delay_met, throughput_met

METRICS = ("throughput", "delay")
LABELS = tuple(FlowGroup(g).label for g in GROUPS)

METRIC_COLUMNS = [
    "policy", "snapshot", "agent", "group", "served", "weight", "port_throughput", "port_delay",
    "group_offered", "group_throughput", "group_delay", "congested", "throughput_met", "delay_met",
    "action", "reward", "done",
]


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def five_number(values) -> dict:
    """min, lower quartile, median, upper quartile, max (linear interpolation)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise PreconditionError("five-number summary of an empty series")
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and ``P(X <= x)`` at each, ``i/n`` for the i-th smallest."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    return v, np.arange(1, v.size + 1) / v.size


def distributions(result: CampaignResult) -> dict[tuple[str, str], list[float]]:
    """Per (group, metric) series: every snapshot's group throughput, and the
    mean delay of snapshots that delivered traffic of that group."""
    out = {}
    for g in GROUPS:
        lab = LABELS[g]
        out[(lab, "throughput")] = [r.metrics.group_throughput[g] for r in result.records]
        out[(lab, "delay")] = [r.metrics.group_delay[g] for r in result.records if r.metrics.group_delay[g] is not None]
    return out


def write_metrics_csv(result: CampaignResult, path: Path, agent_links: list[int], served: list[list[int]]) -> None:
    tp_t, d_t = result.thresholds["throughput"], result.thresholds["delay"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in result.records:
            m = r.metrics
            for i, link in enumerate(agent_links):
                for g in GROUPS:
                    key = (link, g)
                    w.writerow([
                        result.policy, r.index, i, LABELS[g], int(g in served[i]), _num(r.weights[i][g]),
                        _num(m.port_throughput.get(key)), _num(m.port_delay.get(key)),
                        _num(m.group_offered[g]), _num(m.group_throughput[g]), _num(m.group_delay[g]),
                        int(r.congested[g]), int(throughput_met(m, g, tp_t[g])), int(delay_met(m, g, d_t[g])),
                        r.actions[i], _num(r.rewards[i]), int(r.dones[i]),
                    ])


def export_distributions(result: CampaignResult, out_dir: str | Path) -> dict:
    """Write ``cdf_<policy>_<group>_<metric>.csv`` files; return the five-number summaries."""
    if len(result) == 0:
        raise PreconditionError("nothing to export from an empty campaign")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    for (lab, metric), series in distributions(result).items():
        path = out_dir / f"cdf_{result.policy}_{lab}_{metric}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", "cdf"])
            if series:
                for x, p in zip(*empirical_cdf(series)):
                    w.writerow([repr(float(x)), repr(float(p))])
        summary.setdefault(lab, {})[metric] = five_number(series) if series else None
    return summary


def write_result(result: CampaignResult, out_dir: str | Path, agent_links: list[int], served: list[list[int]]) -> dict:
    """All result files for one campaign; returns the summary dictionary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result, out_dir / "metrics.csv", agent_links, served)
    quart = export_distributions(result, out_dir) if len(result) else {}
    summary = {
        "scenario": result.scenario,
        "policy": result.policy,
        "seed": result.seed,
        "snapshots": len(result),
        "thresholds": result.thresholds,
        "sla": result.sla(),
        "beta": result.beta,
        "feature_bandwidth_kbps": result.bandwidth_kbps,
        "quartiles": quart,
        "loss_curve": list(result.loss_curve),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def read_cdf(path: Path) -> list[float]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [float(v) for v, _ in rows[1:]]


def compare_results(dirs: list[str | Path], out_dir: str | Path) -> dict:
    """Merge result directories: side-by-side SLA table and combined CDFs.

    Columns follow the order of ``dirs``.
    """
    if not dirs:
        raise ConfigError("compare needs at least one result directory")
    summaries = []
    for d in dirs:
        p = Path(d) / "summary.json"
        if not p.is_file():
            raise ConfigError(f"no summary.json in {d}")
        summaries.append((Path(d), json.loads(p.read_text())))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [s["policy"] for _, s in summaries]

    table = []
    for kind in ("throughput", "delay"):
        for lab in LABELS:
            table.append([kind, lab] + [s["sla"][kind][lab] for _, s in summaries])
    with open(out_dir / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sla", "group"] + names)
        for row in table:
            w.writerow(row[:2] + ["" if v is None else repr(float(v)) for v in row[2:]])

    for lab in LABELS:
        for metric in METRICS:
            with open(out_dir / f"cdf_{lab}_{metric}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["policy", "value", "cdf"])
                for d, s in summaries:
                    f = d / f"cdf_{s['policy']}_{lab}_{metric}.csv"
                    if not f.is_file():
                        raise ConfigError(f"missing {f}")
                    vals = read_cdf(f)
                    if vals:
                        for x, p in zip(*empirical_cdf(vals)):
                            w.writerow([s["policy"], repr(float(x)), repr(float(p))])
    merged = {"policies": names, "sla": table}
    (out_dir / "compare.json").write_text(json.dumps(merged, indent=2) + "\n")
    return merged
