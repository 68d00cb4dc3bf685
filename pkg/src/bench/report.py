"""
Comparison Report

Per-(mode, nodes) means and the HYBRID / ACL_ONLY wall-time ratio per node
count, next to fixed reference ratios.
"""

import csv
import glob
import json
import logging
import os
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..pipeline.agents import Mode
from .errors import MismatchedConfigs
from .experiment import RepeatMetrics, RunMetrics

logger = logging.getLogger('hybrid-indexer.report')

CSV_COLUMNS = ["mode", "nodes", "repeat", "wall_time_s", "acl_msgs", "backchannel_bytes"]
RESULTS_FILE = "results.csv"
# HYBRID time as a percentage of ACL_ONLY time, by node count
REFERENCE_RATIOS = {1: 44.48, 2: 54.15}


@dataclass
class Summary:
    doc_target: Optional[int]
    means: Dict[Tuple[str, int], Dict[str, float]] = field(default_factory=dict)
    ratios: Dict[int, float] = field(default_factory=dict)


def time_ratio(hybrid_time: float, acl_time: float) -> float:
    """HYBRID wall time as a percentage of ACL_ONLY wall time"""
    if acl_time <= 0:
        raise ValueError("ACL_ONLY wall time must be positive")
    return round(100.0 * hybrid_time / acl_time, 2)


def summarize(metrics: Sequence[RunMetrics]) -> Summary:
    """
    Raises:
        MismatchedConfigs: Fewer than two metric sets, or differing doc targets
    """
    if len(metrics) < 2:
        raise MismatchedConfigs(f"A comparison needs at least two metric sets, got {len(metrics)}")
    targets = {m.doc_target for m in metrics if m.doc_target}
    if len(targets) > 1:
        raise MismatchedConfigs(f"Metric sets index different document counts: {sorted(targets)}")
    summary = Summary(targets.pop() if targets else None)
    grouped: Dict[Tuple[str, int], List[RepeatMetrics]] = {}
    for m in metrics:
        grouped.setdefault((m.mode, m.nodes), []).extend(m.repeats)
    for key, repeats in sorted(grouped.items()):
        if not repeats:
            continue
        summary.means[key] = {
            "wall_time_s": statistics.mean(r.wall_time_s for r in repeats),
            "acl_msgs": statistics.mean(r.acl_msgs for r in repeats),
            "backchannel_bytes": statistics.mean(r.backchannel_bytes for r in repeats),
            "repeats": len(repeats),
        }
    for (mode, nodes), means in summary.means.items():
        if mode != Mode.HYBRID.value:
            continue
        acl = summary.means.get((Mode.ACL_ONLY.value, nodes))
        if acl is not None:
            summary.ratios[nodes] = time_ratio(means["wall_time_s"], acl["wall_time_s"])
    return summary


def render(summary: Summary) -> str:
    lines = []
    if summary.doc_target:
        lines.append(f"Documents per run: {summary.doc_target}")
    lines.append(f"{'mode':<10}{'nodes':>6}{'runs':>6}{'mean time (s)':>16}{'mean ACL msgs':>16}"
                 f"{'mean bc bytes':>16}")
    for (mode, nodes), means in summary.means.items():
        lines.append(f"{mode:<10}{nodes:>6}{int(means['repeats']):>6}{means['wall_time_s']:>16.3f}"
                     f"{means['acl_msgs']:>16.1f}{means['backchannel_bytes']:>16.1f}")
    lines.append("")
    for nodes in sorted(set(summary.ratios) | set(REFERENCE_RATIOS)):
        measured = f"{summary.ratios[nodes]:.2f}%" if nodes in summary.ratios else "n/a"
        reference = f"{REFERENCE_RATIOS[nodes]:.2f}%" if nodes in REFERENCE_RATIOS else "n/a"
        lines.append(f"HYBRID/ACL_ONLY time, {nodes} node(s): {measured} (reference {reference})")
    return "\n".join(lines)


def csv_rows(metrics: Sequence[RunMetrics]) -> List[Dict[str, object]]:
    return [{"mode": m.mode, "nodes": m.nodes, "repeat": r.repeat, "wall_time_s": r.wall_time_s,
             "acl_msgs": r.acl_msgs, "backchannel_bytes": r.backchannel_bytes}
            for m in metrics for r in m.repeats]


def write_csv(metrics: Sequence[RunMetrics], path: str) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(csv_rows(metrics))
    return path


def read_csv(path: str) -> List[RunMetrics]:
    """Rebuild metric sets from results.csv; the document target is unknown there"""
    runs: Dict[Tuple[str, int], RunMetrics] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["mode"], int(row["nodes"]))
            run = runs.setdefault(key, RunMetrics(key[0], key[1], 0))
            run.repeats.append(RepeatMetrics(int(row["repeat"]), float(row["wall_time_s"]), 0,
                                             int(row["acl_msgs"]), int(row["backchannel_bytes"])))
    return list(runs.values())


def load_metrics(directory: str) -> List[RunMetrics]:
    """Metric sets saved in directory: metrics-*.json files, else results.csv"""
    paths = sorted(glob.glob(os.path.join(directory, "metrics-*.json")))
    if paths:
        metrics = []
        for path in paths:
            with open(path) as f:
                metrics.append(RunMetrics.from_dict(json.load(f)))
        return metrics
    results = os.path.join(directory, RESULTS_FILE)
    if os.path.exists(results):
        return read_csv(results)
    return []


def report(metrics: Sequence[RunMetrics], out_dir: Optional[str] = None) -> str:
    """
    Comparison table of metric sets; with out_dir also writes results.csv

    Raises:
        MismatchedConfigs: See summarize
    """
    text = render(summarize(metrics))
    if out_dir:
        path = write_csv(metrics, os.path.join(out_dir, RESULTS_FILE))
        logger.info(f"Wrote {path}")
    return text
