"""
Balancing Policy

Pure decision rules of the performance manager. Queue-length histories are
per-team totals, one sample per advertisement received from the team.

- sustained growth of an upstream team over a window: halt that team for H
- growth in K consecutive windows: terminate one upstream agent (never the
  last one) and create a downstream agent on the least-loaded node
- upstream queues empty for a whole window while no downstream agent made
  progress: briefly halt the starved downstream team
"""

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from ..agents.beliefs import BeliefAtom, atom
from ..utils.settings import PolicySettings
from .advertising import AGENT_TYPES, UPSTREAM, Advertisement, Team


class ActionKind(str, Enum):
    NONE = "NONE"
    HALT = "HALT"
    RESUME = "RESUME"
    TERMINATE = "TERMINATE"
    CREATE = "CREATE"
    ROUTE = "ROUTE"


@dataclass(frozen=True)
class ManagementAction:
    """
    Attributes:
        kind: What to do
        target: Agent id (HALT, RESUME, TERMINATE, ROUTE) or node id (CREATE)
        team: Team the action is about
        duration: Seconds (HALT and ROUTE)
        agent_type: Agent type to create (CREATE)
        source: Directed source (ROUTE, and the initial route of a CREATE)
    """
    kind: ActionKind
    target: str = ""
    team: Optional[Team] = None
    duration: float = 0.0
    agent_type: str = ""
    source: str = ""

    def to_atom(self) -> BeliefAtom:
        return atom("management", self.kind.value, self.target, self.team.value if self.team else "",
                    self.duration, self.agent_type, self.source)


NO_ACTION = ManagementAction(ActionKind.NONE)


@dataclass
class BalanceState:
    """Consecutive growth windows per team, carried between assessments"""
    growth_windows: Dict[Team, int] = field(default_factory=lambda: defaultdict(int))


def is_growing(series: Sequence[int], window: int, threshold: float) -> bool:
    """Last `window` samples never decrease and rise by at least `threshold` overall"""
    if window < 2 or len(series) < window:
        return False
    samples = list(series[-window:])
    if any(later < earlier for earlier, later in zip(samples, samples[1:])):
        return False
    first, last = samples[0], samples[-1]
    if last <= first:
        return False
    return first == 0 or (last - first) >= threshold * first


def least_loaded(node_loads: Mapping[str, int]) -> str:
    return min(node_loads, key=lambda node: (node_loads[node], node))


def route_target(upstream: Iterable[Advertisement], sourcing: Mapping[str, str]) -> str:
    """Producer with the most queued work per consumer already pulling from it"""
    consumers: Dict[str, int] = defaultdict(int)
    for source in sourcing.values():
        consumers[source] += 1
    candidates = [ad for ad in upstream if ad.queue_len > 0]
    if not candidates:
        return ""
    best = max(candidates, key=lambda ad: (ad.queue_len / (1 + consumers[ad.agent]), ad.agent))
    return best.agent


def assess_balance(history: Mapping[Team, Sequence[int]], teams: Mapping[Team, Sequence[Advertisement]],
                   node_loads: Mapping[str, int], settings: PolicySettings, state: BalanceState,
                   upstream_teams: Optional[Iterable[Team]] = None,
                   sourcing: Optional[Mapping[str, str]] = None) -> List[ManagementAction]:
    """
    Assess each upstream -> downstream pair once

    Args:
        history: Per-team queue-length totals, oldest first
        teams: Latest advertisement of every agent, by team
        node_loads: ACTIVE pipeline components per node
        settings: W, H, K, growth threshold and starvation halt
        state: Growth-window counters, updated in place
        upstream_teams: Only assess pairs whose upstream team is listed
        sourcing: consumer -> source it currently pulls from

    Returns:
        List[ManagementAction]: [NONE] when nothing needs doing
    """
    window = settings.window
    actions: List[ManagementAction] = []
    for downstream, upstream in UPSTREAM.items():
        if upstream_teams is not None and upstream not in set(upstream_teams):
            continue
        upstream_ads = list(teams.get(upstream, ()))
        downstream_ads = list(teams.get(downstream, ()))
        series = history.get(upstream, ())
        if is_growing(series, window, settings.growth_threshold):
            state.growth_windows[upstream] += 1
            if state.growth_windows[upstream] >= settings.persistence:
                state.growth_windows[upstream] = 0
                if len(upstream_ads) > 1:
                    victim = min(upstream_ads, key=lambda ad: (ad.queue_len, ad.agent))
                    actions.append(ManagementAction(ActionKind.TERMINATE, victim.agent, upstream))
                if node_loads:
                    actions.append(ManagementAction(
                        ActionKind.CREATE, least_loaded(node_loads), downstream,
                        agent_type=AGENT_TYPES[downstream],
                        source=route_target(upstream_ads, sourcing or {})))
            else:
                actions.extend(ManagementAction(ActionKind.HALT, ad.agent, upstream, settings.halt_duration)
                               for ad in sorted(upstream_ads, key=lambda ad: ad.agent))
            continue
        state.growth_windows[upstream] = 0
        recent = list(series[-window:])
        starved = (len(recent) >= window and not any(recent) and bool(downstream_ads)
                   and not any(ad.progress for ad in downstream_ads))
        if starved:
            actions.extend(ManagementAction(ActionKind.HALT, ad.agent, downstream, settings.starvation_halt)
                           for ad in sorted(downstream_ads, key=lambda ad: ad.agent))
    return actions or [NO_ACTION]
