"""
Advertisements

Producers broadcast the length of their output queue; consumers keep the
latest advertisement per producer and pick their source greedily.
"""

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional

from ..agents.beliefs import BeliefAtom, atom


class Team(str, Enum):
    GATHER = "GATHER"
    TRANSLATE = "TRANSLATE"
    INDEX = "INDEX"


UPSTREAM = {Team.TRANSLATE: Team.GATHER, Team.INDEX: Team.TRANSLATE}
AGENT_TYPES = {Team.GATHER: "DataGatherer", Team.TRANSLATE: "Translator", Team.INDEX: "Indexer"}


@dataclass(frozen=True)
class Advertisement:
    """
    Attributes:
        agent: Advertising agent
        team: Its team
        queue_len: Output queue length when sent (always 0 for indexers)
        node: Node hosting the agent
        timestamp: Monotonic send time
        queue: Component id of the output queue, for local binding
        endpoint: 'host:port' of the queue's backchannel server, or ''
        active_components: ACTIVE pipeline components owned by the agent
        source: Agent the advertiser currently pulls from, or ''
        progress: Items its worker finished since its previous advertisement
    """
    agent: str
    team: Team
    queue_len: int
    node: str
    timestamp: float
    queue: str = ""
    endpoint: str = ""
    active_components: int = 0
    source: str = ""
    progress: int = 0

    def to_atom(self) -> BeliefAtom:
        return atom("advertisement", self.agent, self.team.value, self.queue_len, self.node, self.timestamp,
                    self.queue, self.endpoint, self.active_components, self.source, self.progress)

    @classmethod
    def from_atom(cls, belief: BeliefAtom) -> "Advertisement":
        if belief.predicate != "advertisement" or belief.arity != 10:
            raise ValueError(f"Not an advertisement: {belief}")
        agent, team, queue_len, node, timestamp, queue, endpoint, active, source, progress = belief.args
        return cls(agent, Team(team), int(queue_len), node, float(timestamp), queue, endpoint, int(active), source,
                   int(progress))


def select_source(ads: Iterable[Advertisement], directive: Optional[str] = None,
                  exclude: Iterable[str] = ()) -> Optional[str]:
    """
    Greedy source choice

    A ROUTE directive wins outright. Otherwise the advertiser with the longest
    non-empty queue; ties go to the newest advertisement, then the smallest
    agent id. None when nothing is queued anywhere.
    """
    if directive:
        return directive
    excluded = set(exclude)
    candidates = [ad for ad in ads if ad.queue_len > 0 and ad.agent not in excluded]
    if not candidates:
        return None
    best = min(candidates, key=lambda ad: (-ad.queue_len, -ad.timestamp, ad.agent))
    return best.agent


class Advertiser:
    """Decides when to advertise: every `period` seconds and on a 0 -> positive queue transition"""

    def __init__(self, period: float):
        self.period = period
        self.last_sent: Optional[float] = None
        self.last_len = 0

    def due(self, queue_len: int, now: float) -> bool:
        if self.last_sent is None or now - self.last_sent >= self.period:
            return True
        return self.last_len == 0 and queue_len > 0

    def sent(self, queue_len: int, now: float) -> None:
        self.last_sent = now
        self.last_len = queue_len


class AdvertisementBook:
    """Latest advertisement per agent"""

    def __init__(self):
        self._ads: Dict[str, Advertisement] = {}
        self._lock = threading.Lock()

    def update(self, ad: Advertisement) -> bool:
        with self._lock:
            current = self._ads.get(ad.agent)
            if current is not None and current.timestamp > ad.timestamp:
                return False
            self._ads[ad.agent] = ad
            return True

    def forget(self, agent: str) -> None:
        with self._lock:
            self._ads.pop(agent, None)

    def get(self, agent: str) -> Optional[Advertisement]:
        with self._lock:
            return self._ads.get(agent)

    def ads(self, team: Optional[Team] = None) -> List[Advertisement]:
        with self._lock:
            return [ad for ad in self._ads.values() if team is None or ad.team == team]

    def team_total(self, team: Team) -> int:
        return sum(ad.queue_len for ad in self.ads(team))

    def node_loads(self, nodes: Iterable[str] = ()) -> Dict[str, int]:
        loads = {node: 0 for node in nodes}
        for ad in self.ads():
            loads[ad.node] = loads.get(ad.node, 0) + ad.active_components
        return loads
