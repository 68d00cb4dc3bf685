"""
Pipeline Node

One node of an indexing run: its container with the pipeline component
types and the IndexStore services, an agent platform on the node's
transport, the node controller and, on the first node, the performance
manager.
"""

import logging
import threading
from functools import partial
from typing import Any, Dict, Iterable, List, Optional, Tuple

import psutil

from ..agents.platform import AgentPlatform
from ..agents.transport import MessageTransport
from ..backchannel.adapters import traffic
from ..components.container import Container
from .advertising import AGENT_TYPES
from .agents import (
    AGENT_CLASSES,
    IndexerAgent,
    NodeControllerAgent,
    NodeEnvironment,
    PerformanceManagerAgent,
    controller_id,
)
from .components import PIPELINE_COMPONENT_TYPES

logger = logging.getLogger('hybrid-indexer.node')


class PipelineNode:
    def __init__(self, env: NodeEnvironment, transport: MessageTransport):
        self.env = env
        self.transport = transport
        self.container = Container(env.settings.container, name=env.node_id)
        self.container.register_types(*PIPELINE_COMPONENT_TYPES)
        self.platform = AgentPlatform(env.node_id, self.container, transport, env.settings.agents)
        for team, agent_class in AGENT_CLASSES.items():
            self.platform.register_agent_type(AGENT_TYPES[team], partial(agent_class, env=env))
        self.store_ids = self._load_stores()
        self.controller: Optional[NodeControllerAgent] = None
        self.manager: Optional[PerformanceManagerAgent] = None
        self.stopped = threading.Event()
        self._process = psutil.Process()
        self._process.cpu_percent(None)

    def _load_stores(self) -> List[str]:
        store_ids = []
        for n in range(1, self.env.settings.pipeline.index_stores + 1):
            store_id = f"store-{n}"
            self.container.load_component(None, store_id, "IndexStore", {"index_dir": self.env.index_dir})
            self.container.activate(store_id)
            store_ids.append(store_id)
        return store_ids

    def start(self, agents: Iterable[Tuple[str, str]] = (), with_manager: bool = False) -> None:
        """
        Start the controller, optionally the manager, then the given agents

        Args:
            agents: (agent type, agent id) pairs
            with_manager: Host the performance manager on this node
        """
        self.controller = NodeControllerAgent(self.platform, controller_id(self.env.node_id),
                                              report=self.report, on_shutdown=self.stopped.set)
        self.platform.add_agent(self.controller)
        if with_manager and self.env.manager:
            self.manager = PerformanceManagerAgent(self.platform, self.env.manager, self.env)
            self.platform.add_agent(self.manager)
        for type_name, agent_id in agents:
            self.platform.create_agent(type_name, agent_id)

    def indexed(self) -> int:
        return sum(agent.worker.processed for agent in self.platform.agents()
                   if isinstance(agent, IndexerAgent) and agent.worker is not None)

    def report(self) -> Dict[str, Any]:
        """Metrics of this node process, sent to the orchestrator at the end of a run"""
        memory = self._process.memory_info()
        cpu = self._process.cpu_times()
        report: Dict[str, Any] = {
            "node": self.env.node_id,
            "mode": self.env.mode.value,
            "transport": self.transport.counters(),
            "backchannel": traffic.snapshot(),
            "indexed": self.indexed(),
            "agents": sorted(agent.id for agent in self.platform.agents()),
            "rss_mib": round(memory.rss / (1024 * 1024), 2),
            "cpu_percent": self._process.cpu_percent(None),
            "cpu_seconds": round(cpu.user + cpu.system, 3),
        }
        if self.manager is not None:
            report["traces"] = self.manager.traces()
            report["actions"] = [action.to_atom() for action in self.manager.applied]
        return report

    def shutdown(self) -> None:
        self.platform.shutdown()
        self.container.shutdown()
        logger.info(f"Node {self.env.node_id} stopped")
