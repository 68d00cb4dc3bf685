"""
Agent Platform

Hosts the agents of one node: shares the node's container and message
transport, and runs each agent's deliberation cycle on its own thread.
"""

import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..utils.settings import AgentSettings
from .agent import Agent
from .errors import UnknownAgent
from .transport import MessageTransport

logger = logging.getLogger('hybrid-indexer.platform')

AgentFactory = Callable[..., Agent]


class AgentPlatform:
    def __init__(self, node_id: str, container, transport: MessageTransport,
                 settings: Optional[AgentSettings] = None):
        self.node_id = node_id
        self.container = container
        self.transport = transport
        self.settings = settings or AgentSettings()
        self._agents: Dict[str, Agent] = {}
        self._threads: Dict[str, Tuple[threading.Thread, threading.Event]] = {}
        self._factories: Dict[str, AgentFactory] = {}
        self._lock = threading.RLock()

    def register_agent_type(self, name: str, factory: AgentFactory) -> None:
        self._factories[name] = factory

    def create_agent(self, type_name: str, agent_id: str, **kwargs: Any) -> Agent:
        """
        Instantiate a registered agent type and start it

        Raises:
            UnknownAgent: No factory registered under type_name
        """
        factory = self._factories.get(type_name)
        if factory is None:
            raise UnknownAgent(f"No agent type {type_name} on node {self.node_id}")
        agent = factory(self, agent_id, **kwargs)
        self.add_agent(agent)
        return agent

    def add_agent(self, agent: Agent, start: bool = True) -> Agent:
        with self._lock:
            if agent.id in self._agents:
                raise ValueError(f"Agent {agent.id} already exists on {self.node_id}")
            self._agents[agent.id] = agent
        self.transport.register(agent.id, agent.deliver)
        if start:
            stop = threading.Event()
            thread = threading.Thread(target=self._run, args=(agent, stop), name=f"agent-{agent.id}", daemon=True)
            with self._lock:
                self._threads[agent.id] = (thread, stop)
            thread.start()
        logger.info(f"Agent {agent.id} started on {self.node_id}")
        return agent

    def _run(self, agent: Agent, stop: threading.Event) -> None:
        try:
            agent.start()
            while not stop.is_set() and not agent.retired:
                try:
                    agent.step()
                except Exception:
                    logger.exception(f"Cycle {agent.cycle} of {agent.id} failed")
                stop.wait(self.settings.cycle_interval)
        finally:
            if agent.retired:
                self._discard(agent.id)

    def get(self, agent_id: str) -> Agent:
        with self._lock:
            agent = self._agents.get(agent_id)
        if agent is None:
            raise UnknownAgent(f"No agent {agent_id} on {self.node_id}")
        return agent

    def agents(self) -> List[Agent]:
        with self._lock:
            return list(self._agents.values())

    def remove_agent(self, agent_id: str, timeout: float = 5.0) -> None:
        """
        Stop an agent's thread and unload its components

        Raises:
            UnknownAgent: No such agent
        """
        self.get(agent_id)
        with self._lock:
            entry = self._threads.get(agent_id)
        if entry is not None:
            thread, stop = entry
            stop.set()
            if thread is not threading.current_thread():
                thread.join(timeout)
        self._discard(agent_id)

    def _discard(self, agent_id: str) -> None:
        with self._lock:
            agent = self._agents.pop(agent_id, None)
            self._threads.pop(agent_id, None)
        if agent is None:
            return
        self.transport.unregister(agent_id)
        agent.on_remove()
        logger.info(f"Agent {agent_id} removed from {self.node_id}")

    def shutdown(self) -> None:
        for agent in self.agents():
            self.remove_agent(agent.id)
