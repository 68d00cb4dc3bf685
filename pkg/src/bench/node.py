#!/usr/bin/env python3
"""
Node Process

Entry point of one benchmark node: `python -m src.bench.node --spec FILE`.
The JSON spec names the node, its peers, the run directories, the resolved
settings and the agents to start. The process runs until the orchestrator
sends a shutdown request or its parent process goes away.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import psutil

from ..agents.errors import TransportDown
from ..agents.transport import SocketTransport
from ..backchannel.endpoint import Endpoint
from ..pipeline.agents import Mode, NodeEnvironment
from ..pipeline.node import PipelineNode
from ..utils.common_utils import setup_logging
from ..utils.env_loader import log_level_override
from ..utils.settings import settings_from_dict

logger = logging.getLogger('hybrid-indexer.node')

PARENT_POLL = 1.0


@dataclass
class NodeSpec:
    node_id: str
    mode: str
    addresses: Dict[str, str]
    nodes: List[str]
    corpus_dir: str
    claims_dir: str
    index_dir: str
    settings: Dict
    agents: List[Tuple[str, str]] = field(default_factory=list)
    manager: str = ""
    port_base: int = 0
    log_file: Optional[str] = None
    parent_pid: Optional[int] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict) -> "NodeSpec":
        raw = dict(raw)
        raw["agents"] = [tuple(pair) for pair in raw.get("agents", [])]
        return cls(**raw)

    def save(self, path: str) -> str:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path: str) -> "NodeSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _parent_alive(pid: Optional[int]) -> bool:
    return pid is None or psutil.pid_exists(pid)


def run_node(spec: NodeSpec) -> int:
    settings = settings_from_dict(spec.settings)
    setup_logging(log_level_override() or settings.logging.level, spec.log_file)
    peers = {node: Endpoint.parse(address) for node, address in spec.addresses.items() if node != spec.node_id}
    transport = SocketTransport(spec.node_id, Endpoint.parse(spec.addresses[spec.node_id]), peers,
                                connect_timeout=settings.backchannel.connect_timeout)
    try:
        transport.start()
    except TransportDown as e:
        logger.error(f"Node {spec.node_id} cannot start: {str(e)}")
        return 2

    env = NodeEnvironment(spec.node_id, Mode(spec.mode), spec.corpus_dir, spec.claims_dir, spec.index_dir,
                          settings=settings, nodes=spec.nodes, port_base=spec.port_base, manager=spec.manager)
    node = PipelineNode(env, transport)
    try:
        node.start(spec.agents, with_manager=bool(spec.manager) and spec.manager.startswith(f"{spec.node_id}:"))
        logger.info(f"Node {spec.node_id} running {len(spec.agents)} agent(s) in {env.mode.value} mode")
        while not node.stopped.wait(PARENT_POLL):
            if not _parent_alive(spec.parent_pid):
                logger.warning(f"Orchestrator {spec.parent_pid} is gone, stopping {spec.node_id}")
                break
    finally:
        node.shutdown()
        transport.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description='Indexing pipeline node')
    parser.add_argument('--spec', type=str, required=True, help='JSON node specification file')
    args = parser.parse_args(argv)
    if not os.path.exists(args.spec):
        print(f"Error: node spec not found: {args.spec}", file=sys.stderr)
        return 2
    return run_node(NodeSpec.load(args.spec))


if __name__ == '__main__':
    sys.exit(main())
