"""
Experiment Orchestration

Runs one (mode, node count) configuration `repeats` times. Each repeat spawns
one process per node on loopback, seeds the initial agents round-robin over
the nodes, polls the shared index manifest until it holds `doc_target`
documents, then asks every node controller for its report and shuts the nodes
down.
"""

import itertools
import json
import logging
import os
import queue
import shutil
import statistics
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..agents.beliefs import atom
from ..agents.errors import AgentError
from ..agents.transport import AclMessage, Performative, SocketTransport
from ..backchannel.endpoint import Endpoint
from ..pipeline.advertising import AGENT_TYPES, Team
from ..pipeline.agents import Mode, controller_id, manager_id
from ..pipeline.index_store import IndexStore
from ..utils.settings import Settings
from .corpus import corpus_files, generate_corpus
from .errors import IncompleteIndex, RunTimeout
from .node import NodeSpec

logger = logging.getLogger('hybrid-indexer.bench')

ORCHESTRATOR = "bench"
ORCHESTRATOR_AGENT = f"{ORCHESTRATOR}:orchestrator"
MAX_NODES = 4
REPLY_TIMEOUT = 10.0
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

_conversations = itertools.count(1)


@dataclass
class ExperimentConfig:
    mode: Mode
    nodes: int = 1
    doc_target: int = 3000
    corpus_seed: int = 7
    repeats: int = 3
    out_dir: str = "./results"
    settings: Settings = field(default_factory=Settings)
    corpus_dir: Optional[str] = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if not 1 <= self.nodes <= MAX_NODES:
            raise ValueError(f"nodes must be in 1..{MAX_NODES}, got {self.nodes}")
        if self.doc_target < 1:
            raise ValueError("doc_target must be positive")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")

    @property
    def base_port(self) -> int:
        return self.settings.bench.base_port

    @property
    def label(self) -> str:
        return f"{self.mode.value.lower()}-{self.nodes}n"

    def policy(self) -> Dict[str, float]:
        policy = self.settings.pipeline.policy
        return {"W": policy.window, "H": policy.halt_duration, "K": policy.persistence,
                "P": self.settings.pipeline.advertise_period}


@dataclass
class RepeatMetrics:
    repeat: int
    wall_time_s: float
    docs_indexed: int
    acl_msgs: int
    backchannel_bytes: int
    per_sender: Dict[str, int] = field(default_factory=dict)
    traces: Dict[str, List[int]] = field(default_factory=dict)
    actions: List[str] = field(default_factory=list)
    rss_mib: float = 0.0
    cpu_seconds: float = 0.0
    duplicates: int = 0

    @property
    def accounting_ok(self) -> bool:
        """The message count equals the sum of the per-agent send counts"""
        return self.acl_msgs == sum(self.per_sender.values())


@dataclass
class RunMetrics:
    mode: str
    nodes: int
    doc_target: int
    policy: Dict[str, float] = field(default_factory=dict)
    repeats: List[RepeatMetrics] = field(default_factory=list)

    @property
    def wall_times(self) -> List[float]:
        return [r.wall_time_s for r in self.repeats]

    @property
    def mean_wall_time(self) -> float:
        return statistics.mean(self.wall_times) if self.repeats else 0.0

    @property
    def mean_acl_msgs(self) -> float:
        return statistics.mean(r.acl_msgs for r in self.repeats) if self.repeats else 0.0

    @property
    def mean_backchannel_bytes(self) -> float:
        return statistics.mean(r.backchannel_bytes for r in self.repeats) if self.repeats else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunMetrics":
        repeats = [RepeatMetrics(**r) for r in raw.get("repeats", [])]
        return cls(raw["mode"], int(raw["nodes"]), int(raw["doc_target"]), dict(raw.get("policy", {})), repeats)

    def save(self, directory: str) -> str:
        path = os.path.join(directory, f"metrics-{self.mode.lower()}-{self.nodes}n.json")
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path


def initial_agents(node_ids: List[str], settings: Settings) -> Dict[str, List[Tuple[str, str]]]:
    """Initial agents placed round-robin over the nodes: gatherers, translators, then indexers"""
    teams = settings.pipeline.teams
    sizes = [(Team.GATHER, teams.gatherers), (Team.TRANSLATE, teams.translators), (Team.INDEX, teams.indexers)]
    placement: Dict[str, List[Tuple[str, str]]] = {node: [] for node in node_ids}
    slot = 0
    for team, size in sizes:
        type_name = AGENT_TYPES[team]
        for n in range(1, size + 1):
            node = node_ids[slot % len(node_ids)]
            placement[node].append((type_name, f"{node}:{type_name.lower()}-{n}"))
            slot += 1
    return placement


def prepare_corpus(config: ExperimentConfig) -> str:
    corpus_dir = config.corpus_dir or os.path.join(config.out_dir, f"corpus-s{config.corpus_seed}-n{config.doc_target}")
    if not os.path.isdir(corpus_dir) or len(corpus_files(corpus_dir)) < config.doc_target:
        generate_corpus(config.doc_target, config.corpus_seed, corpus_dir)
    available = len(corpus_files(corpus_dir))
    if available < config.doc_target:
        raise ValueError(f"Corpus {corpus_dir} holds {available} documents, fewer than {config.doc_target}")
    return corpus_dir


class Orchestrator:
    """The orchestrator's end of the socket transport: requests out, replies into a queue"""

    def __init__(self, config: ExperimentConfig, node_ids: List[str]):
        host = config.settings.backchannel.host
        self.addresses = {ORCHESTRATOR: str(Endpoint(host, config.base_port))}
        for k, node in enumerate(node_ids):
            self.addresses[node] = str(Endpoint(host, config.base_port + 1 + k))
        peers = {node: Endpoint.parse(self.addresses[node]) for node in node_ids}
        self.transport = SocketTransport(ORCHESTRATOR, Endpoint.parse(self.addresses[ORCHESTRATOR]), peers,
                                         connect_timeout=config.settings.backchannel.connect_timeout)
        self.replies: "queue.Queue[AclMessage]" = queue.Queue()
        self.transport.register(ORCHESTRATOR_AGENT, self._deliver)

    def _deliver(self, message: AclMessage) -> None:
        if not message.is_broadcast:
            self.replies.put(message)

    def start(self) -> None:
        self.transport.start()

    def ask(self, node_ids: List[str], request: str, timeout: float = REPLY_TIMEOUT) -> Dict[str, AclMessage]:
        """Send one REQUEST per node controller and wait for their answers"""
        pending: Dict[str, str] = {}
        for node in node_ids:
            conversation = f"{ORCHESTRATOR}#{next(_conversations)}"
            try:
                self.transport.send(AclMessage(Performative.REQUEST, ORCHESTRATOR_AGENT, controller_id(node),
                                               atom(request), conversation))
                pending[conversation] = node
            except AgentError as e:
                logger.warning(f"{request} request to {node} failed: {str(e)}")
        answers: Dict[str, AclMessage] = {}
        deadline = time.monotonic() + timeout
        while pending and time.monotonic() < deadline:
            try:
                message = self.replies.get(timeout=max(0.0, deadline - time.monotonic()))
            except queue.Empty:
                break
            node = pending.pop(message.conversation_id, None)
            if node is not None:
                answers[node] = message
        for node in pending.values():
            logger.warning(f"No answer to {request} from {node}")
        return answers

    def close(self) -> None:
        self.transport.close()


def _spawn(spec: NodeSpec, spec_path: str, stderr_path: str) -> subprocess.Popen:
    spec.save(spec_path)
    with open(stderr_path, "w") as stderr:
        return subprocess.Popen([sys.executable, "-m", "src.bench.node", "--spec", spec_path],
                                cwd=PROJECT_ROOT, stdout=subprocess.DEVNULL, stderr=stderr)


def _stop(processes: List[subprocess.Popen], timeout: float = REPLY_TIMEOUT) -> None:
    for process in processes:
        try:
            process.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            logger.warning(f"Node process {process.pid} did not stop, killing it")
            process.kill()
            process.wait()


def run_repeat(config: ExperimentConfig, corpus_dir: str, repeat: int) -> RepeatMetrics:
    """
    One timed run of the pipeline over corpus_dir

    Raises:
        RunTimeout: The manifest did not reach doc_target within the run ceiling
        IncompleteIndex: A node process exited before the target was reached
    """
    settings = config.settings
    run_dir = os.path.abspath(os.path.join(config.out_dir, f"{config.label}-r{repeat}"))
    shutil.rmtree(run_dir, ignore_errors=True)
    claims_dir, index_dir, logs_dir = (os.path.join(run_dir, d) for d in ("claims", "index", "logs"))
    for directory in (claims_dir, index_dir, logs_dir):
        os.makedirs(directory, exist_ok=True)

    node_ids = [f"n{k}" for k in range(config.nodes)]
    placement = initial_agents(node_ids, settings)
    manager = manager_id(node_ids[0]) if settings.pipeline.manager_enabled else ""
    orchestrator = Orchestrator(config, node_ids)
    orchestrator.start()
    store = IndexStore(index_dir)
    processes: List[subprocess.Popen] = []
    reports: Dict[str, Dict[str, Any]] = {}
    logger.info(f"{config.label} repeat {repeat}: {config.doc_target} documents, nodes {', '.join(node_ids)}")
    started = time.monotonic()
    try:
        for k, node in enumerate(node_ids):
            spec = NodeSpec(node, config.mode.value, orchestrator.addresses, node_ids, os.path.abspath(corpus_dir),
                            claims_dir, index_dir, settings.to_dict(), placement[node], manager,
                            port_base=config.base_port + 100 + 50 * k,
                            log_file=os.path.join(logs_dir, f"node-{k}.log"), parent_pid=os.getpid())
            processes.append(_spawn(spec, os.path.join(run_dir, f"node-{k}.json"),
                                    os.path.join(logs_dir, f"node-{k}.stderr")))
        while store.count() < config.doc_target:
            dead = [p for p in processes if p.poll() is not None]
            if dead:
                raise IncompleteIndex(f"Node process {dead[0].pid} exited with {dead[0].returncode} "
                                      f"after {store.count()} of {config.doc_target} documents")
            if time.monotonic() - started > settings.bench.run_ceiling:
                raise RunTimeout(f"{config.label} repeat {repeat} indexed {store.count()} of "
                                 f"{config.doc_target} documents in {settings.bench.run_ceiling}s")
            time.sleep(settings.bench.poll_interval)
        wall_time = time.monotonic() - started
        for node, message in orchestrator.ask(node_ids, "report").items():
            if isinstance(message.content, dict):
                reports[node] = message.content
    finally:
        orchestrator.ask(node_ids, "shutdown")
        orchestrator.close()
        _stop(processes)

    manifest = store.manifest()
    metrics = RepeatMetrics(
        repeat=repeat,
        wall_time_s=round(wall_time, 3),
        docs_indexed=len(manifest),
        acl_msgs=sum(r["transport"]["sent"] for r in reports.values()),
        backchannel_bytes=sum(r["backchannel"]["bytes_sent"] for r in reports.values()),
        duplicates=len(manifest) - len(set(manifest)),
    )
    for report in reports.values():
        for sender, count in report["transport"]["per_sender"].items():
            metrics.per_sender[sender] = metrics.per_sender.get(sender, 0) + count
        metrics.rss_mib = max(metrics.rss_mib, float(report.get("rss_mib", 0.0)))
        metrics.cpu_seconds += float(report.get("cpu_seconds", 0.0))
        if "traces" in report:
            metrics.traces = report["traces"]
            metrics.actions = [str(action) for action in report.get("actions", [])]
    if metrics.duplicates:
        raise IncompleteIndex(f"Manifest of {config.label} repeat {repeat} lists {metrics.duplicates} duplicate(s)")
    if len(reports) < len(node_ids):
        logger.warning(f"Only {len(reports)} of {len(node_ids)} node reports arrived; counters are partial")
    logger.info(f"{config.label} repeat {repeat}: {metrics.wall_time_s}s, {metrics.acl_msgs} ACL messages, "
                f"{metrics.backchannel_bytes} backchannel bytes")
    return metrics


def run_experiment(config: ExperimentConfig) -> RunMetrics:
    """
    Run every repeat of one configuration

    Returns:
        RunMetrics: Per-repeat and mean metrics, also saved as JSON in out_dir
    """
    os.makedirs(config.out_dir, exist_ok=True)
    corpus_dir = prepare_corpus(config)
    metrics = RunMetrics(config.mode.value, config.nodes, config.doc_target, config.policy())
    for repeat in range(1, config.repeats + 1):
        metrics.repeats.append(run_repeat(config, corpus_dir, repeat))
    metrics.save(config.out_dir)
    logger.info(f"{config.label}: mean wall time {metrics.mean_wall_time:.3f}s over {config.repeats} repeat(s)")
    return metrics
