"""
Pipeline Agents

DataGatherer, Translator and Indexer agents manage one worker component each
(plus the output queue of a producer) and decide where their worker's input
comes from. The PerformanceManager watches advertisements and steers the
teams; one NodeController per node creates agents on request and reports the
node's metrics.

Data moves in one of two modes:

- HYBRID: a consumer binds its worker to the chosen producer's queue, locally
  or through a backchannel; agents only talk about which source to use.
- ACL_ONLY: every bundle travels as the content of a REQUEST/INFORM exchange
  and lands in the consumer's inbox queue.
"""

import itertools
import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, ClassVar, Dict, List, Optional, Set, Tuple

from ..agents.agent import Agent
from ..agents.beliefs import BeliefAtom, atom
from ..agents.errors import ActionFailed, AgentError, TransportDown, UnknownAgent, UnknownReceiver
from ..agents.plans import Directive, PlanNode, act, do_when, par, seq
from ..agents.transport import BROADCAST, AclMessage, Performative
from ..backchannel.channels import open_pull_client, start_pull_server
from ..backchannel.endpoint import Endpoint
from ..backchannel.errors import BackchannelError
from ..collaboration.envelope import DataEnvelope
from ..components.errors import ContainerError
from ..components.interfaces import BindingMode, InterfaceRef, LifecycleState
from ..utils.settings import Settings
from .advertising import UPSTREAM, Advertisement, AdvertisementBook, Advertiser, Team, select_source
from .documents import BUNDLE_PAYLOAD_TYPE
from .errors import SourceEmpty, SourceGone
from .policy import ActionKind, BalanceState, ManagementAction, assess_balance

logger = logging.getLogger('hybrid-indexer.pipeline')

MANAGER_NAME = "manager"
CONTROLLER_NAME = "controller"


class Mode(str, Enum):
    ACL_ONLY = "ACL_ONLY"
    HYBRID = "HYBRID"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        aliases = {"acl": cls.ACL_ONLY, "acl_only": cls.ACL_ONLY, "hybrid": cls.HYBRID}
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise ValueError(f"Unknown mode: {text}") from None


def controller_id(node_id: str) -> str:
    return f"{node_id}:{CONTROLLER_NAME}"


def manager_id(node_id: str) -> str:
    return f"{node_id}:{MANAGER_NAME}"


@dataclass
class NodeEnvironment:
    """
    What the pipeline agents of one node share

    Attributes:
        node_id: This node
        mode: HYBRID or ACL_ONLY
        corpus_dir / claims_dir / index_dir: Shared run directories
        settings: Resolved runtime settings
        nodes: Every node of the run, this one included
        port_base: First backchannel port this node may listen on
        manager: Agent id of the performance manager
    """
    node_id: str
    mode: Mode
    corpus_dir: str
    claims_dir: str
    index_dir: str
    settings: Settings = field(default_factory=Settings)
    nodes: List[str] = field(default_factory=list)
    port_base: int = 0
    manager: str = ""
    _ports: itertools.count = field(init=False, repr=False)

    def __post_init__(self):
        if not self.nodes:
            self.nodes = [self.node_id]
        self._ports = itertools.count(self.port_base)

    @property
    def serves_backchannels(self) -> bool:
        return self.mode == Mode.HYBRID and len(self.nodes) > 1 and self.port_base > 0

    def next_port(self) -> int:
        return next(self._ports)


@dataclass(frozen=True)
class Fetch:
    """How a consumer is now acquiring items from a source"""
    source: str
    via: str
    conversation_id: str = ""


class PipelineAgent(Agent):
    """
    Base of the three worker-managing agents

    Handles advertising, management requests (halt, resume, terminate) and
    retirement once its components hold no more work.
    """

    team: ClassVar[Team]
    worker_type: ClassVar[str]
    produces: ClassVar[bool] = True

    def __init__(self, platform, agent_id: str, env: NodeEnvironment, route: str = ""):
        super().__init__(agent_id, platform.container, platform.transport, settings=platform.settings)
        self.platform = platform
        self.env = env
        self.pipeline = env.settings.pipeline
        name = agent_id.rpartition(":")[2]
        self.worker_id = f"{name}-worker"
        self.queue_id = f"{name}-queue" if self.produces else ""
        self.server_id = ""
        self.endpoint = ""
        self.book = AdvertisementBook()
        self.advertiser = Advertiser(self.pipeline.advertise_period)
        self.ready = False
        self.halted_until: Optional[float] = None
        self.terminating = False
        self.advertise_now = False
        self.ads_sent = 0
        self._last_processed = 0
        self.register_action("ready", self._mark_ready, 0)
        self.register_action("serve_queue", self._serve_queue, 0)
        self.commit(self.bootstrap_plan())

    # -- bootstrap ---------------------------------------------------------------

    def bootstrap_plan(self) -> PlanNode:
        raise NotImplementedError

    def _mark_ready(self):
        self.ready = True
        self.logger.info(f"{self.id} ready on {self.env.node_id}")
        return [atom("ready", self.id)]

    def _serve_queue(self):
        """Expose the output queue on a backchannel when other nodes may pull from it"""
        if not self.queue_id or not self.env.serves_backchannels:
            return []
        endpoint = Endpoint(self.pipeline_host(), self.env.next_port())
        try:
            self.server_id = start_pull_server(self.container, self.context, InterfaceRef(self.queue_id, "pull"),
                                               endpoint)
        except BackchannelError as e:
            raise ActionFailed(f"Cannot serve {self.queue_id}: {str(e)}", cause=e) from e
        self.owned_components.append(self.server_id)
        self.endpoint = str(endpoint)
        return [atom("serving", self.queue_id, self.endpoint)]

    def pipeline_host(self) -> str:
        return self.env.settings.backchannel.host

    # -- component access --------------------------------------------------------

    def _instance(self, component_id: str):
        if not component_id or self.container.find_record(component_id) is None:
            return None
        return self.container.instance(component_id)

    @property
    def worker(self):
        return self._instance(self.worker_id)

    def queue_len(self) -> int:
        queue = self._instance(self.queue_id)
        return len(queue) if queue is not None else 0

    def active_components(self) -> int:
        count = 0
        for component_id in self.owned_components:
            record = self.container.find_record(component_id)
            if record is not None and record.state == LifecycleState.ACTIVE:
                count += 1
        return count

    def _set_paused(self, paused: bool) -> None:
        if self.worker is None:
            return
        try:
            self.execute_directive(Directive("configure", (self.worker_id, "paused", paused)))
        except ActionFailed as e:
            self.logger.warning(f"Could not set paused={paused} on {self.worker_id}: {str(e)}")

    # -- advertising -------------------------------------------------------------

    @property
    def current_source(self) -> str:
        return ""

    def advertisement(self, now: float) -> Advertisement:
        worker = self.worker
        processed = worker.processed if worker is not None else 0
        progress, self._last_processed = processed - self._last_processed, processed
        return Advertisement(self.id, self.team, self.queue_len(), self.env.node_id, now, self.queue_id,
                             self.endpoint, self.active_components(), self.current_source, progress)

    # -- management requests -----------------------------------------------------

    def halt(self, duration: float) -> None:
        """Stop gathering or fetching for duration seconds, then resume on its own"""
        self.halted_until = time.monotonic() + duration
        self._set_paused(True)
        self.logger.info(f"{self.id} halted for {duration}s")

    def resume(self) -> None:
        self.halted_until = None
        if not self.terminating:
            self._set_paused(False)
        self.logger.info(f"{self.id} resumed")

    def begin_terminate(self) -> None:
        if self.terminating:
            return
        self.terminating = True
        self.logger.info(f"{self.id} terminating")

    def drained(self) -> bool:
        worker = self.worker
        return (worker is None or worker.idle) and self.queue_len() == 0

    # -- messaging ---------------------------------------------------------------

    def handle_message(self, message: AclMessage) -> None:
        content = message.content
        if message.performative == Performative.INFORM and isinstance(content, BeliefAtom):
            if content.predicate == "advertisement":
                ad = Advertisement.from_atom(content)
                if ad.agent != self.id:
                    self.book.update(ad)
                return
            if content.predicate == "retired":
                self.book.forget(content.args[0])
                self.on_source_retired(content.args[0])
                return
        if message.performative == Performative.REQUEST and isinstance(content, BeliefAtom):
            self.handle_request(message, content)
            return
        self.on_message(message)

    def handle_request(self, message: AclMessage, request: BeliefAtom) -> None:
        if request.predicate == "fetch" and self.queue_id:
            self.serve_fetch(message, int(request.args[0]))
            return
        if request.predicate == "halt":
            self.halt(float(request.args[0]))
        elif request.predicate == "resume":
            self.resume()
        elif request.predicate == "terminate":
            self.begin_terminate()
        elif request.predicate == "route" and isinstance(self, ConsumerAgent):
            self.set_route(request.args[0], float(request.args[1]))
        else:
            self._reply(message, Performative.REFUSE, atom("unsupported", request.predicate))
            return
        self._reply(message, Performative.AGREE, request)

    def _reply(self, message: AclMessage, performative: Performative, content) -> bool:
        try:
            self.send(performative, message.sender, content, message.conversation_id)
            return True
        except (UnknownReceiver, TransportDown) as e:
            self.logger.warning(f"Reply to {message.sender} lost: {str(e)}")
            return False

    def serve_fetch(self, message: AclMessage, max_items: int) -> None:
        """Answer a fetch with queued bundles (INFORM) or REFUSE when the queue is empty"""
        queue = self._instance(self.queue_id)
        envelope = queue.pull(max(1, max_items)) if queue is not None else DataEnvelope.empty(BUNDLE_PAYLOAD_TYPE)
        if envelope.is_empty:
            self._reply(message, Performative.REFUSE, atom("empty", self.id))
            return
        if not self._reply(message, Performative.INFORM, envelope.payload):
            queue.push(envelope)

    def on_message(self, message: AclMessage) -> None:
        super().handle_message(message)

    def on_source_retired(self, agent_id: str) -> None:
        pass

    # -- deliberation ------------------------------------------------------------

    def tick(self) -> None:
        if not self.ready or self.retired:
            return
        now = time.monotonic()
        self._consume_events()
        if self.halted_until is not None and now >= self.halted_until:
            self.resume()
        if self.terminating and self.drained():
            self._retire_now()
            return
        if self.halted_until is None:
            self.pursue(now)
            queue_len = self.queue_len()
            if self.advertise_now or self.advertiser.due(queue_len, now):
                advertise(self, now)

    def pursue(self, now: float) -> None:
        """Per-cycle input acquisition; producers without input do nothing"""

    def _consume_events(self) -> None:
        query = atom("event", "?c", "?d")
        for bindings in self.beliefs.query(query):
            self.on_event(bindings["?c"], bindings["?d"])
        self.beliefs.retract_belief(query)

    def on_event(self, component_id: str, details: BeliefAtom) -> None:
        if details.predicate == "queue_grew":
            self.advertise_now = True
        elif details.predicate == "malformed_doc":
            self.logger.warning(f"{component_id} skipped a malformed document: {details}")

    def _retire_now(self) -> None:
        try:
            self.send(Performative.INFORM, BROADCAST, atom("retired", self.id))
        except TransportDown as e:
            self.logger.warning(f"Retirement notice of {self.id} incomplete: {str(e)}")
        self.logger.info(f"{self.id} retired")
        self.retire()


def advertise(agent: PipelineAgent, now: Optional[float] = None) -> AclMessage:
    """Broadcast the agent's current advertisement"""
    now = time.monotonic() if now is None else now
    ad = agent.advertisement(now)
    message = agent.send(Performative.INFORM, BROADCAST, ad.to_atom())
    agent.advertiser.sent(ad.queue_len, now)
    agent.advertise_now = False
    agent.ads_sent += 1
    return message


class GathererAgent(PipelineAgent):
    team = Team.GATHER
    worker_type = "DataGatherer"

    def __init__(self, platform, agent_id: str, env: NodeEnvironment, route: str = ""):
        super().__init__(platform, agent_id, env, route)
        self.register_action("specify_data_queue", self._specify_data_queue, 1)

    def _specify_data_queue(self, name: str):
        return [atom("dataQueueName", name)]

    def bootstrap_plan(self) -> PlanNode:
        worker = self.worker_id
        return seq(
            par(
                act("create", worker, self.worker_type),
                do_when(atom("dataQueueName", "?q"), seq(
                    act("create", "?q", "DataQueue"),
                    act("bind", worker, "output", "?q", "input"),
                    act("focus", worker),
                    act("focus", "?q"),
                )),
                act("specify_data_queue", self.queue_id),
            ),
            act("configure", worker, "corpus_dir", self.env.corpus_dir),
            act("configure", worker, "claims_dir", self.env.claims_dir),
            act("configure", worker, "batch", self.pipeline.batch_size),
            act("configure", worker, "idle_sleep", self.pipeline.worker_idle_sleep),
            act("activate", self.queue_id),
            act("serve_queue"),
            act("activate", worker),
            act("ready"),
        )

    def begin_terminate(self) -> None:
        super().begin_terminate()
        self._set_paused(True)

    def on_event(self, component_id: str, details: BeliefAtom) -> None:
        super().on_event(component_id, details)
        if details.predicate == "source_exhausted":
            self.logger.info(f"{self.id}: corpus exhausted after {details.args[0]} bundles")


class ConsumerAgent(PipelineAgent):
    """
    Agent whose worker pulls from an upstream producer

    Greedy source choice unless a ROUTE directive is live. In ACL_ONLY mode the
    worker pulls from a private inbox queue the agent fills from INFORM replies.
    """

    def __init__(self, platform, agent_id: str, env: NodeEnvironment, route: str = ""):
        name = agent_id.rpartition(":")[2]
        self.inbox_id = f"{name}-inbox" if env.mode == Mode.ACL_ONLY else ""
        self.route: Optional[Tuple[str, float]] = None
        self.source = ""
        self.client_id = ""
        self.reselect = True
        self.marks: Dict[str, float] = {}
        self.outstanding: Optional[Tuple[str, str, float]] = None
        self.late: Dict[str, str] = {}
        self.items_fetched = 0
        self.fetches: List[Fetch] = []
        self._conversations = itertools.count(1)
        super().__init__(platform, agent_id, env, route)
        if route:
            self.set_route(route, env.settings.pipeline.policy.halt_duration)

    @property
    def upstream(self) -> Team:
        return UPSTREAM[self.team]

    @property
    def current_source(self) -> str:
        return self.source

    def input_plan(self) -> List[PlanNode]:
        """Steps that give the worker its inbox in ACL_ONLY mode"""
        if not self.inbox_id:
            return []
        return [
            act("create", self.inbox_id, "DataQueue"),
            act("bind", self.worker_id, "source", self.inbox_id, "pull"),
            act("activate", self.inbox_id),
        ]

    # -- source choice -----------------------------------------------------------

    def set_route(self, source: str, duration: float) -> None:
        self.route = (source, time.monotonic() + duration)
        self.reselect = True
        self.logger.info(f"{self.id} routed to {source} for {duration}s")

    def live_route(self, now: float) -> Optional[str]:
        if self.route is None:
            return None
        if now >= self.route[1]:
            self.route = None
            self.reselect = True
            return None
        return self.route[0]

    def _excluded(self) -> Set[str]:
        """Sources found empty or gone that have not advertised since"""
        excluded = set()
        for agent_id, marked in self.marks.items():
            ad = self.book.get(agent_id)
            if ad is None or ad.timestamp <= marked:
                excluded.add(agent_id)
        return excluded

    def desired_source(self, now: float) -> Optional[str]:
        return select_source(self.book.ads(self.upstream), self.live_route(now), exclude=self._excluded())

    def mark(self, source: str) -> None:
        if source:
            self.marks[source] = time.monotonic()

    # -- acquisition -------------------------------------------------------------

    def pursue(self, now: float) -> None:
        if self.terminating:
            return
        if self.env.mode == Mode.HYBRID:
            self._pursue_wired(now)
        else:
            self._pursue_requests(now)

    def _pursue_wired(self, now: float) -> None:
        if self.source and not self._wired():
            self.disconnect()
            self.reselect = True
        directed = self.live_route(now)
        if self.source and not self.reselect and (directed is None or directed == self.source):
            return
        target = self.desired_source(now)
        if target is None:
            return
        self.reselect = False
        if target == self.source:
            return
        try:
            fetch_from(self, target, self.pipeline.pull_max_items)
        except (SourceEmpty, SourceGone) as e:
            self.logger.info(f"{self.id}: {str(e)}")
            self.mark(target)
            self.reselect = True

    def _pursue_requests(self, now: float) -> None:
        if self.outstanding is not None:
            conversation, source, sent_at = self.outstanding
            if now - sent_at < self.pipeline.fetch_timeout:
                return
            self.logger.warning(f"{self.id}: fetch {conversation} from {source} timed out")
            self.mark(source)
            self.late[conversation] = source
            self.outstanding = None
        inbox = self._instance(self.inbox_id)
        if inbox is None or len(inbox) > 0:
            return
        target = self.desired_source(now)
        if target is None:
            return
        try:
            fetch_from(self, target, self.pipeline.pull_max_items)
        except (SourceEmpty, SourceGone) as e:
            self.logger.debug(f"{self.id}: {str(e)}")
            self.mark(target)

    def _wired(self) -> bool:
        worker = self.worker
        if worker is None or not worker.port("source").is_bound:
            return False
        if self.client_id:
            client = self._instance(self.client_id)
            return client is not None and client.connected
        return True

    def connect(self, ad: Advertisement) -> Fetch:
        """
        Bind the worker's source to the producer's queue: directly when it is on
        this node, else through a TcpPullClient to the producer's backchannel

        Raises:
            SourceGone: The queue or its backchannel cannot be reached
        """
        self.disconnect()
        if ad.node == self.env.node_id:
            try:
                self.execute_directive(Directive("bind", (self.worker_id, "source", ad.queue, "pull")))
            except ActionFailed as e:
                raise SourceGone(f"Cannot bind to {ad.queue} of {ad.agent}: {str(e)}") from e
            via = "local"
        else:
            if not ad.endpoint:
                raise SourceGone(f"{ad.agent} on {ad.node} serves no backchannel")
            try:
                self.client_id = open_pull_client(
                    self.container, self.context, InterfaceRef(self.worker_id, "source"),
                    Endpoint.parse(ad.endpoint), timeout=self.env.settings.backchannel.connect_timeout,
                    pull_timeout=self.env.settings.backchannel.pull_timeout)
            except (BackchannelError, ContainerError) as e:
                raise SourceGone(f"No backchannel to {ad.agent} at {ad.endpoint}: {str(e)}") from e
            self.owned_components.append(self.client_id)
            self.perceptor.focus(self.client_id)
            via = "backchannel"
        self.source = ad.agent
        self.marks.pop(ad.agent, None)
        self.beliefs.assert_belief(atom("sourcing", self.id, ad.agent))
        return Fetch(ad.agent, via)

    def disconnect(self) -> None:
        if self.client_id:
            client_id, self.client_id = self.client_id, ""
            if client_id in self.owned_components:
                self.owned_components.remove(client_id)
            self.perceptor.unfocus(client_id)
            if self.container.find_record(client_id) is not None:
                try:
                    self.container.unload(client_id)
                except ContainerError as e:
                    self.logger.warning(f"Could not unload {client_id}: {str(e)}")
        elif self.worker is not None and self.worker.port("source").is_bound:
            self.container.unbind(InterfaceRef(self.worker_id, "source"))
        if self.source:
            self.beliefs.retract_belief(atom("sourcing", self.id, self.source))
        self.source = ""

    def request_items(self, source: str, max_items: int) -> Fetch:
        conversation = f"{self.id}#{next(self._conversations)}"
        try:
            self.send(Performative.REQUEST, source, atom("fetch", max_items), conversation)
        except (UnknownReceiver, TransportDown) as e:
            raise SourceGone(f"Cannot reach {source}: {str(e)}") from e
        self.outstanding = (conversation, source, time.monotonic())
        self.source = source
        return Fetch(source, "acl", conversation)

    def on_message(self, message: AclMessage) -> None:
        content = message.content
        if message.performative == Performative.INFORM and isinstance(content, bytes):
            self._accept(message, DataEnvelope.from_payload(content, BUNDLE_PAYLOAD_TYPE))
            return
        if message.performative == Performative.REFUSE and (self._answers(message)
                                                            or message.conversation_id in self.late):
            self._settle(message)
            self.mark(message.sender)
            return
        super().on_message(message)

    def _answers(self, message: AclMessage) -> bool:
        return self.outstanding is not None and self.outstanding[0] == message.conversation_id

    def _settle(self, message: AclMessage) -> None:
        if self._answers(message):
            self.outstanding = None
        self.late.pop(message.conversation_id, None)

    def _accept(self, message: AclMessage, envelope: DataEnvelope) -> None:
        # late replies are kept too, the producer already gave the items up
        self._settle(message)
        inbox = self._instance(self.inbox_id)
        if inbox is None:
            self.logger.error(f"{self.id} got {envelope.item_count} item(s) from {message.sender} with no inbox")
            return
        inbox.push(envelope)
        self.items_fetched += envelope.item_count

    def on_event(self, component_id: str, details: BeliefAtom) -> None:
        super().on_event(component_id, details)
        if details.predicate == "source_empty" and self.env.mode == Mode.HYBRID:
            self.mark(self.source)
            self.reselect = True
        elif details.predicate == "source_gone" or (details.predicate == "channel_closed"
                                                     and component_id == self.client_id):
            self.logger.info(f"{self.id} lost source {self.source}")
            self.mark(self.source)
            self.disconnect()
            self.reselect = True

    def on_source_retired(self, agent_id: str) -> None:
        self.marks.pop(agent_id, None)
        for conversation in [c for c, source in self.late.items() if source == agent_id]:
            del self.late[conversation]
        if self.route is not None and self.route[0] == agent_id:
            self.route = None
        if agent_id == self.source and self.env.mode == Mode.HYBRID and not self._wired():
            self.disconnect()
            self.reselect = True

    # -- termination -------------------------------------------------------------

    def begin_terminate(self) -> None:
        super().begin_terminate()
        if self.env.mode == Mode.HYBRID:
            self.disconnect()

    def drained(self) -> bool:
        # a timed-out fetch may still be answered until its source retires
        if self.outstanding is not None or self.late:
            return False
        inbox = self._instance(self.inbox_id)
        if inbox is not None and len(inbox) > 0:
            return False
        return super().drained()


def fetch_from(consumer: ConsumerAgent, source: str, max_items: int) -> Fetch:
    """
    Start acquiring items from source

    HYBRID wires the consumer's worker to the source (local binding or
    backchannel) and the worker pulls from then on. ACL_ONLY sends one fetch
    REQUEST; the INFORM reply lands in the consumer's inbox.

    Raises:
        SourceGone: No advertisement from source, or it cannot be reached
        SourceEmpty: source last advertised an empty queue (ACL_ONLY, undirected)
    """
    ad = consumer.book.get(source)
    if ad is None:
        raise SourceGone(f"No advertisement from {source}")
    directed = consumer.route is not None and consumer.route[0] == source
    if consumer.env.mode == Mode.HYBRID:
        fetch = consumer.connect(ad)
    else:
        if ad.queue_len == 0 and not directed:
            raise SourceEmpty(f"{source} advertised an empty queue")
        fetch = consumer.request_items(source, max_items)
    consumer.fetches.append(fetch)
    return fetch


class TranslatorAgent(ConsumerAgent):
    team = Team.TRANSLATE
    worker_type = "Translator"

    def bootstrap_plan(self) -> PlanNode:
        worker = self.worker_id
        return seq(
            act("create", worker, self.worker_type),
            act("create", self.queue_id, "DataQueue"),
            act("bind", worker, "output", self.queue_id, "input"),
            *self.input_plan(),
            act("configure", worker, "batch", self.pipeline.pull_max_items),
            act("configure", worker, "idle_sleep", self.pipeline.worker_idle_sleep),
            act("focus", worker),
            act("focus", self.queue_id),
            act("activate", self.queue_id),
            act("serve_queue"),
            act("activate", worker),
            act("ready"),
        )


class IndexerAgent(ConsumerAgent):
    team = Team.INDEX
    worker_type = "Indexer"
    produces = False

    def __init__(self, platform, agent_id: str, env: NodeEnvironment, route: str = ""):
        super().__init__(platform, agent_id, env, route)
        self.register_action("bind_store", self._bind_store, 1)

    def _bind_store(self, worker: str):
        """IMPLICIT binding so a stateless substitute takes over if the store is unloaded"""
        binding = self.container.bind(InterfaceRef(worker, "store"), None, BindingMode.IMPLICIT)
        return [atom("bound", str(binding.client), str(binding.server))]

    def bootstrap_plan(self) -> PlanNode:
        worker = self.worker_id
        return seq(
            act("create", worker, self.worker_type),
            *self.input_plan(),
            act("bind_store", worker),
            act("configure", worker, "batch", self.pipeline.pull_max_items),
            act("configure", worker, "idle_sleep", self.pipeline.worker_idle_sleep),
            act("focus", worker),
            act("activate", worker),
            act("ready"),
        )


AGENT_CLASSES = {Team.GATHER: GathererAgent, Team.TRANSLATE: TranslatorAgent, Team.INDEX: IndexerAgent}


class PerformanceManagerAgent(Agent):
    """
    Samples per-team queue totals from advertisements and applies the
    balancing policy once per window of samples
    """

    def __init__(self, platform, agent_id: str, env: NodeEnvironment):
        super().__init__(agent_id, platform.container, platform.transport, settings=platform.settings)
        self.platform = platform
        self.env = env
        self.policy = env.settings.pipeline.policy
        self.book = AdvertisementBook()
        self.history: Dict[Team, List[int]] = defaultdict(list)
        self.state = BalanceState()
        self.applied: List[ManagementAction] = []
        self.acknowledged = 0
        self.terminated: Set[str] = set()
        self._samples: Dict[Team, int] = defaultdict(int)
        self._due: Set[Team] = set()
        self._ids = itertools.count(1)

    def sourcing(self) -> Dict[str, str]:
        return {b["?c"]: b["?s"] for b in self.beliefs.query(atom("sourcing", "?c", "?s"))}

    def handle_message(self, message: AclMessage) -> None:
        content = message.content
        if message.performative == Performative.AGREE:
            self.acknowledged += 1
        elif message.performative == Performative.REFUSE:
            self.logger.warning(f"{message.sender} refused {message.conversation_id}: {content}")
        elif message.performative == Performative.INFORM and isinstance(content, BeliefAtom):
            if content.predicate == "advertisement":
                self.observe(Advertisement.from_atom(content))
            elif content.predicate == "retired":
                self.book.forget(content.args[0])
                self.beliefs.retract_belief(atom("sourcing", content.args[0], "?s"))

    def observe(self, ad: Advertisement) -> None:
        if ad.agent in self.terminated or not self.book.update(ad):
            return
        self.beliefs.retract_belief(atom("sourcing", ad.agent, "?s"))
        if ad.source:
            self.beliefs.assert_belief(atom("sourcing", ad.agent, ad.source))
        self.history[ad.team].append(self.book.team_total(ad.team))
        self._samples[ad.team] += 1
        if self._samples[ad.team] >= self.policy.window:
            self._samples[ad.team] = 0
            self._due.add(ad.team)

    def tick(self) -> None:
        if not self._due:
            return
        due, self._due = set(self._due), set()
        teams = {team: self.book.ads(team) for team in Team}
        actions = assess_balance(self.history, teams, self.book.node_loads(self.env.nodes), self.policy,
                                 self.state, upstream_teams=due, sourcing=self.sourcing())
        for action in actions:
            if action.kind == ActionKind.NONE:
                continue
            try:
                apply_action(self, action)
            except (AgentError, ValueError) as e:
                self.logger.warning(f"Could not apply {action.kind.value} to {action.target}: {str(e)}")

    def traces(self) -> Dict[str, List[int]]:
        return {team.value: list(samples) for team, samples in self.history.items()}


def apply_action(manager: PerformanceManagerAgent, action: ManagementAction) -> str:
    """
    Send the request that carries out a management action

    Returns:
        str: Conversation id the target acknowledges on ('' for NONE)

    Raises:
        UnknownAgent: HALT, RESUME, TERMINATE or ROUTE names an agent that does not advertise
    """
    if action.kind == ActionKind.NONE:
        return ""
    conversation = f"{manager.id}#a{next(manager._ids)}"
    receiver = action.target
    if action.kind == ActionKind.CREATE:
        receiver = controller_id(action.target)
        agent_id = f"{action.target}:{action.agent_type.lower()}-m{next(manager._ids)}"
        content = atom("create", action.agent_type, agent_id, action.source)
    else:
        if manager.book.get(action.target) is None:
            raise UnknownAgent(f"No agent {action.target} advertises")
        if action.kind == ActionKind.HALT:
            content = atom("halt", action.duration)
        elif action.kind == ActionKind.RESUME:
            content = atom("resume")
        elif action.kind == ActionKind.ROUTE:
            content = atom("route", action.source, action.duration or manager.policy.halt_duration)
        else:
            if action.team is not None and len(manager.book.ads(action.team)) < 2:
                raise ValueError(f"{action.target} is the last agent of {action.team.value}")
            content = atom("terminate")
    try:
        manager.send(Performative.REQUEST, receiver, content, conversation)
    except UnknownReceiver as e:
        raise UnknownAgent(str(e)) from e
    if action.kind == ActionKind.TERMINATE:
        manager.terminated.add(action.target)
        manager.book.forget(action.target)
    manager.applied.append(action)
    manager.beliefs.assert_belief(action.to_atom())
    logger.info(f"{action.kind.value} {action.target} ({conversation})")
    return conversation


class NodeControllerAgent(Agent):
    """Creates agents on its node, answers report requests and shuts the node down"""

    def __init__(self, platform, agent_id: str, report: Optional[Callable[[], dict]] = None,
                 on_shutdown: Optional[Callable[[], None]] = None):
        super().__init__(agent_id, platform.container, platform.transport, settings=platform.settings)
        self.platform = platform
        self._report = report or dict
        self._on_shutdown = on_shutdown
        self.created: List[str] = []

    def handle_message(self, message: AclMessage) -> None:
        request = message.content
        if message.performative != Performative.REQUEST or not isinstance(request, BeliefAtom):
            return
        if request.predicate == "create":
            type_name, agent_id, source = request.args
            try:
                self.platform.create_agent(type_name, agent_id, route=source)
            except (AgentError, ValueError) as e:
                self.logger.warning(f"Cannot create {type_name} {agent_id}: {str(e)}")
                self._answer(message, Performative.REFUSE, atom("failed", agent_id, str(e)))
                return
            self.created.append(agent_id)
            self._answer(message, Performative.AGREE, atom("created", agent_id))
        elif request.predicate == "report":
            self._answer(message, Performative.INFORM, self._report())
        elif request.predicate == "shutdown":
            self._answer(message, Performative.AGREE, request)
            if self._on_shutdown is not None:
                self._on_shutdown()
        else:
            self._answer(message, Performative.REFUSE, atom("unsupported", request.predicate))

    def _answer(self, message: AclMessage, performative: Performative, content) -> None:
        try:
            self.send(performative, message.sender, content, message.conversation_id)
        except (UnknownReceiver, TransportDown) as e:
            self.logger.warning(f"Answer to {message.sender} lost: {str(e)}")
