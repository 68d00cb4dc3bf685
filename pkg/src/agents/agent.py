"""
Agents

An agent owns a belief store, a perceptor over the container, the actuators,
a mailbox and its adopted plans. Its deliberation cycle always runs in the same
order: perceive, deliver mailbox, evaluate commitment triggers, advance plans.
"""

import logging
import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Deque, Dict, Iterable, List, Optional, Tuple

from ..components.context import ComponentContext
from ..components.errors import ContainerError
from ..utils.settings import AgentSettings
from .actuators import Actuators
from .beliefs import TRUE, BeliefAtom, BeliefStore
from .errors import ActionFailed
from .perceptor import EventManagerPerceptor
from .plans import (
    Directive,
    InterleaveStrategy,
    PlanNode,
    PlanReport,
    PlanRun,
    PlanStatus,
    bind_plan,
    execute,
    round_robin,
)
from .transport import AclMessage, MessageTransport, Performative

ApplicationAction = Callable[..., Optional[Iterable[BeliefAtom]]]


@dataclass
class Commitment:
    trigger: BeliefAtom
    plan: PlanNode
    repeat: bool = False
    fired: bool = False


class Agent:
    def __init__(self, agent_id: str, container, transport: Optional[MessageTransport] = None,
                 context: Optional[ComponentContext] = None, settings: Optional[AgentSettings] = None):
        self.id = agent_id
        self.container = container
        self.transport = transport
        self.context = context or container.root
        self.settings = settings or AgentSettings()
        self.logger = logging.getLogger(f"hybrid-indexer.agent.{agent_id}")
        self.beliefs = BeliefStore()
        self.perceptor = EventManagerPerceptor(agent_id, container)
        self.actuators = Actuators(self)
        self.strategy: InterleaveStrategy = round_robin
        self.commitments: List[Commitment] = []
        self.plans: List[PlanRun] = []
        self.reports: List[PlanReport] = []
        self.owned_components: List[str] = []
        self.actions: Dict[str, Tuple[ApplicationAction, Optional[int]]] = {}
        self.cycle = 0
        self.sent_count = 0
        self.retired = False
        self._mailbox: Deque[AclMessage] = deque()
        self._mailbox_lock = threading.Lock()

    # -- acting ----------------------------------------------------------------

    def register_action(self, name: str, action: ApplicationAction, arity: Optional[int] = None) -> None:
        """Make an application action usable as an ACT leaf"""
        if self.actuators.handles(name):
            raise ValueError(f"{name} is a built-in actuator")
        self.actions[name] = (action, arity)

    def execute_directive(self, directive: Directive) -> List[BeliefAtom]:
        """
        Execute one directive and apply its belief deltas

        Returns:
            List[BeliefAtom]: The atoms asserted

        Raises:
            ActionFailed: The directive failed; no belief was changed
        """
        try:
            asserted, retracted = self._perform(directive)
        except ActionFailed:
            raise
        except Exception as e:
            raise ActionFailed(f"{directive} failed: {str(e)}", directive=directive, cause=e) from e
        for query in retracted:
            self.beliefs.retract_belief(query)
        for belief in asserted:
            self.beliefs.assert_belief(belief)
        self.logger.debug(f"{directive} -> {', '.join(str(b) for b in asserted)}")
        return asserted

    def _perform(self, directive: Directive):
        if self.actuators.handles(directive.action):
            return self.actuators.execute(directive)
        if directive.action not in self.actions:
            raise ActionFailed(f"Unknown action {directive.action}", directive=directive)
        action, arity = self.actions[directive.action]
        if arity is not None and len(directive.args) != arity:
            raise ActionFailed(f"{directive.action} takes {arity} arguments", directive=directive)
        return list(action(*directive.args) or []), []

    # -- plans -----------------------------------------------------------------

    def commit(self, plan: PlanNode, trigger: BeliefAtom = TRUE, repeat: bool = False) -> Commitment:
        """Adopt plan once trigger is believed; TRUE adopts it on the next cycle"""
        commitment = Commitment(trigger, plan, repeat)
        self.commitments.append(commitment)
        return commitment

    def adopt(self, plan: PlanNode) -> PlanRun:
        run = PlanRun(plan, execute(plan, self, self.strategy))
        self.plans.append(run)
        return run

    def run_plan(self, plan: PlanNode, max_cycles: int = 1000) -> PlanReport:
        """
        Adopt plan and drive deliberation cycles in the caller's thread until
        it settles or max_cycles pass (then the report stays PENDING)
        """
        run = self.adopt(plan)
        for _ in range(max_cycles):
            if run.done:
                break
            self.step()
        return PlanReport.of(run)

    def _evaluate_commitments(self) -> None:
        for commitment in self.commitments:
            if commitment.fired and not commitment.repeat:
                continue
            matches = self.beliefs.query(commitment.trigger)
            if matches:
                commitment.fired = True
                self.adopt(bind_plan(commitment.plan, matches[0]))
        self.commitments = [c for c in self.commitments if c.repeat or not c.fired]

    def _advance_plans(self) -> None:
        for run in list(self.plans):
            if run.advance() == PlanStatus.PENDING:
                continue
            self.plans.remove(run)
            report = PlanReport.of(run)
            self.reports.append(report)
            if report.status == PlanStatus.FAILED:
                self.logger.warning(f"{run.plan_id} failed at {report.failed_leaf}: {report.error}")

    # -- messaging -------------------------------------------------------------

    def deliver(self, message: AclMessage) -> None:
        """Transport callback; may run on any thread"""
        with self._mailbox_lock:
            self._mailbox.append(message)

    def _drain_mailbox(self) -> List[AclMessage]:
        with self._mailbox_lock:
            messages = list(self._mailbox)
            self._mailbox.clear()
        return messages

    def send(self, performative: Performative, receiver: str, content: Any = None,
             conversation_id: str = "") -> AclMessage:
        message = AclMessage(performative, self.id, receiver, content, conversation_id)
        self.transport.send(message)
        self.sent_count += 1
        return message

    def handle_message(self, message: AclMessage) -> None:
        """Default: believe the atom carried by an INFORM"""
        if message.performative == Performative.INFORM and isinstance(message.content, BeliefAtom):
            self.beliefs.assert_belief(message.content)

    # -- deliberation ----------------------------------------------------------

    def start(self) -> None:
        """Called once by the platform before the first cycle"""

    def tick(self) -> None:
        """Application behaviour at the end of every cycle"""

    def step(self) -> None:
        self.cycle += 1
        self.perceptor.perceive(self.beliefs)
        for message in self._drain_mailbox():
            self.handle_message(message)
        self._evaluate_commitments()
        self._advance_plans()
        self.tick()

    def retire(self) -> None:
        """Ask the platform to remove this agent after the current cycle"""
        self.retired = True

    def on_remove(self) -> None:
        """Unload every component this agent created"""
        for component_id in reversed(self.owned_components):
            if self.container.find_record(component_id) is not None:
                try:
                    self.container.unload(component_id)
                except ContainerError as e:
                    self.logger.warning(f"Could not unload {component_id}: {str(e)}")
        self.owned_components.clear()
        self.perceptor.close()
