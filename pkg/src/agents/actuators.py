"""
Actuators

The eight component actuators: each maps a directive onto one container
operation and, on success, reports the ontology atoms that now hold. A failed
directive changes no belief.
"""

import logging
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Tuple

from ..backchannel.errors import BackchannelError
from ..components.errors import ContainerError
from ..components.interfaces import CollaborationStyle, Direction, InterfaceRef, LifecycleState
from .beliefs import BeliefAtom, atom
from .errors import ActionFailed
from .plans import ACTUATOR_ARITY, Directive

if TYPE_CHECKING:
    from .agent import Agent

logger = logging.getLogger('hybrid-indexer.actuators')

# asserted atoms, retracted queries
Delta = Tuple[List[BeliefAtom], List[BeliefAtom]]


def interface_beliefs(agent: "Agent", component_id: str) -> List[BeliefAtom]:
    """serverInterface/4 and clientInterface/5 atoms describing a component"""
    container = agent.container
    beliefs = []
    for descriptor in container.describe_interfaces(component_id):
        if descriptor.direction == Direction.PROVIDED:
            beliefs.append(atom("serverInterface", component_id, descriptor.name,
                                descriptor.style.value, descriptor.payload_type))
        else:
            is_bound = bool(container.bindings_for(InterfaceRef(component_id, descriptor.name)))
            beliefs.append(atom("clientInterface", component_id, descriptor.name,
                                descriptor.style.value, descriptor.payload_type, is_bound))
    return beliefs


class Actuators:
    def __init__(self, agent: "Agent"):
        self.agent = agent
        self._builtin: Dict[str, Callable[..., Delta]] = {
            "create": self.create,
            "remove": self.remove,
            "bind": self.bind,
            "configure": self.configure,
            "activate": self.activate,
            "deactivate": self.deactivate,
            "focus": self.focus,
            "lookup": self.lookup,
        }

    def handles(self, action: str) -> bool:
        return action in self._builtin

    def execute(self, directive: Directive) -> Delta:
        """
        Run a built-in directive

        Returns:
            (asserted, retracted) belief deltas, not yet applied

        Raises:
            ActionFailed: Wrong arity, or the container refused the operation
        """
        arities = ACTUATOR_ARITY[directive.action]
        if len(directive.args) not in arities:
            raise ActionFailed(f"{directive.action} takes {arities} arguments, got {len(directive.args)}",
                               directive=directive)
        try:
            return self._builtin[directive.action](*directive.args)
        except (ContainerError, BackchannelError, ValueError, KeyError) as e:
            logger.debug(f"{self.agent.id}: {directive} failed: {str(e)}")
            raise ActionFailed(f"{directive} failed: {type(e).__name__}: {str(e)}",
                               directive=directive, cause=e) from e

    def create(self, component_id: str, type_id: str) -> Delta:
        self.agent.container.load_component(self.agent.context, component_id, type_id)
        self.agent.owned_components.append(component_id)
        return [atom("created", component_id), atom("component", component_id)], []

    def remove(self, component_id: str) -> Delta:
        self.agent.container.unload(component_id)
        if component_id in self.agent.owned_components:
            self.agent.owned_components.remove(component_id)
        self.agent.perceptor.unfocus(component_id)
        return ([atom("removed", component_id)],
                [atom("component", component_id), atom("focusingOn", self.agent.id, component_id),
                 atom("property", component_id, "?p", "?v")])

    def bind(self, client_id: str, client_iface: str, server_id: str, server_iface: str) -> Delta:
        binding = self.agent.container.bind(InterfaceRef(client_id, client_iface), InterfaceRef(server_id, server_iface))
        return [atom("bound", str(binding.client), str(binding.server))], []

    def configure(self, component_id: str, key: str, value: Any) -> Delta:
        self.agent.container.configure(component_id, key, value)
        return [atom("property", component_id, key, value)], []

    def activate(self, component_id: str) -> Delta:
        self.agent.container.set_lifecycle(None, component_id, LifecycleState.ACTIVE)
        return [atom("activated", component_id)], []

    def deactivate(self, component_id: str) -> Delta:
        self.agent.container.set_lifecycle(None, component_id, LifecycleState.DEACTIVATED)
        return [atom("deactivated", component_id)], []

    def focus(self, component_id: str) -> Delta:
        self.agent.container.get_record(component_id)
        self.agent.perceptor.focus(component_id)
        return [atom("focusingOn", self.agent.id, component_id)], []

    def lookup(self, *args: Any) -> Delta:
        """lookup(id) describes one component; lookup(style, class) brokers providers"""
        if len(args) == 1:
            return interface_beliefs(self.agent, args[0]), []
        style, payload_type = CollaborationStyle(args[0]), args[1]
        found = self.agent.container.broker(self.agent.context, (style, payload_type))
        return [atom("serverInterface", ref.component_id, ref.interface, style.value, payload_type)
                for ref in found], []
