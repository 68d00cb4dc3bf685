"""
Component Types

Base class for every component type. A subclass declares its interfaces by
overriding get_interfaces_info(), validates its own properties, and may hook
into lifecycle changes. Framework services (event dispatching, scheduling,
logging) are reached through the owning container.
"""

import logging
from typing import TYPE_CHECKING, Any, Callable, ClassVar, Dict, List, Optional

from ..collaboration.envelope import DataEnvelope
from ..collaboration.ports import (
    EventListenerPort,
    EventSourceEndpoint,
    PullPort,
    PullSource,
    PushPort,
    PushSink,
    ServiceHandler,
    ServicePort,
)
from .interfaces import CollaborationStyle, DataFlow, Direction, InterfaceDescriptor

if TYPE_CHECKING:
    from .container import Container
    from .context import ComponentContext

Scalar = (str, int, float, bool)


class Component:
    """
    Base component type

    Attributes:
        type_id: Registered type name; defaults to the class name
        stateless: Eligible as a hot-swap substitute when True
        composite: Owns an inner context when True
    """

    type_id: ClassVar[str] = ""
    stateless: ClassVar[bool] = False
    composite: ClassVar[bool] = False

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        self.id = component_id
        self.properties: Dict[str, Any] = dict(properties or {})
        self.container: Optional["Container"] = None
        self.context: Optional["ComponentContext"] = None
        self.inner_context: Optional["ComponentContext"] = None
        self.logger = logging.getLogger(f"hybrid-indexer.component.{component_id}")
        self._interfaces: Optional[List[InterfaceDescriptor]] = None

    @classmethod
    def type_name(cls) -> str:
        return cls.type_id or cls.__name__

    # -- interface description -------------------------------------------------

    def get_interfaces_info(self) -> List[InterfaceDescriptor]:
        """Override to declare the component's interfaces"""
        return []

    def interfaces(self) -> List[InterfaceDescriptor]:
        if self._interfaces is None:
            self._interfaces = list(self.get_interfaces_info())
        return self._interfaces

    def port(self, name: str) -> Any:
        """Endpoint of this component's REQUIRED interface `name`"""
        for descriptor in self.interfaces():
            if descriptor.name == name and descriptor.direction == Direction.REQUIRED:
                return descriptor.endpoint
        raise KeyError(f"{self.id} has no required interface {name}")

    def provide_service(self, name: str, payload_type: str, handler: ServiceHandler) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.SERVICE, payload_type, Direction.PROVIDED, handler)

    def provide_pull(self, name: str, payload_type: str, source: PullSource) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.DATA, payload_type, Direction.PROVIDED,
                                   source, flow=DataFlow.PULL)

    def provide_push(self, name: str, payload_type: str, sink: PushSink) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.DATA, payload_type, Direction.PROVIDED,
                                   sink, flow=DataFlow.PUSH)

    def provide_events(self, name: str, event_name: str) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.EVENT, event_name, Direction.PROVIDED,
                                   EventSourceEndpoint(self.id, event_name))

    def require_service(self, name: str, payload_type: str) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.SERVICE, payload_type, Direction.REQUIRED,
                                   ServicePort(self, name))

    def require_pull(self, name: str, payload_type: str) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.DATA, payload_type, Direction.REQUIRED,
                                   PullPort(self, name), flow=DataFlow.PULL)

    def require_push(self, name: str, payload_type: str, multicast: bool = False) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.DATA, payload_type, Direction.REQUIRED,
                                   PushPort(self, name, multicast), flow=DataFlow.PUSH, multicast=multicast)

    def require_events(self, name: str, event_name: str, handler: Callable) -> InterfaceDescriptor:
        return InterfaceDescriptor(name, CollaborationStyle.EVENT, event_name, Direction.REQUIRED,
                                   EventListenerPort(self, name, handler), multicast=True)

    # -- properties ------------------------------------------------------------

    def validate_property(self, key: str, value: Any) -> None:
        """Raise ValueError to reject a configure() value"""

    def on_property_changed(self, key: str, value: Any) -> None:
        pass

    # -- lifecycle hooks -------------------------------------------------------

    def on_load(self) -> None:
        pass

    def on_activate(self) -> None:
        pass

    def on_deactivate(self) -> None:
        pass

    def on_unload(self) -> None:
        pass

    # -- framework services ----------------------------------------------------

    def emit(self, name: str, payload: Any = None, consumable: bool = False):
        """Emit an event through the container's dispatcher"""
        if self.container is None:
            return None
        return self.container.emit_event(self.id, name, payload, consumable)

    def run_task(self, target: Callable, name: Optional[str] = None) -> None:
        """
        Run target(stop_event) on the container scheduler; it is stopped
        automatically when the component is deactivated or unloaded.
        """
        self.container.scheduler.start(self.id, target, name or f"{self.id}-task")

    @staticmethod
    def empty(payload_type: str) -> DataEnvelope:
        return DataEnvelope.empty(payload_type)
