"""
Client Ports and Server Endpoints

Client-side endpoints of REQUIRED interfaces. A port never holds a reference to
its provider; every call resolves the current binding through the container,
so rebinding (explicit or hot-swap) takes effect on the next call.
"""

from typing import TYPE_CHECKING, Callable, List, Optional, Protocol, runtime_checkable

from ..components.errors import NoBinding, ProviderInactive
from ..components.interfaces import BindingRecord, InterfaceRef
from .envelope import DataEnvelope
from .events import Event
from .service import DeliveryMode, Routing

if TYPE_CHECKING:
    from ..components.component import Component


@runtime_checkable
class PullSource(Protocol):
    def pull(self, max_items: int) -> DataEnvelope: ...


@runtime_checkable
class PushSink(Protocol):
    def push(self, envelope: DataEnvelope) -> None: ...


ServiceHandler = Callable[[DataEnvelope], DataEnvelope]


class EventSourceEndpoint:
    """Server side of an EVENT interface: the events the component emits under `event_name`"""

    def __init__(self, component_id: str, event_name: str):
        self.component_id = component_id
        self.event_name = event_name


class RequiredPort:
    def __init__(self, owner: "Component", name: str):
        self.owner = owner
        self.name = name

    @property
    def ref(self) -> InterfaceRef:
        return InterfaceRef(self.owner.id, self.name)

    @property
    def container(self):
        return self.owner.container

    def bindings(self) -> List[BindingRecord]:
        if self.container is None:
            return []
        return self.container.bindings_for(self.ref)

    @property
    def is_bound(self) -> bool:
        return bool(self.bindings())

    def _current_binding(self) -> BindingRecord:
        bindings = self.bindings()
        if not bindings:
            raise ProviderInactive(f"{self.ref} has no active provider")
        return bindings[0]

    def __repr__(self):
        return f"{type(self).__name__}({self.ref})"


class ServicePort(RequiredPort):
    def call(self, request: DataEnvelope) -> DataEnvelope:
        return self.container.collaboration.invoke_service(self._current_binding(), request)


class PullPort(RequiredPort):
    def pull(self, max_items: int) -> DataEnvelope:
        return self.container.collaboration.pull_data(self._current_binding(), max_items)


class PushPort(RequiredPort):
    def __init__(self, owner: "Component", name: str, multicast: bool = False):
        super().__init__(owner, name)
        self.multicast = multicast

    def push(self, envelope: DataEnvelope, mode=None, routing=None) -> None:
        if self.container is None:
            raise NoBinding(f"{self.ref} is not loaded")
        routing = routing or (Routing.MULTICAST if self.multicast else Routing.UNICAST)
        self.container.collaboration.push_data(self.ref, envelope, mode or DeliveryMode.SYNC, routing)


class EventListenerPort(RequiredPort):
    """Client side of an EVENT interface; the container routes bound events to `handler`"""

    def __init__(self, owner: "Component", name: str, handler: Callable[[Event], Optional[bool]]):
        super().__init__(owner, name)
        self.handler = handler

    def on_event(self, event: Event) -> Optional[bool]:
        return self.handler(event)
