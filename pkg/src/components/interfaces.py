"""
Interface Descriptions

Types describing a component's collaboration endpoints and the bindings
between them.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class CollaborationStyle(str, Enum):
    SERVICE = "SERVICE"
    DATA = "DATA"
    EVENT = "EVENT"


class Direction(str, Enum):
    REQUIRED = "REQUIRED"
    PROVIDED = "PROVIDED"


class DataFlow(str, Enum):
    """Which side drives a DATA collaboration"""
    PUSH = "PUSH"
    PULL = "PULL"


class BindingMode(str, Enum):
    EXPLICIT = "EXPLICIT"
    IMPLICIT = "IMPLICIT"


class LifecycleState(str, Enum):
    LOADED = "LOADED"
    ACTIVE = "ACTIVE"
    DEACTIVATED = "DEACTIVATED"
    UNLOADED = "UNLOADED"


@dataclass(frozen=True)
class InterfaceDescriptor:
    """
    One collaboration endpoint of a component

    Attributes:
        name: Interface name, unique per direction within the component
        style: SERVICE, DATA or EVENT
        payload_type: Opaque type key; compatibility is exact equality
        direction: REQUIRED (client side) or PROVIDED (server side)
        endpoint: Client port or server implementation object
        flow: PUSH or PULL for DATA interfaces, None otherwise
        multicast: REQUIRED interfaces only; allows several active bindings
    """
    name: str
    style: CollaborationStyle
    payload_type: str
    direction: Direction
    endpoint: Any = field(compare=False, repr=False)
    flow: Optional[DataFlow] = None
    multicast: bool = False


@dataclass(frozen=True)
class InterfaceRef:
    """(component id, interface name)"""
    component_id: str
    interface: str

    def __str__(self):
        return f"{self.component_id}.{self.interface}"

    @classmethod
    def parse(cls, text: str) -> "InterfaceRef":
        component_id, _, interface = text.rpartition(".")
        return cls(component_id, interface)


@dataclass(frozen=True)
class BindingRecord:
    client: InterfaceRef
    server: InterfaceRef
    mode: BindingMode
    style: CollaborationStyle
    payload_type: str


def interfaces_compatible(client: InterfaceDescriptor, server: InterfaceDescriptor) -> bool:
    """
    The binding predicate: REQUIRED -> PROVIDED, same style, same payload type,
    and for DATA the same flow.
    """
    if client.direction != Direction.REQUIRED or server.direction != Direction.PROVIDED:
        return False
    if client.style != server.style or client.payload_type != server.payload_type:
        return False
    if client.style == CollaborationStyle.DATA and client.flow != server.flow:
        return False
    return True
