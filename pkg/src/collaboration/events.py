"""
Event Dispatching

Prioritised dispatch of consumable events. Handlers run one at a time in
non-increasing effective priority, ties in registration order. A handler
consumes a consumable event by returning True, which stops the dispatch.

AGENT-origin handlers are offset above the whole FRAMEWORK priority range so
an intentional-layer handler always sees an event before any framework one.
"""

import itertools
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

logger = logging.getLogger('hybrid-indexer.events')

WILDCARD = "*"
FRAMEWORK_PRIORITY_LIMIT = 2 ** 31 - 1
AGENT_PRIORITY_OFFSET = 2 ** 33


class HandlerOrigin(str, Enum):
    FRAMEWORK = "FRAMEWORK"
    AGENT = "AGENT"


@dataclass(frozen=True)
class Event:
    """
    A notification emitted by a component

    Attributes:
        source: Emitting component id
        name: Event name
        payload: bytes, a scalar, or a scalar map (frozen on construction)
        consumable: Whether a handler may stop further dispatch
        sequence: Strictly increasing per source
    """
    source: str
    name: str
    payload: Any = None
    consumable: bool = False
    sequence: int = 0

    def __post_init__(self):
        if isinstance(self.payload, Mapping) and not isinstance(self.payload, MappingProxyType):
            object.__setattr__(self, "payload", MappingProxyType(dict(self.payload)))
        elif isinstance(self.payload, bytearray):
            object.__setattr__(self, "payload", bytes(self.payload))


EventHandler = Callable[[Event], Optional[bool]]


@dataclass(frozen=True)
class HandlerRegistration:
    handler: EventHandler = field(repr=False)
    source: str = WILDCARD
    name: str = WILDCARD
    priority: int = 0
    origin: HandlerOrigin = HandlerOrigin.FRAMEWORK
    handler_id: Optional[str] = None

    def matches(self, event: Event) -> bool:
        return (self.source in (WILDCARD, event.source)
                and self.name in (WILDCARD, event.name))


@dataclass
class DispatchReport:
    event: Event
    invoked: List[str] = field(default_factory=list)
    priorities: List[int] = field(default_factory=list)
    consumed_by: Optional[str] = None
    errors: List[Tuple[str, str]] = field(default_factory=list)


def effective_priority(registration: HandlerRegistration) -> int:
    requested = max(-FRAMEWORK_PRIORITY_LIMIT, min(FRAMEWORK_PRIORITY_LIMIT, registration.priority))
    if registration.origin == HandlerOrigin.AGENT:
        return requested + AGENT_PRIORITY_OFFSET
    return requested


class EventDispatcher:
    """
    Built-in event-dispatching service of a container
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._handlers: Dict[str, Tuple[int, int, HandlerRegistration]] = {}
        self._order = itertools.count()
        self._ids = itertools.count(1)
        self._sequences: Dict[str, int] = {}
        self._source_locks: Dict[str, threading.RLock] = {}

    def register_handler(self, registration: HandlerRegistration) -> str:
        """
        Register a handler

        Args:
            registration: What to match and at which priority

        Returns:
            str: Handler id usable with deregister_handler
        """
        if registration.origin == HandlerOrigin.FRAMEWORK and abs(registration.priority) > FRAMEWORK_PRIORITY_LIMIT:
            logger.warning(f"Framework handler priority {registration.priority} clamped")
        with self._lock:
            handler_id = registration.handler_id or f"h{next(self._ids)}"
            if handler_id in self._handlers:
                raise ValueError(f"Handler id already registered: {handler_id}")
            self._handlers[handler_id] = (effective_priority(registration), next(self._order), registration)
        return handler_id

    def deregister_handler(self, handler_id: str) -> bool:
        with self._lock:
            return self._handlers.pop(handler_id, None) is not None

    def next_sequence(self, source: str) -> int:
        with self._lock:
            value = self._sequences.get(source, 0) + 1
            self._sequences[source] = value
            return value

    def emit(self, source: str, name: str, payload: Any = None, consumable: bool = False) -> DispatchReport:
        """Build an event with the next sequence number and dispatch it"""
        event = Event(source, name, payload, consumable, self.next_sequence(source))
        return self.dispatch(event)

    def matching(self, event: Event) -> List[Tuple[str, int, HandlerRegistration]]:
        """Matching handlers, in dispatch order"""
        with self._lock:
            entries = [(hid, prio, order, reg) for hid, (prio, order, reg) in self._handlers.items()
                       if reg.matches(event)]
        entries.sort(key=lambda e: (-e[1], e[2]))
        return [(hid, prio, reg) for hid, prio, _, reg in entries]

    def dispatch(self, event: Event) -> DispatchReport:
        report = DispatchReport(event)
        with self._source_lock(event.source):
            for handler_id, priority, registration in self.matching(event):
                report.invoked.append(handler_id)
                report.priorities.append(priority)
                try:
                    consumed = registration.handler(event)
                except Exception as e:
                    logger.warning(f"Handler {handler_id} failed on {event.source}/{event.name}: {str(e)}")
                    report.errors.append((handler_id, str(e)))
                    continue
                if consumed and event.consumable:
                    report.consumed_by = handler_id
                    break
        return report

    def _source_lock(self, source: str) -> threading.RLock:
        with self._lock:
            lock = self._source_locks.get(source)
            if lock is None:
                lock = self._source_locks[source] = threading.RLock()
            return lock
