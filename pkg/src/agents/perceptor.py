"""
Event Manager Perceptor

Turns container events of focused components into beliefs. It registers one
AGENT-origin handler with the container, buffers what it sees, and converts the
buffer at the start of each deliberation cycle.
"""

import threading
from collections import deque
from collections.abc import Mapping
from typing import Callable, Deque, Dict, Iterable, List, Optional, Set

from ..collaboration.events import WILDCARD, Event, HandlerOrigin, HandlerRegistration
from .beliefs import BeliefAtom, BeliefStore, atom

Transformer = Callable[[Event], Iterable[BeliefAtom]]

LIFECYCLE_EVENTS = {"created", "activated", "deactivated", "removed"}


def event_details(event: Event) -> BeliefAtom:
    """queue_grew with payload 5 -> queue_grew(5); map payloads by sorted key"""
    payload = event.payload
    if payload is None:
        return atom(event.name)
    if isinstance(payload, Mapping):
        return atom(event.name, *(payload[key] for key in sorted(payload)))
    return atom(event.name, payload)


class EventManagerPerceptor:
    def __init__(self, agent_id: str, container, priority: int = 0,
                 consume: Optional[Callable[[Event], bool]] = None):
        self.agent_id = agent_id
        self.container = container
        self.transformers: Dict[str, Transformer] = {}
        self._consume = consume
        self._focused: Set[str] = set()
        self._buffer: Deque[Event] = deque()
        self._lock = threading.Lock()
        self.handler_id = container.events.register_handler(HandlerRegistration(
            handler=self._on_event, source=WILDCARD, name=WILDCARD, priority=priority,
            origin=HandlerOrigin.AGENT))

    @property
    def focused(self) -> Set[str]:
        with self._lock:
            return set(self._focused)

    def focus(self, component_id: str) -> None:
        with self._lock:
            self._focused.add(component_id)

    def unfocus(self, component_id: str) -> None:
        with self._lock:
            self._focused.discard(component_id)

    def add_transformer(self, event_name: str, transformer: Transformer) -> None:
        self.transformers[event_name] = transformer

    def _on_event(self, event: Event) -> bool:
        with self._lock:
            if event.source not in self._focused:
                return False
            self._buffer.append(event)
        return bool(self._consume and self._consume(event))

    def drain(self) -> List[Event]:
        with self._lock:
            events = list(self._buffer)
            self._buffer.clear()
        return events

    def perceive(self, beliefs: BeliefStore) -> List[BeliefAtom]:
        """
        Convert buffered events into beliefs

        Returns:
            List[BeliefAtom]: Atoms that were not believed before this call
        """
        new: List[BeliefAtom] = []
        for event in self.drain():
            for belief in self._beliefs_for(event, beliefs):
                if beliefs.assert_belief(belief):
                    new.append(belief)
        return new

    def _beliefs_for(self, event: Event, beliefs: BeliefStore) -> List[BeliefAtom]:
        source, payload = event.source, event.payload
        produced: List[BeliefAtom] = []
        if event.name in LIFECYCLE_EVENTS:
            produced.append(atom(event.name, source))
            if event.name == "removed":
                beliefs.retract_belief(atom("component", source))
                self.unfocus(source)
        elif event.name == "property_changed" and isinstance(payload, Mapping):
            produced.append(atom("property", source, payload["key"], payload["value"]))
        elif event.name == "bound" and isinstance(payload, Mapping):
            produced.append(atom("bound", payload["client"], payload["server"]))
        elif event.name == "unbound" and isinstance(payload, Mapping):
            beliefs.retract_belief(atom("bound", payload["client"], payload["server"]))
        else:
            produced.append(atom("event", source, event_details(event)))
        transformer = self.transformers.get(event.name)
        if transformer is not None:
            produced.extend(transformer(event))
        return produced

    def close(self) -> None:
        self.container.events.deregister_handler(self.handler_id)
