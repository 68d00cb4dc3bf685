"""
Collaboration Service

Connection-driven service calls and data-driven push/pull between bound
components, in SYNC/ASYNC and UNICAST/MULTICAST modes.
"""

import logging
import queue
import threading
from enum import Enum
from typing import Any, Dict, Optional

from ..components.errors import NoBinding, ProviderFault, ProviderInactive
from ..components.interfaces import BindingRecord, CollaborationStyle, InterfaceRef, LifecycleState
from .envelope import DataEnvelope

logger = logging.getLogger('hybrid-indexer.collaboration')


class DeliveryMode(str, Enum):
    SYNC = "SYNC"
    ASYNC = "ASYNC"


class Routing(str, Enum):
    UNICAST = "UNICAST"
    MULTICAST = "MULTICAST"


class _AsyncDelivery:
    """
    One bounded FIFO per destination component, drained by its own thread.
    Producers block when the queue is full.
    """

    def __init__(self, service: "CollaborationService", destination: str, maxsize: int):
        self.service = service
        self.destination = destination
        self.queue: "queue.Queue[Optional[tuple]]" = queue.Queue(maxsize=maxsize)
        self.stopped = threading.Event()
        self.thread = threading.Thread(target=self._run, name=f"async-{destination}", daemon=True)
        self.thread.start()

    def _run(self):
        while True:
            item = self.queue.get()
            try:
                if item is None:
                    return
                client, binding, envelope = item
                try:
                    self.service._deliver(binding, envelope)
                except Exception as e:
                    logger.warning(f"ASYNC push {client} -> {binding.server} failed: {str(e)}")
                    self.service.container.emit_framework_event(
                        client.component_id, "push_failed",
                        {"server": str(binding.server), "items": envelope.item_count, "error": str(e)})
            finally:
                self.queue.task_done()
            if self.stopped.is_set() and self.queue.empty():
                return

    def stop(self) -> None:
        """Let the thread finish what is queued, then exit"""
        self.stopped.set()
        try:
            self.queue.put_nowait(None)
        except queue.Full:
            pass


class CollaborationService:
    def __init__(self, container, async_queue_size: int = 64):
        self.container = container
        self.async_queue_size = async_queue_size
        self._deliveries: Dict[str, _AsyncDelivery] = {}
        self._lock = threading.Lock()

    def _active_endpoint(self, binding: BindingRecord) -> Any:
        record = self.container.find_record(binding.server.component_id)
        if record is None or record.state != LifecycleState.ACTIVE:
            raise ProviderInactive(f"Provider {binding.server} is not active")
        return record.interface(binding.server.interface, provided=True).endpoint

    def invoke_service(self, binding: BindingRecord, request: DataEnvelope,
                       mode: DeliveryMode = DeliveryMode.SYNC) -> DataEnvelope:
        """
        Call a bound SERVICE provider synchronously

        Args:
            binding: A SERVICE binding
            request: Request envelope

        Returns:
            DataEnvelope: The provider's response

        Raises:
            ProviderInactive: Provider missing or not ACTIVE
            ProviderFault: Provider raised or returned no envelope
        """
        if binding.style != CollaborationStyle.SERVICE:
            raise ValueError(f"{binding.client} -> {binding.server} is not a SERVICE binding")
        if mode != DeliveryMode.SYNC:
            raise ValueError("Service calls are synchronous")
        endpoint = self._active_endpoint(binding)
        handler = getattr(endpoint, "handle", endpoint)
        try:
            response = handler(request)
        except Exception as e:
            raise ProviderFault(f"Provider {binding.server} failed: {str(e)}", cause=e) from e
        if not isinstance(response, DataEnvelope):
            raise ProviderFault(f"Provider {binding.server} returned {type(response).__name__}, not an envelope")
        return response

    def pull_data(self, binding: BindingRecord, max_items: int) -> DataEnvelope:
        """Pull up to max_items from a PULL provider; empty envelope when the source is empty"""
        if max_items < 1:
            raise ValueError("max_items must be positive")
        endpoint = self._active_endpoint(binding)
        try:
            return endpoint.pull(max_items)
        except ProviderInactive:
            raise
        except Exception as e:
            raise ProviderFault(f"Provider {binding.server} failed: {str(e)}", cause=e) from e

    def push_data(self, client: InterfaceRef, envelope: DataEnvelope,
                  mode: DeliveryMode = DeliveryMode.SYNC, routing: Routing = Routing.UNICAST) -> None:
        """
        Push an envelope from a REQUIRED PUSH interface to its provider(s)

        Raises:
            NoBinding: The client interface has no binding
            ProviderInactive: SYNC only; ASYNC failures are reported as push_failed events
        """
        bindings = self.container.bindings_for(client)
        if not bindings:
            raise NoBinding(f"{client} is not bound")
        targets = bindings if routing == Routing.MULTICAST else bindings[:1]
        for binding in targets:
            if mode == DeliveryMode.SYNC:
                self._deliver(binding, envelope)
            else:
                self._delivery(binding.server.component_id).queue.put((client, binding, envelope))

    def _deliver(self, binding: BindingRecord, envelope: DataEnvelope) -> None:
        endpoint = self._active_endpoint(binding)
        endpoint.push(envelope)

    def _delivery(self, destination: str) -> _AsyncDelivery:
        with self._lock:
            delivery = self._deliveries.get(destination)
            if delivery is None:
                delivery = self._deliveries[destination] = _AsyncDelivery(self, destination, self.async_queue_size)
            return delivery

    def flush(self) -> None:
        """Block until every queued ASYNC delivery has been attempted"""
        with self._lock:
            deliveries = list(self._deliveries.values())
        for delivery in deliveries:
            delivery.queue.join()

    def forget(self, destination: str) -> None:
        """Retire the ASYNC queue of an unloaded component"""
        with self._lock:
            delivery = self._deliveries.pop(destination, None)
        if delivery is not None:
            delivery.stop()

    def close(self) -> None:
        with self._lock:
            deliveries = list(self._deliveries.values())
            self._deliveries.clear()
        for delivery in deliveries:
            delivery.stop()
