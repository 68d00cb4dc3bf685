"""
Test component types and helpers shared by the test modules
"""

import socket
import time

from src.collaboration.envelope import DataEnvelope
from src.components.component import Component
from src.pipeline.documents import BUNDLE_PAYLOAD_TYPE

BLOB = "Blob"


class EchoService(Component):
    """SERVICE provider returning the request unchanged"""

    type_id = "EchoService"
    stateless = True

    def get_interfaces_info(self):
        return [self.provide_service("echo", BLOB, self.handle)]

    def handle(self, request: DataEnvelope) -> DataEnvelope:
        return request


class StatefulEcho(EchoService):
    type_id = "StatefulEcho"
    stateless = False


class FaultyService(Component):
    type_id = "FaultyService"

    def get_interfaces_info(self):
        return [self.provide_service("echo", BLOB, self.handle)]

    def handle(self, request):
        raise RuntimeError("disk on fire")


class ServiceClient(Component):
    type_id = "ServiceClient"

    def get_interfaces_info(self):
        return [self.require_service("svc", BLOB)]


class BlobSink(Component):
    """PUSH provider recording every envelope it receives"""

    type_id = "BlobSink"

    def __init__(self, component_id, properties=None):
        super().__init__(component_id, properties)
        self.received = []

    def get_interfaces_info(self):
        return [self.provide_push("input", BLOB, self)]

    def push(self, envelope):
        self.received.append(envelope)


class BlobProducer(Component):
    """Unicast and multicast PUSH clients"""

    type_id = "BlobProducer"

    def get_interfaces_info(self):
        return [
            self.require_push("out", BLOB),
            self.require_push("fanout", BLOB, multicast=True),
        ]


class BundleConsumer(Component):
    """Holds a REQUIRED pull interface for bundles; never pulls by itself"""

    type_id = "BundleConsumer"

    def get_interfaces_info(self):
        return [self.require_pull("source", BUNDLE_PAYLOAD_TYPE)]


class Provider(Component):
    """Provides one DATA pull interface of the payload type given in its `payload` property"""

    type_id = "Provider"

    def get_interfaces_info(self):
        return [self.provide_pull("out", self.properties.get("payload", BLOB), self)]

    def pull(self, max_items):
        return DataEnvelope.empty(self.properties.get("payload", BLOB))


class Hooked(Component):
    """Records its lifecycle hooks; fails activation while `broken` is set"""

    type_id = "Hooked"

    def __init__(self, component_id, properties=None):
        super().__init__(component_id, properties)
        self.calls = []

    def validate_property(self, key, value):
        if key == "size" and (not isinstance(value, int) or value < 0):
            raise ValueError("size must be a non-negative integer")

    def on_activate(self):
        if self.properties.get("broken"):
            raise RuntimeError("cannot start")
        self.calls.append("activate")

    def on_deactivate(self):
        self.calls.append("deactivate")

    def on_unload(self):
        self.calls.append("unload")


TEST_COMPONENT_TYPES = (EchoService, StatefulEcho, FaultyService, ServiceClient, BlobSink, BlobProducer,
                        BundleConsumer, Provider, Hooked)


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_until(predicate, timeout=10.0, interval=0.02):
    """Poll predicate until it returns truthy; returns the last value"""
    deadline = time.monotonic() + timeout
    value = predicate()
    while not value and time.monotonic() < deadline:
        time.sleep(interval)
        value = predicate()
    return value
