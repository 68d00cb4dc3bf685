import hashlib
import random
import socket
import struct
import threading

import pytest

from src.agents.transport import LocalTransport
from src.backchannel.adapters import PullClientAdapter, PullServerAdapter, traffic
from src.backchannel.channels import open_pull_client, remote_pull, start_pull_server
from src.backchannel.endpoint import Endpoint
from src.backchannel.errors import ChannelClosed, ConnectionRefused, FramingError, InvalidEndpoint, PortUnavailable
from src.backchannel.framing import (
    Frame,
    FrameKind,
    decode_frame,
    encode_frame,
    parse_pull_request,
    pull_request_body,
    read_frame,
    write_frame,
)
from src.collaboration.envelope import DataEnvelope
from src.collaboration.events import HandlerRegistration
from src.components.container import Container
from src.components.errors import IncompatibleInterfaces, RejectedValue
from src.components.interfaces import InterfaceRef
from src.pipeline.components import PIPELINE_COMPONENT_TYPES
from src.pipeline.documents import BUNDLE_PAYLOAD_TYPE

from .support import TEST_COMPONENT_TYPES, free_port


def ref(text):
    return InterfaceRef.parse(text)


@pytest.fixture
def remote():
    """A second container standing in for another node"""
    container = Container(name="remote")
    container.register_types(*TEST_COMPONENT_TYPES)
    container.register_types(*PIPELINE_COMPONENT_TYPES)
    yield container
    container.shutdown()


def serve_queue(container, items, queue_id="q1"):
    container.load_component(None, queue_id, "DataQueue")
    container.activate(queue_id)
    container.instance(queue_id).push(DataEnvelope.of(items, BUNDLE_PAYLOAD_TYPE))
    endpoint = Endpoint("127.0.0.1", free_port())
    server_id = start_pull_server(container, None, ref(f"{queue_id}.pull"), endpoint)
    return endpoint, server_id


def connect_consumer(container, endpoint, consumer_id="c1"):
    container.load_component(None, consumer_id, "BundleConsumer")
    adapter_id = open_pull_client(container, None, ref(f"{consumer_id}.source"), endpoint, timeout=5.0)
    return container.instance(consumer_id).port("source"), adapter_id


class ScriptedServer:
    """Accepts one channel, answers the handshake, reads one pull request, then runs `respond`"""

    def __init__(self, respond):
        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.bind(("127.0.0.1", 0))
        self.listener.listen()
        self.endpoint = Endpoint("127.0.0.1", self.listener.getsockname()[1])
        self.requests = []
        self.thread = threading.Thread(target=self._serve, args=(respond,), daemon=True)
        self.thread.start()

    def _serve(self, respond):
        conn, _ = self.listener.accept()
        with conn:
            read_frame(conn)
            write_frame(conn, Frame(FrameKind.STATUS, b'{"status": "accepted"}'))
            self.requests.append(parse_pull_request(read_frame(conn).body))
            respond(conn)

    def close(self):
        self.listener.close()


class TestFraming:
    def test_layout(self):
        data = encode_frame(Frame(FrameKind.PULL_REQUEST, pull_request_body(7)))
        assert data == b"\x00\x00\x00\x05\x01\x00\x00\x00\x07"

    def test_random_round_trips(self):
        rng = random.Random(99)
        kinds = list(FrameKind)
        for _ in range(10_000):
            frame = Frame(rng.choice(kinds), rng.randbytes(rng.randint(0, 64)))
            data = encode_frame(frame)
            assert decode_frame(data) == (frame, len(data))

    def test_partial_buffers_wait_for_more(self):
        data = encode_frame(Frame(FrameKind.STATUS, b'{"status": "hello"}'))
        for cut in range(len(data)):
            assert decode_frame(data[:cut]) is None

    def test_back_to_back_frames(self):
        first = Frame(FrameKind.PULL_RESPONSE, b"abc")
        second = Frame(FrameKind.ACL_MESSAGE, b"")
        buffer = encode_frame(first) + encode_frame(second)
        frame, used = decode_frame(buffer)
        assert frame == first
        assert decode_frame(buffer[used:]) == (second, 5)

    def test_zero_length_rejected(self):
        with pytest.raises(FramingError):
            decode_frame(b"\x00\x00\x00\x00\x01")

    def test_unknown_kind_rejected(self):
        with pytest.raises(FramingError):
            decode_frame(struct.pack(">IB", 1, 0x09))

    def test_pull_request_body(self):
        assert parse_pull_request(pull_request_body(100)) == 100
        with pytest.raises(FramingError):
            parse_pull_request(b"\x01")


class TestEndpoint:
    def test_parse(self):
        endpoint = Endpoint.parse("node-2.local:9000")
        assert (endpoint.host, endpoint.port) == ("node-2.local", 9000)
        assert str(endpoint) == "node-2.local:9000"

    @pytest.mark.parametrize("text", ["nohost", ":80", "host:0", "host:70000", "host:http"])
    def test_invalid(self, text):
        with pytest.raises(InvalidEndpoint):
            Endpoint.parse(text)


class TestPullChannel:
    def test_large_item_arrives_intact(self, container, remote):
        payload = random.Random(3).randbytes(1024 * 1024)
        endpoint, _ = serve_queue(remote, [payload])
        port, _ = connect_consumer(container, endpoint)
        [item] = port.pull(1).items()
        assert hashlib.sha256(item).hexdigest() == hashlib.sha256(payload).hexdigest()

    def test_channel_active_once_per_side(self, container, remote):
        seen = []
        for node in (container, remote):
            node.events.register_handler(HandlerRegistration(
                handler=lambda event: seen.append(event.payload["side"]), name="channel_active"))
        transport = LocalTransport()
        before = transport.counters()
        endpoint, _ = serve_queue(remote, [b"x"])
        connect_consumer(container, endpoint)
        assert sorted(seen) == ["client", "server"]
        assert transport.counters() == before

    def test_matches_local_pull(self, container, remote):
        items = [b"bundle-%d" % n for n in range(5)]
        endpoint, _ = serve_queue(remote, items)
        port, _ = connect_consumer(container, endpoint)

        container.load_component(None, "local-q", "DataQueue")
        container.activate("local-q")
        container.instance("local-q").push(DataEnvelope.of(items, BUNDLE_PAYLOAD_TYPE))
        container.load_component(None, "local-c", "BundleConsumer")
        container.bind(ref("local-c.source"), ref("local-q.pull"))
        local = container.instance("local-c").port("source")

        for size in (2, 2, 2, 2):
            assert port.pull(size).items() == local.pull(size).items()

    def test_empty_source(self, container, remote):
        endpoint, server_id = serve_queue(remote, [])
        _, adapter_id = connect_consumer(container, endpoint)
        envelope = remote_pull(container, adapter_id, 4)
        assert envelope.item_count == 0
        assert remote.instance(server_id).items_served == 0

    def test_counters_and_traffic(self, container, remote):
        endpoint, server_id = serve_queue(remote, [b"a", b"b"])
        _, adapter_id = connect_consumer(container, endpoint)
        remote_pull(container, adapter_id, 5)
        client = container.instance(adapter_id)
        assert isinstance(client, PullClientAdapter)
        assert client.connected
        assert client.bytes_sent > 0 and client.bytes_received > 0
        assert remote.instance(server_id).items_served == 2
        assert traffic.snapshot()["bytes_sent"] > 0

    def test_port_in_use(self, container, remote):
        endpoint, _ = serve_queue(remote, [])
        container.load_component(None, "q2", "DataQueue")
        with pytest.raises(PortUnavailable):
            start_pull_server(container, None, ref("q2.pull"), endpoint)
        assert not [r for r in container.query_components(recursive=True)
                    if isinstance(r.instance, PullServerAdapter)]

    def test_service_interface_cannot_be_exported(self, container):
        container.load_component(None, "store", "IndexStore")
        with pytest.raises(IncompatibleInterfaces):
            start_pull_server(container, None, ref("store.index"), Endpoint("127.0.0.1", free_port()))

    def test_nothing_listening(self, container):
        container.load_component(None, "c1", "BundleConsumer")
        with pytest.raises(ConnectionRefused):
            open_pull_client(container, None, ref("c1.source"), Endpoint("127.0.0.1", free_port()), timeout=1.0)
        assert container.bindings_for(ref("c1.source")) == []
        assert not [r for r in container.query_components(recursive=True)
                    if isinstance(r.instance, PullClientAdapter)]

    def test_server_unloaded(self, container, remote):
        endpoint, server_id = serve_queue(remote, [b"a"])
        closed = []
        container.events.register_handler(HandlerRegistration(handler=closed.append, name="channel_closed"))
        _, adapter_id = connect_consumer(container, endpoint)
        remote.unload(server_id)
        with pytest.raises(ChannelClosed):
            remote_pull(container, adapter_id, 1)
        assert [e.payload["side"] for e in closed] == ["client"]
        assert not container.instance(adapter_id).connected

    def test_max_items_positive(self, container, remote):
        endpoint, _ = serve_queue(remote, [b"a"])
        _, adapter_id = connect_consumer(container, endpoint)
        with pytest.raises(ValueError):
            remote_pull(container, adapter_id, 0)


class TestChannelLoss:
    def _client(self, container, server, pull_timeout=None):
        container.load_component(None, "c1", "BundleConsumer")
        return open_pull_client(container, None, ref("c1.source"), server.endpoint, timeout=5.0,
                                pull_timeout=pull_timeout)

    def _closed_events(self, container):
        closed = []
        container.events.register_handler(HandlerRegistration(handler=closed.append, name="channel_closed"))
        return closed

    def test_response_cut_mid_frame(self, container):
        payload = DataEnvelope.of([b"a" * 1000, b"b" * 1000], BUNDLE_PAYLOAD_TYPE).payload
        data = encode_frame(Frame(FrameKind.PULL_RESPONSE, payload))
        server = ScriptedServer(lambda conn: conn.sendall(data[:300]))
        closed = self._closed_events(container)
        adapter_id = self._client(container, server)
        with pytest.raises(ChannelClosed) as raised:
            remote_pull(container, adapter_id, 2)
        assert raised.value.in_flight == 2
        assert [(e.payload["side"], e.payload["in_flight"]) for e in closed] == [("client", 2)]
        assert server.requests == [2]
        server.close()

    def test_stalled_server_times_out(self, container):
        release = threading.Event()
        server = ScriptedServer(lambda conn: release.wait(10))
        closed = self._closed_events(container)
        adapter_id = self._client(container, server, pull_timeout=0.3)
        try:
            with pytest.raises(ChannelClosed) as raised:
                remote_pull(container, adapter_id, 3)
            assert raised.value.in_flight == 3
            assert closed[0].payload["in_flight"] == 3
            assert not container.instance(adapter_id).connected
        finally:
            release.set()
            server.close()

    def test_closed_handler_may_close_the_adapter(self, container):
        server = ScriptedServer(lambda conn: None)
        adapter_id = self._client(container, server)
        adapter = container.instance(adapter_id)
        handled = []

        def close_adapter(event):
            adapter.close()
            handled.append(event.payload["side"])

        container.events.register_handler(HandlerRegistration(handler=close_adapter, name="channel_closed"))
        errors = []

        def pull():
            try:
                remote_pull(container, adapter_id, 1)
            except ChannelClosed as e:
                errors.append(e)

        worker = threading.Thread(target=pull, daemon=True)
        worker.start()
        worker.join(5)
        assert not worker.is_alive()
        assert handled == ["client"]
        assert len(errors) == 1
        server.close()

    def test_pull_timeout_must_be_positive(self, container):
        container.load_component(None, "c1", "BundleConsumer")
        with pytest.raises(RejectedValue):
            open_pull_client(container, None, ref("c1.source"), Endpoint("127.0.0.1", free_port()), pull_timeout=0)
        assert container.bindings_for(ref("c1.source")) == []
