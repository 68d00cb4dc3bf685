"""
TCP Pull Adapters

Interface-adapter components that stretch a local DATA pull collaboration over
a TCP connection. A TcpPullServer is bound to the component exporting the pull
interface and listens; a TcpPullClient exports the same pull interface to local
consumers and forwards every pull over the wire.

Both sides emit `channel_active` and `channel_closed` events themselves, so the
agents focusing on them learn about the channel without exchanging messages.
"""

import json
import socket
import threading
from typing import Any, Dict, List, Optional

from ..collaboration.envelope import DataEnvelope
from ..components.component import Component
from ..components.errors import ContainerError, ProviderInactive
from .endpoint import Endpoint
from .errors import BackchannelError, ChannelClosed, ChannelTimeout, ConnectionRefused, FramingError, PortUnavailable
from .framing import Frame, FrameKind, parse_pull_request, pull_request_body, read_frame, write_frame

DEFAULT_PAYLOAD_TYPE = "DocumentBundle"
ACCEPT_POLL = 0.2


class TrafficCounter:
    """Process-wide count of frames and bytes written by backchannel sockets"""

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_sent = 0
        self.frames_sent = 0

    def add(self, size: int) -> None:
        with self._lock:
            self.bytes_sent += size
            self.frames_sent += 1

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return {"bytes_sent": self.bytes_sent, "frames_sent": self.frames_sent}

    def reset(self) -> None:
        with self._lock:
            self.bytes_sent = 0
            self.frames_sent = 0


traffic = TrafficCounter()


def _status(**fields: Any) -> Frame:
    return Frame(FrameKind.STATUS, json.dumps(fields).encode("utf-8"))


def _parse_status(frame: Frame) -> Dict[str, Any]:
    try:
        return json.loads(frame.body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FramingError(f"Malformed STATUS body: {str(e)}") from e


def _send(sock: socket.socket, frame: Frame) -> int:
    size = write_frame(sock, frame)
    traffic.add(size)
    return size


class PullServerAdapter(Component):
    """
    Server end of a backchannel

    Properties:
        host, port: Listening endpoint
        payload_type: Payload type of the pull interface it serves
    """

    type_id = "TcpPullServer"

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self.properties.setdefault("host", "127.0.0.1")
        self.properties.setdefault("payload_type", DEFAULT_PAYLOAD_TYPE)
        self._listener: Optional[socket.socket] = None
        self._connections: List[socket.socket] = []
        self._pull_lock = threading.Lock()
        self._conn_lock = threading.Lock()
        self.bytes_sent = 0
        self.items_served = 0

    def get_interfaces_info(self):
        return [self.require_pull("source", self.properties["payload_type"])]

    def validate_property(self, key, value):
        if key == "port":
            Endpoint(str(self.properties.get("host", "127.0.0.1")), value)
        elif key == "host" and not value:
            raise ValueError("host must not be empty")

    @property
    def endpoint(self) -> Endpoint:
        return Endpoint(self.properties["host"], int(self.properties["port"]))

    def on_activate(self):
        endpoint = self.endpoint
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(endpoint.as_tuple())
            listener.listen()
        except OSError as e:
            listener.close()
            raise PortUnavailable(f"Cannot listen on {endpoint}: {str(e)}") from e
        listener.settimeout(ACCEPT_POLL)
        self._listener = listener
        self.logger.info(f"Listening on {endpoint}")
        self.run_task(self._accept_loop, f"{self.id}-accept")
        self.emit("channel_listening", {"endpoint": str(endpoint)})

    def on_deactivate(self):
        self._close_sockets()

    def on_unload(self):
        self._close_sockets()

    def _close_sockets(self):
        if self._listener is not None:
            self._listener.close()
            self._listener = None
        # a response being written completes before its connection goes
        with self._pull_lock, self._conn_lock:
            connections, self._connections = self._connections, []
            for conn in connections:
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                conn.close()

    def _accept_loop(self, stop: threading.Event):
        listener = self._listener
        while not stop.is_set() and listener is not None:
            try:
                conn, address = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            with self._conn_lock:
                self._connections.append(conn)
            remote = f"{address[0]}:{address[1]}"
            threading.Thread(target=self._serve, args=(conn, remote),
                             name=f"{self.id}-conn-{remote}", daemon=True).start()

    def _serve(self, conn: socket.socket, remote: str):
        in_flight = 0
        reason = "closed by peer"
        try:
            while True:
                frame = read_frame(conn)
                if frame.kind == FrameKind.STATUS:
                    status = _parse_status(frame)
                    if status.get("status") == "hello":
                        self.emit("channel_active", {"remote": remote, "side": "server"})
                        self.bytes_sent += _send(conn, _status(status="accepted"))
                elif frame.kind == FrameKind.PULL_REQUEST:
                    max_items = parse_pull_request(frame.body)
                    with self._pull_lock:
                        try:
                            envelope = self.port("source").pull(max(1, max_items))
                        except ContainerError as e:
                            self.bytes_sent += _send(conn, _status(status="error", error=str(e)))
                            continue
                        in_flight = envelope.item_count
                        self.bytes_sent += _send(conn, Frame(FrameKind.PULL_RESPONSE, envelope.payload))
                        self.items_served += in_flight
                        in_flight = 0
                else:
                    raise FramingError(f"Unexpected {frame.kind.name} frame from {remote}")
        except ChannelClosed:
            pass
        except (OSError, BackchannelError) as e:
            reason = str(e)
        finally:
            with self._conn_lock:
                if conn in self._connections:
                    self._connections.remove(conn)
            conn.close()
            if in_flight:
                self.logger.warning(f"Channel to {remote} closed with {in_flight} item(s) in flight")
            self.logger.info(f"Channel from {remote} closed: {reason}")
            if self.container is not None and self.container.find_record(self.id) is not None:
                self.emit("channel_closed", {"remote": remote, "side": "server", "in_flight": in_flight,
                                             "reason": reason})


class PullClientAdapter(Component):
    """
    Client end of a backchannel; a PullSource for local consumers

    Properties:
        server_address: Remote 'host:port'
        timeout: Connect and handshake timeout in seconds
        pull_timeout: Seconds a pull may wait for its response before the channel is dropped
        payload_type: Payload type of the exported pull interface
    """

    type_id = "TcpPullClient"

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self.properties.setdefault("payload_type", DEFAULT_PAYLOAD_TYPE)
        self.properties.setdefault("timeout", 5.0)
        self.properties.setdefault("pull_timeout", 10.0)
        self._sock: Optional[socket.socket] = None
        self._lock = threading.Lock()
        self.bytes_sent = 0
        self.bytes_received = 0

    def get_interfaces_info(self):
        return [self.provide_pull("pull", self.properties["payload_type"], self)]

    def validate_property(self, key, value):
        if key == "server_address":
            Endpoint.parse(value)
        elif key in ("timeout", "pull_timeout"):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ValueError(f"{key} must be a positive number")

    @property
    def connected(self) -> bool:
        return self._sock is not None

    def on_activate(self):
        self.connect()

    def on_deactivate(self):
        self.close()

    def on_unload(self):
        self.close()

    def connect(self) -> None:
        """
        Connect to the configured server and complete the STATUS handshake

        Raises:
            ConnectionRefused: Nothing accepts connections at the address
            ChannelTimeout: No connection or no handshake reply in time
        """
        if self._sock is not None:
            return
        if "server_address" not in self.properties:
            raise ConnectionRefused(f"{self.id} has no server_address")
        endpoint = Endpoint.parse(self.properties["server_address"])
        timeout = float(self.properties["timeout"])
        try:
            sock = socket.create_connection(endpoint.as_tuple(), timeout=timeout)
        except socket.timeout as e:
            raise ChannelTimeout(f"Connecting to {endpoint} timed out after {timeout}s") from e
        except OSError as e:
            raise ConnectionRefused(f"Cannot connect to {endpoint}: {str(e)}") from e
        try:
            self.bytes_sent += _send(sock, _status(status="hello", client=self.id))
            reply = read_frame(sock)
        except socket.timeout as e:
            sock.close()
            raise ChannelTimeout(f"No handshake reply from {endpoint} within {timeout}s") from e
        except (OSError, BackchannelError) as e:
            sock.close()
            raise ConnectionRefused(f"Handshake with {endpoint} failed: {str(e)}") from e
        if reply.kind != FrameKind.STATUS or _parse_status(reply).get("status") != "accepted":
            sock.close()
            raise ConnectionRefused(f"{endpoint} rejected the channel")
        sock.settimeout(float(self.properties["pull_timeout"]))
        self._sock = sock
        self.logger.info(f"Channel to {endpoint} active")
        self.emit("channel_active", {"remote": str(endpoint), "side": "client"})

    def pull(self, max_items: int) -> DataEnvelope:
        """
        Remote pull of up to max_items

        Raises:
            ChannelClosed: The connection failed before a full response arrived
            ProviderInactive: The remote provider is not active
        """
        failure = None
        in_flight = 0
        with self._lock:
            sock = self._sock
            if sock is None:
                raise ChannelClosed(f"{self.id} is not connected")
            try:
                self.bytes_sent += _send(sock, Frame(FrameKind.PULL_REQUEST, pull_request_body(max_items)))
                # the remote queue may have released up to max_items from here on
                in_flight = max_items
                frame = read_frame(sock)
            except (OSError, BackchannelError) as e:
                failure = e
                self._detach()
            else:
                self.bytes_received += frame.length + 4
        if failure is not None:
            self._closed(str(failure), in_flight)
            raise ChannelClosed(f"Channel to {self.properties['server_address']} closed: {str(failure)}",
                                in_flight=in_flight, cause=failure) from failure
        if frame.kind == FrameKind.STATUS:
            status = _parse_status(frame)
            raise ProviderInactive(f"Remote provider unavailable: {status.get('error', status)}")
        if frame.kind != FrameKind.PULL_RESPONSE:
            raise FramingError(f"Expected PULL_RESPONSE, got {frame.kind.name}")
        return DataEnvelope.from_payload(frame.body, self.properties["payload_type"])

    def _detach(self) -> None:
        sock, self._sock = self._sock, None
        if sock is not None:
            sock.close()

    def _closed(self, reason: str, in_flight: int) -> None:
        """Report a lost channel; called without the adapter lock held"""
        address = str(self.properties.get("server_address"))
        if in_flight:
            self.logger.warning(f"Channel to {address} lost with up to {in_flight} item(s) in flight: {reason}")
        else:
            self.logger.warning(f"Channel to {address} lost: {reason}")
        if self.container is not None and self.container.find_record(self.id) is not None:
            self.emit("channel_closed", {"remote": address, "side": "client", "in_flight": in_flight,
                                         "reason": reason})

    def close(self) -> None:
        with self._lock:
            sock, self._sock = self._sock, None
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
