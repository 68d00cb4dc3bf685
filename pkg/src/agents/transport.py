"""
Message Transport

A minimal performative envelope for agent messages and two transports: a
LocalTransport for agents in one process and a SocketTransport that carries
messages between node processes as ACL_MESSAGE frames.

Agent ids on a SocketTransport are '<node>:<name>'; the node prefix selects
the peer connection.
"""

import json
import logging
import socket
import struct
import threading
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Callable, Dict, List, Optional

from ..backchannel.endpoint import Endpoint
from ..backchannel.errors import BackchannelError
from ..backchannel.framing import Frame, FrameKind, read_frame, write_frame
from .beliefs import BeliefAtom, atom_from_json, atom_to_json
from .errors import TransportDown, UnknownReceiver

logger = logging.getLogger('hybrid-indexer.transport')

BROADCAST = "*"
_U32 = struct.Struct(">I")

_CONTENT_BYTES = 0x00
_CONTENT_ATOM = 0x01
_CONTENT_JSON = 0x02


class Performative(IntEnum):
    INFORM = 1
    REQUEST = 2
    AGREE = 3
    REFUSE = 4


@dataclass(frozen=True)
class AclMessage:
    performative: Performative
    sender: str
    receiver: str
    content: Any = None
    conversation_id: str = ""

    @property
    def is_broadcast(self) -> bool:
        return self.receiver == BROADCAST


def _encode_content(content: Any) -> bytes:
    if isinstance(content, (bytes, bytearray)):
        return bytes([_CONTENT_BYTES]) + bytes(content)
    if isinstance(content, BeliefAtom):
        return bytes([_CONTENT_ATOM]) + json.dumps(atom_to_json(content)).encode("utf-8")
    return bytes([_CONTENT_JSON]) + json.dumps(atom_to_json(content)).encode("utf-8")


def _decode_content(data: bytes) -> Any:
    if not data:
        raise ValueError("Empty message content")
    tag, body = data[0], data[1:]
    if tag == _CONTENT_BYTES:
        return body
    if tag in (_CONTENT_ATOM, _CONTENT_JSON):
        return atom_from_json(json.loads(body.decode("utf-8")))
    raise ValueError(f"Unknown content tag 0x{tag:02x}")


def encode_message(message: AclMessage) -> bytes:
    """performative byte, then length-prefixed sender, receiver, conversation_id, content"""
    parts = [bytes([int(message.performative)])]
    for field_bytes in (message.sender.encode("utf-8"), message.receiver.encode("utf-8"),
                        message.conversation_id.encode("utf-8"), _encode_content(message.content)):
        parts.append(_U32.pack(len(field_bytes)))
        parts.append(field_bytes)
    return b"".join(parts)


def decode_message(data: bytes) -> AclMessage:
    if not data:
        raise ValueError("Empty message")
    performative = Performative(data[0])
    offset = 1
    fields: List[bytes] = []
    for _ in range(4):
        if offset + _U32.size > len(data):
            raise ValueError("Truncated message field length")
        (length,) = _U32.unpack_from(data, offset)
        offset += _U32.size
        if offset + length > len(data):
            raise ValueError("Truncated message field")
        fields.append(data[offset:offset + length])
        offset += length
    sender, receiver, conversation_id = (f.decode("utf-8") for f in fields[:3])
    return AclMessage(performative, sender, receiver, _decode_content(fields[3]), conversation_id)


Deliver = Callable[[AclMessage], None]


class MessageTransport:
    """
    Registry of local agents plus message counters

    `sent` counts one per send() call; `per_sender` splits it by sender;
    `delivered` counts mailbox deliveries (a broadcast delivers many copies).
    """

    def __init__(self):
        self._agents: Dict[str, Deliver] = {}
        self._lock = threading.RLock()
        self.sent = 0
        self.delivered = 0
        self.per_sender: Counter = Counter()
        self.per_performative: Counter = Counter()

    def register(self, agent_id: str, deliver: Deliver) -> None:
        with self._lock:
            self._agents[agent_id] = deliver

    def unregister(self, agent_id: str) -> None:
        with self._lock:
            self._agents.pop(agent_id, None)

    def agents(self) -> List[str]:
        with self._lock:
            return list(self._agents)

    def knows(self, agent_id: str) -> bool:
        with self._lock:
            return agent_id in self._agents

    def _count(self, message: AclMessage) -> None:
        with self._lock:
            self.sent += 1
            self.per_sender[message.sender] += 1
            self.per_performative[message.performative.name] += 1

    def _deliver_local(self, message: AclMessage) -> int:
        with self._lock:
            if message.is_broadcast:
                targets = [d for agent_id, d in self._agents.items() if agent_id != message.sender]
            else:
                deliver = self._agents.get(message.receiver)
                if deliver is None:
                    raise UnknownReceiver(f"No agent {message.receiver}")
                targets = [deliver]
            for deliver in targets:
                deliver(message)
            self.delivered += len(targets)
        return len(targets)

    def send(self, message: AclMessage) -> None:
        raise NotImplementedError

    def counters(self) -> Dict[str, Any]:
        with self._lock:
            return {"sent": self.sent, "delivered": self.delivered,
                    "per_sender": dict(self.per_sender), "per_performative": dict(self.per_performative)}

    def close(self) -> None:
        pass


class LocalTransport(MessageTransport):
    def send(self, message: AclMessage) -> None:
        """
        Deliver to a registered agent, or to every agent but the sender on BROADCAST

        Raises:
            UnknownReceiver: The receiver is not registered
        """
        self._deliver_local(message)
        self._count(message)


def node_of(agent_id: str) -> Optional[str]:
    node, sep, _ = agent_id.partition(":")
    return node if sep else None


class SocketTransport(MessageTransport):
    """
    Transport of one node process

    Args:
        node_id: This node's id (the agent id prefix it owns)
        endpoint: Where this node accepts peer connections
        peers: node id -> endpoint of every other node
    """

    def __init__(self, node_id: str, endpoint: Endpoint, peers: Optional[Dict[str, Endpoint]] = None,
                 connect_timeout: float = 5.0):
        super().__init__()
        self.node_id = node_id
        self.endpoint = endpoint
        self.peers: Dict[str, Endpoint] = dict(peers or {})
        self.connect_timeout = connect_timeout
        self._connections: Dict[str, socket.socket] = {}
        self._send_locks: Dict[str, threading.Lock] = {}
        self._listener: Optional[socket.socket] = None
        self._stop = threading.Event()
        self.bytes_sent = 0

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(self.endpoint.as_tuple())
        except OSError as e:
            listener.close()
            raise TransportDown(f"Cannot listen on {self.endpoint}: {str(e)}", cause=e) from e
        listener.listen()
        listener.settimeout(0.2)
        self._listener = listener
        threading.Thread(target=self._accept_loop, name=f"acl-{self.node_id}", daemon=True).start()
        logger.info(f"Node {self.node_id} accepting messages on {self.endpoint}")

    def add_peer(self, node_id: str, endpoint: Endpoint) -> None:
        with self._lock:
            self.peers[node_id] = endpoint

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            threading.Thread(target=self._receive, args=(conn,), daemon=True).start()

    def _receive(self, conn: socket.socket):
        try:
            while not self._stop.is_set():
                frame = read_frame(conn)
                if frame.kind != FrameKind.ACL_MESSAGE:
                    logger.warning(f"Ignoring {frame.kind.name} frame on the message port")
                    continue
                message = decode_message(frame.body)
                try:
                    self._deliver_local(message)
                except UnknownReceiver:
                    logger.warning(f"Dropped message for unknown agent {message.receiver} from {message.sender}")
        except (OSError, BackchannelError, ValueError):
            pass
        finally:
            conn.close()

    def _connection(self, node_id: str) -> socket.socket:
        with self._lock:
            conn = self._connections.get(node_id)
            if conn is not None:
                return conn
            endpoint = self.peers.get(node_id)
        if endpoint is None:
            raise UnknownReceiver(f"No route to node {node_id}")
        try:
            conn = socket.create_connection(endpoint.as_tuple(), timeout=self.connect_timeout)
        except OSError as e:
            raise TransportDown(f"Cannot reach node {node_id} at {endpoint}: {str(e)}", cause=e) from e
        conn.settimeout(None)
        with self._lock:
            existing = self._connections.get(node_id)
            if existing is not None:
                conn.close()
                return existing
            self._connections[node_id] = conn
            self._send_locks[node_id] = threading.Lock()
        return conn

    def _forward(self, node_id: str, data: Frame) -> None:
        conn = self._connection(node_id)
        with self._lock:
            send_lock = self._send_locks[node_id]
        try:
            with send_lock:
                size = write_frame(conn, data)
            with self._lock:
                self.bytes_sent += size
        except OSError as e:
            with self._lock:
                self._connections.pop(node_id, None)
            conn.close()
            raise TransportDown(f"Lost connection to node {node_id}: {str(e)}", cause=e) from e

    def send(self, message: AclMessage) -> None:
        """
        Route by receiver prefix; BROADCAST reaches local agents and every peer

        Raises:
            UnknownReceiver: Unknown local agent or unknown node prefix
            TransportDown: A peer cannot be reached
        """
        frame = Frame(FrameKind.ACL_MESSAGE, encode_message(message))
        if message.is_broadcast:
            self._deliver_local(message)
            with self._lock:
                peers = list(self.peers)
            for node_id in peers:
                if node_id != self.node_id:
                    try:
                        self._forward(node_id, frame)
                    except TransportDown as e:
                        logger.warning(f"Broadcast from {message.sender} skipped node {node_id}: {str(e)}")
        else:
            target = node_of(message.receiver)
            if target is None or target == self.node_id:
                self._deliver_local(message)
            else:
                self._forward(target, frame)
        self._count(message)

    def close(self) -> None:
        self._stop.set()
        if self._listener is not None:
            self._listener.close()
        with self._lock:
            connections = list(self._connections.values())
            self._connections.clear()
        for conn in connections:
            conn.close()
