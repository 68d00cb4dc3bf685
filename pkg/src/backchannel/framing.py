"""
Wire Framing

Every backchannel (and socket ACL transport) message is one frame:

    length  u32 big-endian, counts the kind byte plus the body (>= 1)
    kind    1 byte
    body    length - 1 bytes
"""

import socket
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Tuple

from .errors import ChannelClosed, FramingError

HEADER = struct.Struct(">IB")
MAX_FRAME_LENGTH = 256 * 1024 * 1024
_U32 = struct.Struct(">I")


class FrameKind(IntEnum):
    PULL_REQUEST = 0x01
    PULL_RESPONSE = 0x02
    STATUS = 0x03
    ACL_MESSAGE = 0x04


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    body: bytes = b""

    @property
    def length(self) -> int:
        return len(self.body) + 1


def encode_frame(frame: Frame) -> bytes:
    if frame.length > MAX_FRAME_LENGTH:
        raise FramingError(f"Frame of {frame.length} bytes exceeds {MAX_FRAME_LENGTH}")
    return HEADER.pack(frame.length, int(frame.kind)) + frame.body


def _kind(value: int) -> FrameKind:
    try:
        return FrameKind(value)
    except ValueError:
        raise FramingError(f"Unknown frame kind 0x{value:02x}") from None


def decode_frame(buffer: bytes) -> Optional[Tuple[Frame, int]]:
    """
    Decode the first frame in buffer

    Returns:
        (frame, bytes consumed), or None when the buffer holds an incomplete frame

    Raises:
        FramingError: Zero or oversized length, or an unknown kind
    """
    if len(buffer) < _U32.size:
        return None
    (length,) = _U32.unpack_from(buffer, 0)
    if length < 1 or length > MAX_FRAME_LENGTH:
        raise FramingError(f"Invalid frame length {length}")
    total = _U32.size + length
    if len(buffer) < total:
        return None
    kind = _kind(buffer[_U32.size])
    return Frame(kind, bytes(buffer[HEADER.size:total])), total


def pull_request_body(max_items: int) -> bytes:
    return _U32.pack(max_items)


def parse_pull_request(body: bytes) -> int:
    if len(body) != _U32.size:
        raise FramingError(f"PULL_REQUEST body must be 4 bytes, got {len(body)}")
    return _U32.unpack(body)[0]


def recv_exact(sock: socket.socket, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining:
        chunk = sock.recv(min(remaining, 1024 * 1024))
        if not chunk:
            raise ChannelClosed("Connection closed by peer")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame:
    """Block until one whole frame has been read from sock"""
    (length,) = _U32.unpack(recv_exact(sock, _U32.size))
    if length < 1 or length > MAX_FRAME_LENGTH:
        raise FramingError(f"Invalid frame length {length}")
    data = recv_exact(sock, length)
    return Frame(_kind(data[0]), data[1:])


def write_frame(sock: socket.socket, frame: Frame) -> int:
    """Send one frame; returns the number of bytes written"""
    data = encode_frame(frame)
    sock.sendall(data)
    return len(data)
