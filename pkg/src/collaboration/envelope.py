"""
Data Envelopes

A DataEnvelope carries a batch of opaque items. The payload layout is
item_count (4-byte big-endian) followed by, per item, a 4-byte big-endian
length and the raw bytes. The same layout is used on backchannel wires.
"""

import struct
from dataclasses import dataclass
from typing import Iterable, List

_COUNT = struct.Struct(">I")


class EnvelopeFormatError(ValueError):
    pass


def pack_items(items: Iterable[bytes]) -> bytes:
    items = list(items)
    parts = [_COUNT.pack(len(items))]
    for item in items:
        parts.append(_COUNT.pack(len(item)))
        parts.append(bytes(item))
    return b"".join(parts)


def unpack_items(payload: bytes) -> List[bytes]:
    if len(payload) < _COUNT.size:
        raise EnvelopeFormatError("payload shorter than item count header")
    (count,) = _COUNT.unpack_from(payload, 0)
    offset = _COUNT.size
    items = []
    for _ in range(count):
        if offset + _COUNT.size > len(payload):
            raise EnvelopeFormatError("truncated item length")
        (length,) = _COUNT.unpack_from(payload, offset)
        offset += _COUNT.size
        if offset + length > len(payload):
            raise EnvelopeFormatError("truncated item body")
        items.append(payload[offset:offset + length])
        offset += length
    if offset != len(payload):
        raise EnvelopeFormatError("trailing bytes after last item")
    return items


@dataclass(frozen=True)
class DataEnvelope:
    payload: bytes
    payload_type: str
    item_count: int

    @classmethod
    def of(cls, items: Iterable[bytes], payload_type: str) -> "DataEnvelope":
        items = list(items)
        return cls(pack_items(items), payload_type, len(items))

    @classmethod
    def empty(cls, payload_type: str) -> "DataEnvelope":
        return cls.of([], payload_type)

    @classmethod
    def from_payload(cls, payload: bytes, payload_type: str) -> "DataEnvelope":
        """Rebuild an envelope from a wire payload, validating the layout"""
        return cls(bytes(payload), payload_type, len(unpack_items(payload)))

    def items(self) -> List[bytes]:
        items = unpack_items(self.payload)
        if len(items) != self.item_count:
            raise EnvelopeFormatError(
                f"item_count {self.item_count} does not match {len(items)} encoded items")
        return items

    @property
    def is_empty(self) -> bool:
        return self.item_count == 0
