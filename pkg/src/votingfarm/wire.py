"""Frame encoding for messages crossing the simulated fabric.

Every message is a single bytes object laid out as

    kind:u8 | header_len:u32be | header (JSON, utf-8) | value payload

The header carries structured control fields; the value payload is the
opaque voted data.  Keeping the value bytes in a fixed tail region lets
the fault injector corrupt voted values without destroying the framing,
which matches the fault model: value failures corrupt data, they do not
turn messages into garbage.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any

# Frame kinds
K_INPUT = 1       # user module -> voter: new input value
K_BROADCAST = 2   # voter -> fellow voter: relayed input
K_OUTPUT = 3      # voter -> output endpoint: voted value
K_STATUS = 4      # voter -> user module: VfStatus reply
K_CONTROL = 5     # user module -> voter: algorithm/output/close/reset
K_PHASE = 6       # voter -> recovery database: phase report
K_FAULT = 7       # fabric watchdog -> recovery database: fault record
K_WARN = 8        # recovery interpreter -> voter: rebuilt descriptor

KIND_NAMES = {
    K_INPUT: "input",
    K_BROADCAST: "broadcast",
    K_OUTPUT: "output",
    K_STATUS: "status",
    K_CONTROL: "control",
    K_PHASE: "phase",
    K_FAULT: "fault",
    K_WARN: "warn",
}

_HDR = struct.Struct(">BI")


class FrameError(Exception):
    pass


@dataclass(frozen=True)
class Frame:
    kind: int
    fields: dict[str, Any]
    payload: bytes = b""

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)

    @property
    def kind_name(self) -> str:
        return KIND_NAMES.get(self.kind, f"kind{self.kind}")


def encode(kind: int, fields: dict[str, Any] | None = None, payload: bytes = b"") -> bytes:
    header = json.dumps(fields or {}, sort_keys=True, separators=(",", ":")).encode()
    return _HDR.pack(kind, len(header)) + header + payload


def decode(data: bytes) -> Frame:
    if len(data) < _HDR.size:
        raise FrameError("short frame")
    kind, hlen = _HDR.unpack_from(data)
    if len(data) < _HDR.size + hlen:
        raise FrameError("truncated header")
    try:
        fields = json.loads(data[_HDR.size:_HDR.size + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"bad header: {exc}") from exc
    return Frame(kind, fields, bytes(data[_HDR.size + hlen:]))


def payload_region(data: bytes) -> int:
    """Offset where the value payload starts, or len(data) if none."""
    if len(data) < _HDR.size:
        return len(data)
    _, hlen = _HDR.unpack_from(data)
    return min(len(data), _HDR.size + hlen)


def corrupt_value(data: bytes, mask: bytes) -> bytes:
    """XOR the value-payload region of a frame with a repeating mask.

    Frames without a value payload pass through unchanged: a value fault
    corrupts data being voted on, not protocol bookkeeping.
    """
    if not mask:
        return data
    start = payload_region(data)
    if start >= len(data):
        return data
    head, tail = data[:start], bytearray(data[start:])
    for i in range(len(tail)):
        tail[i] ^= mask[i % len(mask)]
    return bytes(head) + bytes(tail)
