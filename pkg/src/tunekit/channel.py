"""Framed messages over single-producer/single-consumer ring buffers.

Wire layout of a frame (all little-endian)::

    0  magic        4 bytes  b"MLOS"
    4  version      u8       1
    5  msg_type     u8
    6  flags        u16      0
    8  payload_len  u32      <= 1008
    12 payload
    .. crc          u32      CRC-32 (reflected 0xEDB88320) of every preceding byte

A ``Transport`` holds two rings in one byte region: component->agent first,
agent->component second.  Each ring is preceded by a 64-byte header::

    0  magic u8[4], 4 version u8, 5 pad[3], 8 slot_size u32, 12 capacity u32,
    16 head u64, 24 tail u64, 32 zero pad to 64

``head`` is written only by the producer and ``tail`` only by the consumer.
The counters are accessed through aligned 8-byte ctypes views, so a single
store publishes them.  Slot contents are written before ``head`` advances;
on x86-64 (TSO) that store order is what the other process observes.  Within
one process the interpreter lock provides the same ordering.
"""

from __future__ import annotations

import ctypes
import mmap
import os
import struct
import time
import zlib
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

MAGIC = b"MLOS"
VERSION = 1
HEADER_SIZE = 12
FRAME_OVERHEAD = 16
SLOT_SIZE = 1024
MAX_PAYLOAD = SLOT_SIZE - FRAME_OVERHEAD
RING_HEADER_SIZE = 64

_HEADER = struct.Struct("<4sBBHI")
_CRC = struct.Struct("<I")


class MsgType(IntEnum):
    REGISTER = 1
    TELEMETRY = 2
    CONFIG_UPDATE = 3
    ACK = 4
    HEARTBEAT = 5


class FrameError(ValueError):
    pass


class TruncatedFrame(FrameError):
    pass


class BadMagic(FrameError):
    pass


class UnsupportedVersion(FrameError):
    pass


class CrcMismatch(FrameError):
    pass


class OversizedPayload(FrameError):
    pass


def encode_frame(msg_type: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise OversizedPayload(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    body = _HEADER.pack(MAGIC, VERSION, int(msg_type), 0, len(payload)) + bytes(payload)
    return body + _CRC.pack(zlib.crc32(body))


def decode_frame(data: bytes) -> tuple[int, bytes]:
    """Return ``(msg_type, payload)``; raise a ``FrameError`` subclass on any defect."""
    data = bytes(data)
    if len(data) < FRAME_OVERHEAD:
        raise TruncatedFrame(f"{len(data)} bytes is shorter than a frame header")
    magic, version, msg_type, _flags, payload_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported version {version}")
    total = FRAME_OVERHEAD + payload_len
    if len(data) < total:
        raise TruncatedFrame(f"frame declares {total} bytes, got {len(data)}")
    if len(data) > total:
        raise FrameError(f"{len(data) - total} trailing bytes after frame")
    (crc,) = _CRC.unpack_from(data, total - 4)
    if crc != zlib.crc32(data[: total - 4]):
        raise CrcMismatch("CRC mismatch")
    return msg_type, data[HEADER_SIZE : HEADER_SIZE + payload_len]


# -- payloads -----------------------------------------------------------------

_TELEMETRY = struct.Struct("<IIQd")
_CONFIG = struct.Struct("<IIB7x8s")
_ACK = struct.Struct("<Q")


class ValueType(IntEnum):
    INT64 = 0
    REAL64 = 1
    BOOL = 2
    CATEGORY = 3


class Telemetry(NamedTuple):
    component_id: int
    metric_id: int
    timestamp_ns: int
    value: float

    def pack(self) -> bytes:
        return _TELEMETRY.pack(self.component_id, self.metric_id, self.timestamp_ns, self.value)

    @classmethod
    def unpack(cls, payload: bytes) -> "Telemetry":
        if len(payload) != _TELEMETRY.size:
            raise FrameError(f"telemetry payload must be 24 bytes, got {len(payload)}")
        return cls(*_TELEMETRY.unpack(payload))


@dataclass(frozen=True)
class ConfigUpdate:
    component_id: int
    param_id: int
    value_type: ValueType
    value: int | float | bool

    def pack(self) -> bytes:
        if self.value_type == ValueType.REAL64:
            raw = struct.pack("<d", float(self.value))
        elif self.value_type in (ValueType.INT64, ValueType.CATEGORY):
            raw = struct.pack("<q", int(self.value))
        else:
            raw = struct.pack("<Q", 1 if self.value else 0)
        return _CONFIG.pack(self.component_id, self.param_id, int(self.value_type), raw)

    @classmethod
    def unpack(cls, payload: bytes) -> "ConfigUpdate":
        if len(payload) != _CONFIG.size:
            raise FrameError(f"config payload must be 24 bytes, got {len(payload)}")
        if any(payload[9:16]):
            raise FrameError("config payload pad bytes must be zero")
        component_id, param_id, vt, raw = _CONFIG.unpack(payload)
        try:
            vt = ValueType(vt)
        except ValueError:
            raise FrameError(f"unknown value_type {vt}") from None
        if vt == ValueType.REAL64:
            value = struct.unpack("<d", raw)[0]
        elif vt == ValueType.BOOL:
            value = struct.unpack("<Q", raw)[0] != 0
        else:
            value = struct.unpack("<q", raw)[0]
        return cls(component_id, param_id, vt, value)


_TELEMETRY_FRAME = struct.Struct("<4sBBHIIIQd")


def encode_telemetry_frame(component_id: int, metric_id: int, timestamp_ns: int, value: float) -> bytes:
    """Same bytes as ``encode_frame(TELEMETRY, Telemetry(...).pack())``, in one pack call."""
    body = _TELEMETRY_FRAME.pack(
        MAGIC, VERSION, MsgType.TELEMETRY, 0, _TELEMETRY.size, component_id, metric_id, timestamp_ns, value
    )
    return body + _CRC.pack(zlib.crc32(body))


_TELEMETRY_FRAME_SIZE = _TELEMETRY_FRAME.size + _CRC.size


def decode_telemetry_frame(frame: bytes) -> Telemetry | None:
    """Fast path for the common case: a well-formed TELEMETRY frame, else None.

    None means "not a valid telemetry frame"; callers fall back to
    :func:`decode_frame` for the precise error or other message types.
    """
    if len(frame) != _TELEMETRY_FRAME_SIZE:
        return None
    magic, version, msg_type, _flags, n, cid, mid, ts, value = _TELEMETRY_FRAME.unpack_from(frame)
    if magic != MAGIC or version != VERSION or msg_type != MsgType.TELEMETRY or n != _TELEMETRY.size:
        return None
    if _CRC.unpack_from(frame, _TELEMETRY_FRAME.size)[0] != zlib.crc32(frame[: _TELEMETRY_FRAME.size]):
        return None
    return Telemetry(cid, mid, ts, value)


def pack_ack(seq: int) -> bytes:
    return _ACK.pack(seq)


def unpack_ack(payload: bytes) -> int:
    if len(payload) != _ACK.size:
        raise FrameError(f"ack payload must be 8 bytes, got {len(payload)}")
    return _ACK.unpack(payload)[0]


# -- ring ---------------------------------------------------------------------

_RING_HEADER = struct.Struct("<4sB3xII")


class Ring:
    """SPSC ring of fixed 1024-byte slots inside a writable buffer.

    Exactly one producer may call ``push`` and exactly one consumer ``pop``.
    """

    def __init__(self, buf, offset: int = 0, capacity: int | None = None, *, init: bool = True):
        self._buf = buf
        self._view = memoryview(buf)
        self.offset = offset
        if init:
            if capacity is None or capacity <= 0 or capacity & (capacity - 1):
                raise ValueError("capacity must be a positive power of two")
            _RING_HEADER.pack_into(self._view, offset, MAGIC, VERSION, SLOT_SIZE, capacity)
            self._view[offset + 16 : offset + RING_HEADER_SIZE] = bytes(RING_HEADER_SIZE - 16)
        magic, version, slot_size, cap = _RING_HEADER.unpack_from(self._view, offset)
        if magic != MAGIC or version != VERSION or slot_size != SLOT_SIZE:
            raise ValueError("buffer does not hold a ring header")
        if capacity is not None and capacity != cap:
            raise ValueError(f"ring capacity is {cap}, expected {capacity}")
        self.capacity = cap
        self._mask = cap - 1
        self._head = ctypes.c_uint64.from_buffer(buf, offset + 16)
        self._tail = ctypes.c_uint64.from_buffer(buf, offset + 24)
        self._slots = offset + RING_HEADER_SIZE

    @staticmethod
    def region_size(capacity: int) -> int:
        return RING_HEADER_SIZE + capacity * SLOT_SIZE

    @property
    def head(self) -> int:
        return self._head.value

    @property
    def tail(self) -> int:
        return self._tail.value

    def __len__(self) -> int:
        return self._head.value - self._tail.value

    def push(self, frame: bytes) -> bool:
        """Copy ``frame`` into the next slot; False when the ring is full."""
        if len(frame) > SLOT_SIZE:
            raise OversizedPayload(f"frame of {len(frame)} bytes does not fit a slot")
        head = self._head.value
        if head - self._tail.value >= self.capacity:
            return False
        start = self._slots + (head & self._mask) * SLOT_SIZE
        self._view[start : start + len(frame)] = frame
        self._head.value = head + 1
        return True

    def pop(self) -> bytes | None:
        """Next frame's bytes in FIFO order, or None when empty."""
        tail = self._tail.value
        if tail == self._head.value:
            return None
        start = self._slots + (tail & self._mask) * SLOT_SIZE
        (payload_len,) = struct.unpack_from("<I", self._view, start + 8)
        size = min(SLOT_SIZE, FRAME_OVERHEAD + payload_len)
        frame = bytes(self._view[start : start + size])
        self._tail.value = tail + 1
        return frame

    def pop_many(self, limit: int | None = None) -> list[bytes]:
        """Pop every published frame (at most ``limit``) with one counter read and one counter write."""
        tail = self._tail.value
        n = self._head.value - tail
        if limit is not None:
            n = min(n, limit)
        if n <= 0:
            return []
        view, mask, slots = self._view, self._mask, self._slots
        frames = []
        for pos in range(tail, tail + n):
            start = slots + (pos & mask) * SLOT_SIZE
            payload_len = view[start + 8] | view[start + 9] << 8 | view[start + 10] << 16 | view[start + 11] << 24
            frames.append(bytes(view[start : start + min(SLOT_SIZE, FRAME_OVERHEAD + payload_len)]))
        self._tail.value = tail + n
        return frames

    def release(self) -> None:
        # ctypes views pin the buffer; drop them before the owner closes it.
        del self._head, self._tail
        self._view.release()


def ring_push(ring: Ring, frame: bytes) -> bool:
    return ring.push(frame)


def ring_pop(ring: Ring) -> bytes | None:
    return ring.pop()


class ChannelTimeout(TimeoutError):
    pass


class ChannelFull(RuntimeError):
    pass


class Transport:
    """Two rings sharing one region: ``up`` carries component->agent traffic, ``down`` the reverse."""

    DEFAULT_CAPACITY = 4096

    def __init__(self, buf, capacity: int | None, *, init: bool, owner=None):
        self._buf = buf
        self._owner = owner
        self.up = Ring(buf, 0, capacity, init=init)
        self.down = Ring(buf, Ring.region_size(self.up.capacity), self.up.capacity, init=init)

    @classmethod
    def in_process(cls, capacity: int = DEFAULT_CAPACITY) -> "Transport":
        return cls(bytearray(2 * Ring.region_size(capacity)), capacity, init=True)

    @classmethod
    def create(cls, path, capacity: int = DEFAULT_CAPACITY) -> "Transport":
        """Create (or truncate) a memory-mapped transport file."""
        size = 2 * Ring.region_size(capacity)
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o600)
        try:
            os.ftruncate(fd, size)
            mm = mmap.mmap(fd, size)
        finally:
            os.close(fd)
        return cls(mm, capacity, init=True, owner=mm)

    @classmethod
    def attach(cls, path) -> "Transport":
        """Map an existing transport file created by the other side."""
        fd = os.open(path, os.O_RDWR)
        try:
            mm = mmap.mmap(fd, os.fstat(fd).st_size)
        finally:
            os.close(fd)
        return cls(mm, None, init=False, owner=mm)

    def close(self) -> None:
        self.up.release()
        self.down.release()
        if self._owner is not None:
            self._owner.close()

    def __enter__(self) -> "Transport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def push_blocking(ring: Ring, frame: bytes, retries: int = 100, backoff_s: float = 0.001) -> int:
    """Push with bounded retry; return the frame's sequence number (ring position)."""
    for _ in range(retries + 1):
        seq = ring.head
        if ring.push(frame):
            return seq
        time.sleep(backoff_s)
    raise ChannelFull(f"ring still full after {retries} retries")
