"""Framed byte protocol for the split (plant/flight-software) topology.

Frame layout (little endian):

    offset  size  field
    0       2     sync 0xEB 0x90
    2       1     message type (1 SENSOR, 2 ACTUATOR, 3 CMD, 4 TIME)
    3       2     sequence number (uint16)
    5       2     payload length in bytes (uint16, = 8 * field count)
    7       8n    payload, IEEE-754 float64 values
    7+8n    2     CRC-16/CCITT-FALSE over bytes 2 .. 7+8n-1 (type..payload)

Fixed payload field counts: SENSOR 10 (B_body x3 [T], sun_body x3,
gyro x3 [rad/s], sun_flag), ACTUATOR 7 (U_m x3 [V], T_w x3 [N m],
Hw_set), TIME 6 (year, mon, day, hr, min, sec), CMD 2 (code, value)
with code 0 = ground mode command, code 1 = resend request.

CRC parameters: polynomial 0x1021, initial value 0xFFFF, no
reflection, no final xor; check("123456789") = 0x29B1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

__all__ = [
    "MsgType",
    "Frame",
    "ProtocolViolation",
    "CrcMismatch",
    "TruncatedFrame",
    "BadSequence",
    "crc16_ccitt",
    "encode_frame",
    "decode_frame",
    "FrameReader",
    "SYNC",
    "PAYLOAD_COUNTS",
    "CMD_GROUND_MODE",
    "CMD_RESEND",
]

SYNC = b"\xeb\x90"
CMD_GROUND_MODE = 0.0
CMD_RESEND = 1.0


class MsgType(IntEnum):
    SENSOR = 1
    ACTUATOR = 2
    CMD = 3
    TIME = 4


PAYLOAD_COUNTS = {
    MsgType.SENSOR: 10,
    MsgType.ACTUATOR: 7,
    MsgType.TIME: 6,
    MsgType.CMD: 2,
}


class ProtocolViolation(RuntimeError):
    """Peer violated the framing/ordering contract."""


class CrcMismatch(ProtocolViolation):
    pass


class TruncatedFrame(ProtocolViolation):
    pass


class BadSequence(ProtocolViolation):
    pass


@dataclass
class Frame:
    msg_type: MsgType
    seq: int
    values: tuple


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection."""
    crc = init
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def encode_frame(msg_type: MsgType, seq: int, values) -> bytes:
    values = tuple(float(v) for v in values)
    expected = PAYLOAD_COUNTS[MsgType(msg_type)]
    if len(values) != expected:
        raise ValueError(f"{MsgType(msg_type).name} payload must carry {expected} values")
    payload = struct.pack(f"<{len(values)}d", *values)
    body = struct.pack("<BHH", int(msg_type), seq & 0xFFFF, len(payload)) + payload
    return SYNC + body + struct.pack("<H", crc16_ccitt(body))


def decode_frame(buf: bytes) -> Frame:
    """Decode one complete frame from the exact byte string."""
    if len(buf) < 9:
        raise TruncatedFrame(f"{len(buf)} bytes is below the minimum frame size")
    if buf[0:2] != SYNC:
        raise ProtocolViolation("bad sync word")
    msg_type_raw, seq, length = struct.unpack("<BHH", buf[2:7])
    if len(buf) != 7 + length + 2:
        raise TruncatedFrame(f"length field says {length} payload bytes, frame has {len(buf) - 9}")
    body = buf[2:7 + length]
    crc = struct.unpack("<H", buf[7 + length:9 + length])[0]
    if crc != crc16_ccitt(body):
        raise CrcMismatch(f"crc 0x{crc:04X} != computed 0x{crc16_ccitt(body):04X}")
    try:
        msg_type = MsgType(msg_type_raw)
    except ValueError as exc:
        raise ProtocolViolation(f"unknown message type {msg_type_raw}") from exc
    if length != 8 * PAYLOAD_COUNTS[msg_type]:
        raise ProtocolViolation(f"{msg_type.name} frame with {length} payload bytes")
    values = struct.unpack(f"<{length // 8}d", buf[7:7 + length])
    return Frame(msg_type, seq, values)


class FrameReader:
    """Incremental reader over a byte stream (socket recv chunks)."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes):
        self._buf.extend(data)

    def next_frame(self) -> Frame | None:
        """Pop the next complete frame, or None if more bytes are needed.

        Raises on a framing error; the offending bytes are consumed so
        the caller can request a resend and keep reading.
        """
        # hunt for sync
        while self._buf and not self._buf.startswith(SYNC):
            idx = self._buf.find(SYNC, 1)
            if idx < 0:
                self._buf = self._buf[-1:] if self._buf[-1:] == SYNC[0:1] else bytearray()
                return None
            del self._buf[:idx]
        if len(self._buf) < 7:
            return None
        _, _, length = struct.unpack("<BHH", bytes(self._buf[2:7]))
        total = 7 + length + 2
        if len(self._buf) < total:
            return None
        raw = bytes(self._buf[:total])
        del self._buf[:total]
        return decode_frame(raw)
