import struct

import numpy as np
import pytest

from adcsim import protocol as proto


class TestCrc:
    def test_published_check_value(self):
        # CRC-16/CCITT-FALSE check value
        assert proto.crc16_ccitt(b"123456789") == 0x29B1

    def test_documented_vectors(self):
        # frozen vectors, bit-exact (also documented in docs/protocol.md)
        assert proto.crc16_ccitt(b"") == 0xFFFF
        assert proto.crc16_ccitt(b"\x00") == 0xE1F0
        assert proto.crc16_ccitt(b"\xeb\x90") == 0x52FE

    def test_detects_single_bit_flips(self):
        base = bytes(range(32))
        ref = proto.crc16_ccitt(base)
        for i in range(len(base)):
            for bit in range(8):
                mutated = bytearray(base)
                mutated[i] ^= 1 << bit
                assert proto.crc16_ccitt(bytes(mutated)) != ref


class TestFrameCodec:
    def test_round_trip_all_types(self):
        for mt, n in proto.PAYLOAD_COUNTS.items():
            vals = [float(i) * 0.125 - 3.0 for i in range(n)]
            raw = proto.encode_frame(mt, 42, vals)
            f = proto.decode_frame(raw)
            assert f.msg_type is mt
            assert f.seq == 42
            assert f.values == tuple(vals)

    def test_floats_cross_bit_exactly(self):
        vals = [np.nextafter(1.0, 2.0), -0.1, 1e-300, 3.141592653589793,
                -2.2250738585072014e-308, 0.0, 5e5]
        raw = proto.encode_frame(proto.MsgType.ACTUATOR, 1, vals)
        out = proto.decode_frame(raw).values
        assert all(struct.pack("<d", a) == struct.pack("<d", b) for a, b in zip(vals, out))

    def test_sync_word(self):
        raw = proto.encode_frame(proto.MsgType.TIME, 0, [2018, 11, 20, 0, 0, 0.0])
        assert raw[0:2] == b"\xeb\x90"

    def test_wrong_payload_count_rejected_on_encode(self):
        with pytest.raises(ValueError):
            proto.encode_frame(proto.MsgType.SENSOR, 0, [1.0, 2.0])

    def test_corrupted_crc_detected(self):
        raw = bytearray(proto.encode_frame(proto.MsgType.SENSOR, 3, list(range(10))))
        raw[10] ^= 0x01
        with pytest.raises(proto.CrcMismatch):
            proto.decode_frame(bytes(raw))

    def test_truncated_frame_detected(self):
        raw = proto.encode_frame(proto.MsgType.SENSOR, 3, list(range(10)))
        with pytest.raises(proto.TruncatedFrame):
            proto.decode_frame(raw[:-4])

    def test_unknown_type_rejected(self):
        body = struct.pack("<BHH", 9, 0, 8) + struct.pack("<d", 1.0)
        raw = proto.SYNC + body + struct.pack("<H", proto.crc16_ccitt(body))
        with pytest.raises(proto.ProtocolViolation):
            proto.decode_frame(raw)


class TestFrameReader:
    def test_reassembles_split_stream(self):
        frames = [proto.encode_frame(proto.MsgType.TIME, i, [2018, 11, 20, 0, 0, float(i)])
                  for i in range(5)]
        stream = b"".join(frames)
        r = proto.FrameReader()
        out = []
        for i in range(0, len(stream), 7):   # awkward chunking
            r.feed(stream[i:i + 7])
            while True:
                f = r.next_frame()
                if f is None:
                    break
                out.append(f)
        assert [f.seq for f in out] == [0, 1, 2, 3, 4]

    def test_resynchronizes_after_garbage(self):
        good = proto.encode_frame(proto.MsgType.CMD, 9, [0.0, 5.0])
        r = proto.FrameReader()
        r.feed(b"\x00\x11garbage" + good)
        f = r.next_frame()
        assert f is not None and f.seq == 9

    def test_propagates_crc_error_then_recovers(self):
        bad = bytearray(proto.encode_frame(proto.MsgType.CMD, 1, [0.0, 2.0]))
        bad[9] ^= 0xFF
        good = proto.encode_frame(proto.MsgType.CMD, 2, [0.0, 3.0])
        r = proto.FrameReader()
        r.feed(bytes(bad) + good)
        with pytest.raises(proto.CrcMismatch):
            r.next_frame()
        f = r.next_frame()
        assert f is not None and f.seq == 2
