"""Two-process split of the closed loop over the framed byte protocol.

The plant server and the flight-software client run the same half-loop
objects as the in-process runner; only the transport differs. Strict
lock-step alternation per control cycle:

    server -> TIME frame -> SENSOR frame
    client -> ACTUATOR frame

A receiver that sees a corrupt or unparseable frame answers with
CMD(resend) and the peer repeats its last transmission verbatim; state
never advances on a bad frame. A dead peer trips the socket timeout and
the side shuts down cleanly with the telemetry collected so far.
"""

from __future__ import annotations

import logging
import socket

import numpy as np

from . import protocol as proto
from .plant import ActuatorCommand, SensorReadings
from .scenario import Scenario
from .sil import FswSide, PlantSide

__all__ = ["PeerDisconnected", "run_plant_server", "run_fsw_client", "MAX_RESENDS"]

log = logging.getLogger("adcsim.pil")

MAX_RESENDS = 5


class PeerDisconnected(RuntimeError):
    """The other side went away (timeout or closed socket)."""


class _Link:
    """Lock-step framed link with resend-on-error semantics."""

    def __init__(self, sock: socket.socket, timeout_s: float):
        self.sock = sock
        self.sock.settimeout(timeout_s)
        self.reader = proto.FrameReader()
        self.last_sent: bytes = b""
        self.rx_seq: dict[proto.MsgType, int] = {}

    def send(self, frames: bytes):
        self.last_sent = frames
        try:
            self.sock.sendall(frames)
        except (OSError, BrokenPipeError) as exc:
            raise PeerDisconnected(str(exc)) from exc

    def _resend_request(self, seq: int):
        req = proto.encode_frame(proto.MsgType.CMD, seq, (proto.CMD_RESEND, 0.0))
        try:
            self.sock.sendall(req)
        except OSError as exc:
            raise PeerDisconnected(str(exc)) from exc

    def _raw_frame(self) -> proto.Frame:
        while True:
            try:
                frame = self.reader.next_frame()
            except proto.ProtocolViolation:
                raise
            if frame is not None:
                return frame
            try:
                data = self.sock.recv(65536)
            except socket.timeout as exc:
                raise PeerDisconnected("receive timeout") from exc
            except OSError as exc:
                raise PeerDisconnected(str(exc)) from exc
            if not data:
                raise PeerDisconnected("peer closed the connection")
            self.reader.feed(data)

    def receive(self, expect: tuple[proto.MsgType, ...], seq_expected: int,
                on_ground_cmd=None) -> list[proto.Frame]:
        """Receive the expected ordered frame kinds for this half-cycle.

        Bad CRC / truncation / wrong order or sequence: log, request a
        resend (bounded), never hand a bad frame to the caller.
        """
        for _ in range(MAX_RESENDS + 1):
            got: list[proto.Frame] = []
            try:
                while len(got) < len(expect):
                    frame = self._raw_frame()
                    if frame.msg_type is proto.MsgType.CMD and frame.values[0] == proto.CMD_RESEND:
                        if self.last_sent:
                            self.send(self.last_sent)
                        got = []
                        continue
                    if frame.msg_type is proto.MsgType.CMD and on_ground_cmd is not None:
                        on_ground_cmd(int(frame.values[1]))
                        continue
                    if frame.msg_type is not expect[len(got)]:
                        raise proto.ProtocolViolation(
                            f"expected {expect[len(got)].name}, got {frame.msg_type.name}")
                    if frame.seq != (seq_expected + len(got)) & 0xFFFF:
                        raise proto.BadSequence(
                            f"{frame.msg_type.name} seq {frame.seq}, expected "
                            f"{(seq_expected + len(got)) & 0xFFFF}")
                    got.append(frame)
                return got
            except proto.ProtocolViolation as exc:
                log.warning("protocol violation: %s; requesting resend", exc)
                self._resend_request(seq_expected)
        raise PeerDisconnected(f"gave up after {MAX_RESENDS} resend attempts")


def _serve_cycles(link: _Link, plant_side: PlantSide, n_cycles: int):
    seq = 0
    for k in range(n_cycles):
        time_payload, readings = plant_side.sense()
        sensor_vals = (*readings.b_body, *readings.sun_body, *readings.gyro,
                       float(readings.sun_flag))
        frames = (proto.encode_frame(proto.MsgType.TIME, seq, time_payload)
                  + proto.encode_frame(proto.MsgType.SENSOR, seq + 1, sensor_vals))
        link.send(frames)
        act = link.receive((proto.MsgType.ACTUATOR,), seq + 2)[0]
        cmd = ActuatorCommand(np.array(act.values[0:3]), np.array(act.values[3:6]),
                              act.values[6])
        plant_side.apply(cmd)
        seq = (seq + 3) & 0xFFFF


def run_plant_server(scn: Scenario, host: str = "127.0.0.1", port: int = 0,
                     timeout_s: float = 5.0, ready_callback=None) -> PlantSide:
    """Serve the plant over TCP for one full scenario run.

    Binds, accepts a single flight-software client, runs the lock-step
    exchange for the scenario duration, and returns the plant half with
    its telemetry records (flushed even on early disconnect).
    """
    plant_side = PlantSide(scn)
    n_cycles = int(round(scn.duration_s / scn.control_period_s))
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        srv.settimeout(timeout_s)
        if ready_callback is not None:
            ready_callback(srv.getsockname())
        try:
            conn, peer = srv.accept()
        except socket.timeout as exc:
            raise PeerDisconnected("no client connected") from exc
        with conn:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            link = _Link(conn, timeout_s)
            try:
                _serve_cycles(link, plant_side, n_cycles)
            except PeerDisconnected as exc:
                log.warning("plant server stopping early: %s", exc)
    return plant_side


def run_fsw_client(scn: Scenario, host: str, port: int,
                   timeout_s: float = 5.0) -> FswSide:
    """Run the flight software against a remote plant server."""
    fsw_side = FswSide(scn)
    n_cycles = int(round(scn.duration_s / scn.control_period_s))
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.connect((host, port))
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        link = _Link(sock, timeout_s)
        seq = 0
        try:
            for k in range(n_cycles):
                time_frame, sensor_frame = link.receive(
                    (proto.MsgType.TIME, proto.MsgType.SENSOR), seq,
                    on_ground_cmd=fsw_side.inject_command)
                readings = SensorReadings(
                    np.array(sensor_frame.values[0:3]),
                    np.array(sensor_frame.values[3:6]),
                    np.array(sensor_frame.values[6:9]),
                    int(sensor_frame.values[9]))
                cmd = fsw_side.step(time_frame.values, readings)
                link.send(proto.encode_frame(
                    proto.MsgType.ACTUATOR, seq + 2,
                    (*cmd.u_m, *cmd.t_w, cmd.hw_set)))
                seq = (seq + 3) & 0xFFFF
        except PeerDisconnected as exc:
            log.warning("fsw client stopping early: %s", exc)
    return fsw_side
