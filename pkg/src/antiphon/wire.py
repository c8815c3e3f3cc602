"""Wire layer: OSC over UDP plus CSV session logging.

Incoming control messages use the address ``/interface`` with one
float32 argument per control dimension; predictions go out as
``/prediction`` with the same arity.  The time delta is internal to the
model and never appears on the wire.

The OSC codec implements the small subset of OSC 1.0 these messages
need (float32/int32/string arguments, 4-byte alignment, big-endian).
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import ControlEvent
from .errors import DataError

log = logging.getLogger(__name__)

INTERFACE_ADDRESS = "/interface"
PREDICTION_ADDRESS = "/prediction"


@dataclass
class WireConfig:
    """Transport endpoints and logging location."""

    osc_listen_host: str = "127.0.0.1"
    osc_listen_port: int = 5001
    osc_send_host: str = "127.0.0.1"
    osc_send_port: int = 5002
    http_port: int = 8765  # serves both the REST API and the WebSocket
    log_dir: str = "logs"

    def __post_init__(self) -> None:
        ports = [self.osc_listen_port, self.osc_send_port, self.http_port]
        for p in ports:
            if not 0 <= p < 65536:
                raise ValueError(f"port {p} out of range")
        bound = [p for p in ports if p != 0]  # 0 asks the OS for an ephemeral port
        if len(set(bound)) != len(bound):
            raise ValueError(f"ports must be distinct, got {ports}")


class OscDecodeError(DataError):
    """Datagram is not a decodable OSC message."""


def _pad(n: int) -> int:
    return (n + 4) & ~3  # length including the terminator, rounded up


def encode_osc(address: str, args: list) -> bytes:
    """Encode one OSC message; floats as 'f', ints as 'i', str as 's'."""
    out = bytearray()

    def put_string(s: str) -> None:
        raw = s.encode()
        out.extend(raw)
        out.extend(b"\x00" * (_pad(len(raw)) - len(raw)))

    put_string(address)
    tags = ","
    payload = bytearray()
    for arg in args:
        if isinstance(arg, bool):
            raise TypeError("boolean OSC arguments are not supported")
        if isinstance(arg, int):
            tags += "i"
            payload += struct.pack(">i", arg)
        elif isinstance(arg, (float, np.floating)):
            tags += "f"
            payload += struct.pack(">f", float(arg))
        elif isinstance(arg, str):
            tags += "s"
            raw = arg.encode()
            payload += raw + b"\x00" * (_pad(len(raw)) - len(raw))
        else:
            raise TypeError(f"unsupported OSC argument type {type(arg).__name__}")
    put_string(tags)
    out.extend(payload)
    return bytes(out)


def decode_osc(data: bytes) -> tuple[str, list]:
    """Decode one OSC message into (address, args)."""

    def take_string(offset: int) -> tuple[str, int]:
        end = data.index(b"\x00", offset)
        return data[offset:end].decode(), offset + _pad(end - offset)

    try:
        address, pos = take_string(0)
        if not address.startswith("/"):
            raise OscDecodeError(f"address {address!r} does not start with '/'")
        tags, pos = take_string(pos)
        if not tags.startswith(","):
            raise OscDecodeError("missing type tag string")
        args: list = []
        for tag in tags[1:]:
            if tag == "f":
                args.append(struct.unpack_from(">f", data, pos)[0])
                pos += 4
            elif tag == "i":
                args.append(struct.unpack_from(">i", data, pos)[0])
                pos += 4
            elif tag == "d":
                args.append(struct.unpack_from(">d", data, pos)[0])
                pos += 8
            elif tag == "s":
                s, pos = take_string(pos)
                args.append(s)
            else:
                raise OscDecodeError(f"unsupported type tag {tag!r}")
        return address, args
    except OscDecodeError:
        raise
    except (ValueError, struct.error, IndexError) as exc:
        raise OscDecodeError(f"malformed OSC datagram: {exc}") from exc


def parse_interface_values(args: list, n_values: int) -> np.ndarray | None:
    """Validate and clamp ``/interface`` arguments.

    Both the OSC and the WebSocket path funnel through here so the two
    transports produce identical events.  Wrong arity or non-numeric
    arguments reject the message with a warning.
    """
    if len(args) != n_values:
        log.warning(
            "interface message has %d arguments, expected %d; dropped", len(args), n_values
        )
        return None
    try:
        values = np.asarray([float(a) for a in args], dtype=np.float64)
    except (TypeError, ValueError):
        log.warning("interface message has non-numeric arguments; dropped")
        return None
    if not np.all(np.isfinite(values)):
        log.warning("interface message has non-finite arguments; dropped")
        return None
    return np.clip(values, 0.0, 1.0)


def make_control_event(args: list, n_values: int, now: float) -> ControlEvent | None:
    values = parse_interface_values(args, n_values)
    if values is None:
        return None
    return ControlEvent(time=now, values=values)


class OscReceiver(threading.Thread):
    """UDP listener that decodes OSC and hands messages to a callback."""

    def __init__(self, host: str, port: int, handler):
        super().__init__(name="antiphon-osc-recv", daemon=True)
        self.handler = handler
        self._server = socketserver.UDPServer((host, port), _make_udp_handler(handler))
        self.port = self._server.server_address[1]  # resolved when port was 0

    def run(self) -> None:
        self._server.serve_forever(poll_interval=0.1)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self.is_alive():
            self.join(timeout=5)


def _make_udp_handler(handler):
    class Handler(socketserver.BaseRequestHandler):
        def handle(self) -> None:
            data = self.request[0]
            try:
                address, args = decode_osc(data)
            except OscDecodeError as exc:
                log.warning("dropping datagram from %s: %s", self.client_address, exc)
                return
            handler(address, args)

    return Handler


class OscSender:
    """Fire-and-forget OSC over UDP; send failures are counted, not fatal."""

    def __init__(self, host: str, port: int):
        self.target = (host, port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sent = 0
        self.errors = 0

    def send(self, address: str, values) -> bool:
        try:
            self._sock.sendto(encode_osc(address, [float(v) for v in values]), self.target)
            self.sent += 1
            return True
        except OSError as exc:
            self.errors += 1
            log.warning("OSC send to %s failed: %s", self.target, exc)
            return False

    def close(self) -> None:
        self._sock.close()


class EventLogger:
    """CSV session logger: header ``time,x1,...``, 6-decimal floats.

    One file per session, named by the wall-clock start time.  A daemon
    thread flushes once per second so a tailing reader (or a crash)
    never trails live events by more than that.  Internally locked so
    any thread may append.
    """

    def __init__(self, path: str | Path, n_values: int, flush_interval: float = 1.0):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w")
        self._fh.write("time," + ",".join(f"x{i + 1}" for i in range(n_values)) + "\n")
        self._fh.flush()
        self._lock = threading.Lock()
        self._closed = threading.Event()
        self.rows = 0
        if flush_interval > 0:
            self._flusher = threading.Thread(
                target=self._flush_loop, args=(flush_interval,),
                name="antiphon-log-flush", daemon=True,
            )
            self._flusher.start()

    def _flush_loop(self, interval: float) -> None:
        while not self._closed.wait(interval):
            self.flush()

    def append(self, event_time: float, values) -> None:
        row = f"{event_time:.6f}," + ",".join(f"{float(v):.6f}" for v in values) + "\n"
        with self._lock:
            self._fh.write(row)
            self.rows += 1

    def flush(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.flush()

    def close(self) -> None:
        self._closed.set()
        with self._lock:
            if not self._fh.closed:
                self._fh.flush()
                self._fh.close()


@dataclass
class SessionLogs:
    """Paired user/prediction logs for one live session."""

    events: EventLogger
    predictions: EventLogger

    @classmethod
    def open(cls, log_dir: str | Path, n_values: int, wall_time: float | None = None):
        stamp = time.strftime("%Y%m%d-%H%M%S", time.localtime(wall_time or time.time()))
        base = Path(log_dir) / f"session-{stamp}"
        path = Path(f"{base}.csv")
        serial = 1
        while path.exists():  # a second session within the same second
            path = Path(f"{base}-{serial}.csv")
            serial += 1
        prediction_path = path.with_name(path.stem + "-predictions.csv")
        return cls(
            events=EventLogger(path, n_values),
            predictions=EventLogger(prediction_path, n_values),
        )

    def close(self) -> None:
        self.events.close()
        self.predictions.close()
