"""Transport agents: concrete delivery mechanisms behind the dispatcher.

Both agents move the same encoded frames. The in-process agent resolves
endpoints through a namespace and delivers through a bounded buffer; the TCP
agent keeps one persistent connection per endpoint. An agent may carry a
synthetic latency model (used by the deterministic simulation and by slow
injection); without one, round trips record wall-clock time.
"""

from __future__ import annotations

import random
import socket
import time
from collections import deque

from ..errors import ProtocolError, StoreShutdownError, TransportError
from .codec import ACK, Frame, decode_frame, encode_frame, read_exact, read_frame

LATENCY_WINDOW = 16  # rolling mean over this many round trips


class LatencyModel:
    def __init__(self, base_us: int, jitter_us: int = 0, seed: int = 0):
        self.base_us = base_us
        self.jitter_us = jitter_us
        self._rng = random.Random(seed)

    def sample(self) -> int:
        if self.jitter_us:
            return max(1, self.base_us + self._rng.randint(-self.jitter_us, self.jitter_us))
        return max(1, self.base_us)

    def set_base(self, base_us: int) -> None:
        self.base_us = base_us


def _raise_remote(frame: Frame) -> None:
    if frame.op == "error":
        if frame.kind == "protocol":
            raise ProtocolError(frame.signature)
        if frame.kind == "shutdown":
            raise StoreShutdownError(frame.signature)
        raise TransportError(frame.signature)


class TransportAgent:
    """Base agent: availability flag plus the rolling latency mean the
    dispatcher selects on. An agent with no samples reports an effective
    latency of 0 so new transports get probed before measured ones win."""

    def __init__(self, name: str, latency_model: LatencyModel | None = None):
        self.name = name
        self.available = True
        self.latency_model = latency_model
        self._samples: deque[int] = deque(maxlen=LATENCY_WINDOW)
        self.sample_count = 0

    @property
    def measured_latency(self) -> float | None:
        if not self._samples:
            return None
        return sum(self._samples) / len(self._samples)

    def effective_latency(self) -> float:
        measured = self.measured_latency
        return 0.0 if measured is None else measured

    def record_latency(self, us: int) -> None:
        self._samples.append(us)
        self.sample_count += 1

    def request(self, endpoint: str, frame: Frame, timeout_s: float,
                expect_ack: bool, record_latency: bool = False) -> Frame | None:
        started = time.monotonic()
        response = self._deliver(endpoint, frame, timeout_s, expect_ack)
        if record_latency:
            if self.latency_model is not None:
                self.record_latency(self.latency_model.sample())
            else:
                self.record_latency(max(1, int((time.monotonic() - started) * 1e6)))
        if response is not None:
            _raise_remote(response)
        return response

    def _deliver(self, endpoint: str, frame: Frame, timeout_s: float,
                 expect_ack: bool) -> Frame | None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessNamespace:
    """Endpoint registry for in-process delivery. Handlers take a Frame and
    return ("ack", None) or ("frame", Frame); a deregistered endpoint models
    a dead store."""

    def __init__(self) -> None:
        self._handlers: dict[str, object] = {}

    def register(self, endpoint: str, handler) -> None:
        self._handlers[endpoint] = handler

    def deregister(self, endpoint: str) -> None:
        self._handlers.pop(endpoint, None)

    def resolve(self, endpoint: str):
        return self._handlers.get(endpoint)


class InProcessTransport(TransportAgent):
    CAPACITY = 1024

    def __init__(self, namespace: InProcessNamespace, name: str = "inproc",
                 latency_model: LatencyModel | None = None):
        super().__init__(name, latency_model)
        self._namespace = namespace
        self._buffer: deque[bytes] = deque()

    def _deliver(self, endpoint: str, frame: Frame, timeout_s: float,
                 expect_ack: bool) -> Frame | None:
        handler = self._namespace.resolve(endpoint)
        if handler is None:
            raise TransportError(f"no such endpoint {endpoint!r}")
        if len(self._buffer) >= self.CAPACITY:
            raise TransportError("in-process queue full")
        # encode and decode so this path carries exactly the wire frames
        self._buffer.append(encode_frame(frame))
        delivered = decode_frame(self._buffer.popleft())
        kind, response = handler(delivered)
        if expect_ack:
            if kind == "ack":
                return None
            if kind == "frame" and response.op == "error":
                return response  # surfaced to _raise_remote by request()
            raise TransportError("expected acknowledgment, got a frame")
        if kind != "frame":
            raise TransportError("expected a frame, got an acknowledgment")
        return response


class TcpTransport(TransportAgent):
    def __init__(self, name: str = "tcp", latency_model: LatencyModel | None = None,
                 connect_timeout_s: float = 5.0):
        super().__init__(name, latency_model)
        self._connect_timeout_s = connect_timeout_s
        self._conns: dict[str, socket.socket] = {}

    def _connect(self, endpoint: str, timeout_s: float) -> socket.socket:
        sock = self._conns.get(endpoint)
        if sock is not None:
            return sock
        host, _, port = endpoint.rpartition(":")
        try:
            sock = socket.create_connection((host, int(port)),
                                            timeout=self._connect_timeout_s)
        except (OSError, ValueError) as err:
            raise TransportError(f"connect to {endpoint}: {err}") from None
        sock.settimeout(timeout_s)
        self._conns[endpoint] = sock
        return sock

    def _drop(self, endpoint: str) -> None:
        sock = self._conns.pop(endpoint, None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def _deliver(self, endpoint: str, frame: Frame, timeout_s: float,
                 expect_ack: bool) -> Frame | None:
        sock = self._connect(endpoint, timeout_s)
        try:
            sock.settimeout(timeout_s)
            sock.sendall(encode_frame(frame))
            if expect_ack:
                first = read_exact(sock, 1)
                if first == ACK:
                    return None
                if not first:
                    raise TransportError("connection closed awaiting ack")
                # not an ack: the head of a length-prefixed error frame
                rest = read_exact(sock, 3)
                if len(rest) < 3:
                    raise TransportError("connection closed mid-frame")
                length = int.from_bytes(first + rest, "big")
                return decode_frame(first + rest + read_exact(sock, length))
            response = read_frame(sock)
            if response is None:
                raise TransportError("connection closed awaiting response")
            return response
        except (OSError, TransportError) as err:
            self._drop(endpoint)
            if isinstance(err, TransportError):
                raise
            raise TransportError(f"send to {endpoint}: {err}") from None

    def close(self) -> None:
        for endpoint in list(self._conns):
            self._drop(endpoint)
