"""Threaded TCP server exposing one store frontend.

Binding port 0 picks an ephemeral port; the endpoint property reports the
address peers should dial. One thread per connection, frames answered in
order on that connection.
"""

from __future__ import annotations

import socket
import threading

from ..errors import TransportError
from .codec import ACK, encode_frame, read_frame
from .frontend import StoreFrontend


class StoreTcpServer:
    def __init__(self, frontend: StoreFrontend, host: str = "127.0.0.1",
                 port: int = 0):
        self.frontend = frontend
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()[:2]
        self._stop = threading.Event()
        self._conns: list[socket.socket] = []
        self._lock = threading.Lock()
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "StoreTcpServer":
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._lock:
                self._conns.append(conn)
            threading.Thread(target=self._serve_conn, args=(conn,),
                             daemon=True).start()

    def _serve_conn(self, conn: socket.socket) -> None:
        try:
            while not self._stop.is_set():
                frame = read_frame(conn)
                if frame is None:
                    break
                kind, response = self.frontend.handle(frame)
                if kind == "ack":
                    conn.sendall(ACK)
                else:
                    conn.sendall(encode_frame(response))
        except (OSError, TransportError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            conns, self._conns = self._conns, []
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass
        if self._accept_thread.is_alive():
            self._accept_thread.join(timeout=1.0)
