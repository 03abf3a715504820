"""Point-to-point transports with per-pair FIFO delivery.

``SimulatedNetwork`` connects in-process party threads through queues.
``TcpTransport`` speaks the same frames over sockets. ``LatencyTransport``
wraps either one and delays deliveries to emulate a WAN link.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

from ..errors import SessionAborted, TransportFailure
from .wire import HEADER, HEADER_SIZE, MsgKind, encode_frame

RECV_TIMEOUT = 600.0


class Transport:
    pid: int

    def abort_peers(self) -> None:
        pass

    def send(self, dst: int, frame: bytes) -> None:
        raise NotImplementedError

    def recv(self, src: int) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class SimulatedNetwork:
    """Queues for every ordered pair of parties."""

    def __init__(self, n: int):
        self.n = n
        self._queues = {(i, j): queue.SimpleQueue()
                        for i in range(n) for j in range(n) if i != j}

    def endpoint(self, pid: int) -> "SimulatedTransport":
        return SimulatedTransport(self, pid)

    def abort(self) -> None:
        for q in self._queues.values():
            q.put(None)


class SimulatedTransport(Transport):
    def __init__(self, net: SimulatedNetwork, pid: int):
        self.net, self.pid = net, pid

    def send(self, dst: int, frame: bytes) -> None:
        self.net._queues[(self.pid, dst)].put(frame)

    def recv(self, src: int) -> bytes:
        try:
            frame = self.net._queues[(src, self.pid)].get(timeout=RECV_TIMEOUT)
        except queue.Empty as exc:
            raise TransportFailure() from exc
        if frame is None:
            raise SessionAborted("peer aborted the session")
        return frame


_PID = struct.Struct(">I")


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise TransportFailure()
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class TcpTransport(Transport):
    """Full mesh over TCP. Lower party ids accept, higher ones connect."""

    def __init__(self, pid: int, endpoints: list[tuple[str, int]],
                 listener: socket.socket | None = None, connect_timeout: float = 30.0):
        self.pid = pid
        self.n = len(endpoints)
        self._socks: dict[int, socket.socket] = {}
        self._lock = threading.Lock()
        if listener is None and pid < self.n - 1:
            listener = socket.create_server(endpoints[pid])
        deadline = time.monotonic() + connect_timeout
        try:
            for j in range(pid):
                self._socks[j] = self._connect(endpoints[j], deadline)
            if listener is not None:
                listener.settimeout(connect_timeout)
                while len(self._socks) < self.n - 1:
                    conn, _ = listener.accept()
                    (peer,) = _PID.unpack(_recv_exact(conn, 4))
                    self._socks[peer] = conn
                listener.close()
        except (OSError, socket.timeout) as exc:
            self.close()
            raise TransportFailure() from exc
        for s in self._socks.values():
            s.settimeout(RECV_TIMEOUT)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def _connect(self, addr: tuple[str, int], deadline: float) -> socket.socket:
        while True:
            try:
                s = socket.create_connection(addr, timeout=5.0)
                s.sendall(_PID.pack(self.pid))
                return s
            except OSError:
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)

    def send(self, dst: int, frame: bytes) -> None:
        try:
            self._socks[dst].sendall(frame)
        except OSError as exc:
            raise TransportFailure() from exc

    def recv(self, src: int) -> bytes:
        try:
            head = _recv_exact(self._socks[src], HEADER_SIZE)
            length = HEADER.unpack(head)[0]
            frame = head + _recv_exact(self._socks[src], length)
        except (OSError, socket.timeout) as exc:
            raise TransportFailure() from exc
        if frame[4] == 255:
            raise SessionAborted("peer aborted the session")
        return frame

    def abort_peers(self) -> None:
        """Tell every peer the session is over (best effort)."""
        frame = encode_frame(MsgKind.ABORT, 0, 0, [])
        for s in self._socks.values():
            try:
                s.sendall(frame)
            except OSError:
                pass

    def close(self) -> None:
        for s in self._socks.values():
            try:
                s.close()
            except OSError:
                pass


class LatencyTransport(Transport):
    """Adds a fixed one-way delay to every delivery."""

    def __init__(self, inner: Transport, delay: float):
        self.inner, self.delay, self.pid = inner, delay, inner.pid
        self._last_send = 0.0

    def send(self, dst: int, frame: bytes) -> None:
        self._last_send = time.monotonic()
        self.inner.send(dst, frame)

    def recv(self, src: int) -> bytes:
        frame = self.inner.recv(src)
        wait = self._last_send + self.delay - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        return frame

    def abort_peers(self) -> None:
        self.inner.abort_peers()

    def close(self) -> None:
        self.inner.close()
