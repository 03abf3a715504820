"""Run one protocol job across all parties.

``run_simulated`` executes every party engine in its own thread over an
in-process network; ``run_networked`` does the same over loopback TCP
sockets. Both return the per-party outputs, counters and transcripts. Any
abort ends the session for everyone and is re-raised with the frame label
where it first happened.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from ..errors import ProtocolAbort, SessionAborted
from .counters import RoundCounters
from .party import Adversary, Party
from .transport import LatencyTransport, SimulatedNetwork, TcpTransport, Transport


@dataclass
class SessionResult:
    outputs: list
    counters: list[RoundCounters]
    transcripts: list[bytes]
    seconds: float
    parties: list[Party] = field(default_factory=list, repr=False)

    @property
    def rounds(self) -> int:
        return self.counters[0].rounds()


def _make_party(pid: int, n: int, transport: Transport, *, seed, session_id, dealer, sources,
                mac_keys, mac_modulus, adversaries, kappa) -> Party:
    material = mac_key = None
    if dealer is not None:
        material = dealer.source(pid)
        mac_key = dealer.alpha_shares[pid] if dealer.alpha_shares else None
        mac_modulus = mac_modulus or dealer.mac_modulus
    if sources is not None:
        material = sources[pid]
    if mac_keys is not None:
        mac_key = mac_keys[pid]
    return Party(pid, n, transport, seed=seed, session_id=session_id, material=material,
                 mac_key=mac_key, mac_modulus=mac_modulus,
                 adversary=(adversaries or {}).get(pid), kappa=kappa)


def _run_threads(parties: list[Party], job: Callable, abort: Callable[[], None]) -> SessionResult:
    n = len(parties)
    outputs: list = [None] * n
    errors: list = [None] * n
    first: list = []
    lock = threading.Lock()

    def body(p: Party) -> None:
        try:
            outputs[p.pid] = job(p)
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            if isinstance(exc, ProtocolAbort) and exc.frame is None:
                exc.frame = p.frame_label
            errors[p.pid] = exc
            with lock:
                if not isinstance(exc, SessionAborted):
                    first.append(exc)
            abort()

    start = time.perf_counter()
    threads = [threading.Thread(target=body, args=(p,), name=f"party-{p.pid}", daemon=True)
               for p in parties]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    seconds = time.perf_counter() - start
    if first:
        raise first[0]
    for err in errors:
        if err is not None:
            raise err
    return SessionResult(outputs, [p.counters for p in parties],
                         [bytes(p.transcript or b"") for p in parties], seconds, parties)


def run_simulated(n: int, job: Callable[[Party], object], *, seed=0, session_id: int = 0,
                  dealer=None, sources=None, mac_keys=None, mac_modulus: int | None = None,
                  adversaries: dict[int, Adversary] | None = None, kappa: int = 8,
                  latency: float = 0.0) -> SessionResult:
    """Run ``job(party)`` for every party over the in-process network."""
    net = SimulatedNetwork(n)
    parties = []
    for pid in range(n):
        tr: Transport = net.endpoint(pid)
        if latency:
            tr = LatencyTransport(tr, latency)
        parties.append(_make_party(pid, n, tr, seed=seed, session_id=session_id, dealer=dealer,
                                   sources=sources, mac_keys=mac_keys, mac_modulus=mac_modulus,
                                   adversaries=adversaries, kappa=kappa))
    return _run_threads(parties, job, net.abort)


def free_endpoints(n: int, host: str = "127.0.0.1") -> tuple[list[tuple[str, int]], list[socket.socket]]:
    """Bind n listening sockets on ephemeral ports."""
    listeners = [socket.create_server((host, 0)) for _ in range(n)]
    return [s.getsockname()[:2] for s in listeners], listeners


def run_networked(n: int, job: Callable[[Party], object], *, seed=0, session_id: int = 0,
                  dealer=None, sources=None, mac_keys=None, mac_modulus: int | None = None,
                  adversaries: dict[int, Adversary] | None = None, kappa: int = 8,
                  latency: float = 0.0, connect_timeout: float = 30.0) -> SessionResult:
    """Run ``job`` with every party on its own loopback TCP endpoint."""
    endpoints, listeners = free_endpoints(n)
    transports: list = [None] * n
    failures: list = []

    def connect(pid: int) -> None:
        try:
            transports[pid] = TcpTransport(pid, endpoints, listener=listeners[pid],
                                           connect_timeout=connect_timeout)
        except ProtocolAbort as exc:
            failures.append(exc)

    threads = [threading.Thread(target=connect, args=(pid,), daemon=True) for pid in range(n)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if failures:
        for tr in transports:
            if tr is not None:
                tr.close()
        raise failures[0]
    parties = []
    for pid in range(n):
        tr: Transport = transports[pid]
        if latency:
            tr = LatencyTransport(tr, latency)
        parties.append(_make_party(pid, n, tr, seed=seed, session_id=session_id, dealer=dealer,
                                   sources=sources, mac_keys=mac_keys, mac_modulus=mac_modulus,
                                   adversaries=adversaries, kappa=kappa))

    def abort() -> None:
        for tr in transports:
            tr.abort_peers()

    try:
        return _run_threads(parties, job, abort)
    finally:
        for tr in transports:
            tr.close()
