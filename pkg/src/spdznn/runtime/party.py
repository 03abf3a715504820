"""The per-party protocol engine.

Protocols are written SPMD style: every party runs the same code on its
own ``Party`` and the engines meet only inside ``exchange``. Each
``exchange`` is one communication round and is charged to the protocol
scopes open at that moment.
"""

from __future__ import annotations

import contextlib
import hashlib
import random
from typing import Iterable

from ..errors import TransportFailure
from .counters import RoundCounters
from .transport import Transport
from .wire import MsgKind, decode_frame, encode_frame


def derive_seed(seed, *labels) -> int:
    h = hashlib.sha256(repr(seed).encode())
    for label in labels:
        h.update(b"\x00" + repr(label).encode())
    return int.from_bytes(h.digest(), "big")


class Adversary:
    """Hook points for fault injection; the default is honest."""

    def tamper(self, party: "Party", point: str, values):
        return values


class Party:
    def __init__(self, pid: int, n: int, transport: Transport, *, seed=0,
                 session_id: int = 0, material=None, mac_key: int | None = None,
                 mac_modulus: int | None = None, adversary: Adversary | None = None,
                 kappa: int = 8, record_transcript: bool = True):
        self.pid, self.n = pid, n
        self.transport = transport
        self.seed = seed
        self.rng = random.Random(derive_seed(seed, "party", pid))
        self.session_id = session_id & (2**64 - 1)
        self.material = material
        self.alpha = mac_key
        self.mac_modulus = mac_modulus
        self.adversary = adversary
        self.kappa = kappa
        self.counters = RoundCounters()
        self.round = 0
        self.pending: list[tuple] = []  # (opened values, tag shares) awaiting mac_check
        self._scopes: list[str] = []
        self.transcript = bytearray() if record_transcript else None

    # ---- bookkeeping ----------------------------------------------------
    @property
    def leader(self) -> bool:
        return self.pid == 0

    @property
    def peers(self) -> list[int]:
        return [j for j in range(self.n) if j != self.pid]

    @contextlib.contextmanager
    def scope(self, name: str):
        self._scopes.append(name)
        try:
            yield self
        finally:
            self._scopes.pop()

    @property
    def frame_label(self) -> str:
        return "/".join(self._scopes) + f"@round{self.round}"

    def tamper(self, point: str, values):
        if self.adversary is None:
            return values
        return self.adversary.tamper(self, point, values)

    def authenticated(self, modulus: int) -> bool:
        return self.mac_modulus is not None and modulus == self.mac_modulus

    # ---- communication --------------------------------------------------
    def exchange(self, sends: dict[int, Iterable[int]], expect: Iterable[int],
                 kind: MsgKind = MsgKind.DATA) -> dict[int, list[int]]:
        """Send to some peers, then receive from ``expect``; one round."""
        self.round += 1
        tag = self.round & 0xFFFFFFFF
        sent = received = 0
        for dst in sorted(sends):
            frame = encode_frame(kind, self.session_id, tag, sends[dst])
            self.transport.send(dst, frame)
            sent += len(frame)
            if self.transcript is not None:
                self.transcript += frame
        out = {}
        for src in sorted(expect):
            frame = self.transport.recv(src)
            received += len(frame)
            if self.transcript is not None:
                self.transcript += frame
            msg = decode_frame(frame)
            if msg.round_tag != tag or msg.session_id != self.session_id:
                raise TransportFailure(
                    f"out-of-sync frame from party {src}: round {msg.round_tag} != {tag}")
            out[src] = msg.values
        self.counters.record(self._scopes, sent, received)
        return out

    def broadcast(self, values, kind: MsgKind = MsgKind.OPEN) -> list[list[int]]:
        """Everyone sends the same list to everyone; returns rows by party id."""
        values = [int(v) for v in values]
        got = self.exchange({j: values for j in self.peers}, self.peers, kind)
        got[self.pid] = values
        return [got[j] for j in range(self.n)]

    def send_to(self, owner: int, values, kind: MsgKind = MsgKind.DATA) -> list[list[int]] | None:
        """All non-owners send to ``owner``; the owner gets rows by party id."""
        values = [int(v) for v in values]
        if self.pid == owner:
            got = self.exchange({}, self.peers, kind)
            got[self.pid] = values
            return [got[j] for j in range(self.n)]
        self.exchange({owner: values}, [], kind)
        return None

    def from_owner(self, owner: int, values=None, kind: MsgKind = MsgKind.DATA) -> list[int]:
        """The owner sends ``values`` to everyone; all return them."""
        if self.pid == owner:
            values = [int(v) for v in values]
            self.exchange({j: values for j in self.peers}, [], kind)
            return values
        return self.exchange({}, [owner], kind)[owner]

    def deal(self, per_party: dict[int, list[int]] | None, dealers: Iterable[int],
             kind: MsgKind = MsgKind.DATA) -> dict[int, list[int]]:
        """Each dealer sends a private list to each peer, all in one round.

        ``per_party`` maps recipient to the list this party deals to it.
        Returns what every dealer dealt to this party (own entry included).
        """
        dealers = list(dealers)
        sends = {} if per_party is None else {j: v for j, v in per_party.items() if j != self.pid}
        expect = [d for d in dealers if d != self.pid]
        got = self.exchange(sends, expect, kind)
        if per_party is not None and self.pid in dealers:
            got[self.pid] = per_party[self.pid]
        return got

    # ---- randomness -------------------------------------------------------
    def rand_below(self, t: int, count: int) -> list[int]:
        r = self.rng.randrange
        return [r(t) for _ in range(count)]

    def random_bytes(self, k: int) -> bytes:
        return self.rng.getrandbits(8 * k).to_bytes(k, "big")
