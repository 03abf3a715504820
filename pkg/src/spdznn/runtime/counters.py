"""Per-protocol round and byte accounting.

A round is one call to ``Party.exchange``: a maximal batch of parallel
sends followed by the matching receives. Each round is charged to every
protocol scope that is open when it happens, so nested sub-protocols also
show up in their callers' totals.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Tally:
    rounds: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.rounds, self.bytes_sent, self.bytes_received)


@dataclass
class RoundCounters:
    tallies: dict[str, Tally] = field(default_factory=dict)

    def record(self, scopes, sent: int, received: int) -> None:
        names = ["total"] + [s for s in dict.fromkeys(scopes)]
        for name in names:
            t = self.tallies.setdefault(name, Tally())
            t.rounds += 1
            t.bytes_sent += sent
            t.bytes_received += received

    def rounds(self, name: str = "total") -> int:
        t = self.tallies.get(name)
        return t.rounds if t else 0

    def snapshot(self) -> dict[str, tuple[int, int, int]]:
        return {k: v.as_tuple() for k, v in sorted(self.tallies.items())}

    def diff(self, earlier: dict[str, tuple[int, int, int]]) -> dict[str, tuple[int, int, int]]:
        out = {}
        for k, now in self.snapshot().items():
            before = earlier.get(k, (0, 0, 0))
            delta = tuple(a - b for a, b in zip(now, before))
            if any(delta):
                out[k] = delta
        return out
