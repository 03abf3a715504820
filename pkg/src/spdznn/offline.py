"""Offline phase: demand planning, interactive generation, store checks.

Two ways to fill the per-party preprocessing stores:

* ``dealer`` -- the seeded trusted dealer writes every store directly;
* ``protocol`` -- the parties run the interactive generators. Triples
  over a Paillier modulus come from ``trigen`` and are sacrificed; triples
  over the online field are converted with ``trip_conv`` through a second
  Paillier modulus N' > (2^kappa N)^2 and sacrificed again. Bits, inverse
  pairs, bounded masks and dual masks come from RndBit, RndInv, PRndInt
  and RndDual run over whichever modulus is requested, and everything over
  the MAC field is tagged last by a Beaver product with the MAC key.

Demand is found by a dry run of the online job against a recording source.
"""

from __future__ import annotations

import contextlib
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import material, paillier
from .comparison import prnd_int, rnd_bit, rnd_inv
from .conversion import rnd_dual, trip_conv
from .errors import ConfigError, RandomBitAbort, SacrificeFailure
from .material import (BeaverTriple, Dealer, MaterialSource, components, records_to_shares,
                       shares_to_records, tagged)
from .runtime.session import run_simulated
from .runtime.store import Kind, PreprocessingStore
from .sharing import mul_beaver
from .shares import Share, as_obj
from .triples import rnd_int, sacrifice, trigen

log = logging.getLogger(__name__)

Demand = dict  # {(Kind, modulus, params): count}


# ---- planning ------------------------------------------------------------------

class RecordingSource(MaterialSource):
    """Serves dealer material while tallying every request."""

    def __init__(self, dealer: Dealer, pid: int):
        self.inner = dealer.source(pid)
        self.demand: Counter = Counter()

    def take(self, party, kind, t, params, count):
        self.demand[(Kind(kind), t, tuple(params))] += count
        return self.inner.take(party, kind, t, params, count)


def plan_demand(n: int, job, *, mac_modulus: int | None, kappa: int, seed=0) -> Demand:
    """Material one party consumes when running ``job`` (a dry run)."""
    dealer = Dealer(n, seed=("plan", seed), mac_modulus=mac_modulus)
    sources = [RecordingSource(dealer, pid) for pid in range(n)]
    run_simulated(n, job, seed=seed, dealer=dealer, sources=sources, kappa=kappa)
    return dict(sources[0].demand)


def parse_demand(items, Q: int) -> Demand:
    """'triple=10', 'bit=5', 'bounded:12=4' style entries over Q."""
    out: Demand = {}
    for item in items:
        name, _, count = item.partition("=")
        kind_name, *params = name.split(":")
        label = kind_name.upper().removesuffix("_Q")
        label = label[:-1] if label.endswith("S") and label[:-1] in Kind.__members__ else label
        try:
            kind = Kind[label]
        except KeyError:
            raise ConfigError(f"unknown material kind {kind_name!r}") from None
        key = (kind, Q, tuple(int(p) for p in params))
        out[key] = out.get(key, 0) + int(count)
    return out


# ---- protocol-backed generation ----------------------------------------------------

@dataclass
class PaillierKey:
    pk: paillier.PaillierPublicKey
    share: paillier.PaillierDecShare


@contextlib.contextmanager
def _unauthenticated(party):
    saved = party.mac_modulus
    party.mac_modulus = None
    try:
        yield
    finally:
        party.mac_modulus = saved


@dataclass
class ProtocolSource(MaterialSource):
    """Generates material on request by running the offline protocols.

    ``base`` is the Paillier key used for triples that get converted to the
    online field; ``lift`` is the Paillier key whose modulus serves as N'.
    Generation aborts (failed sacrifice, failed RndBit check) are logged in
    ``aborts`` and retried up to ``max_retries`` times.
    """

    base: PaillierKey
    lift: PaillierKey
    max_retries: int = 3
    aborts: list = field(default_factory=list)

    def __post_init__(self):
        N, Np = self.base.pk.N, self.lift.pk.N
        if Np <= N * N:
            raise ConfigError("the lifting modulus must exceed N^2")
        self.keys = {N: self.base, Np: self.lift}

    def take(self, party, kind, t, params, count):
        kind, params = Kind(kind), tuple(params)
        if count == 0:
            return records_to_shares([], kind, t, params, None)
        for attempt in range(self.max_retries + 1):
            try:
                with party.scope("offline"), _unauthenticated(party):
                    parts = self._generate(party, kind, t, params, count)
                break
            except (SacrificeFailure, RandomBitAbort) as exc:
                self.aborts.append((kind.name, t, attempt, str(exc)))
                log.warning("offline generation aborted (%s), attempt %d", exc, attempt)
                if attempt == self.max_retries:
                    raise
        if party.mac_modulus is not None:
            parts = [self._tag(party, p) if tagged(kind, p.modulus, party.mac_modulus) else p
                     for p in parts]
        return parts

    # -- per-kind generators --------------------------------------------------
    def _generate(self, party, kind: Kind, t: int, params: tuple, count: int) -> list[Share]:
        if kind == Kind.TRIPLE:
            tr = self._triples(party, t, count)
            return [tr.a, tr.b, tr.c]
        if kind == Kind.BIT:
            return [rnd_bit(party, t, count)]
        if kind == Kind.RNDINT:
            return [rnd_int(party, t, count)]
        if kind == Kind.ZERO:
            return [rnd_int(party, t, count, own=[0] * count)]
        if kind == Kind.BOUNDED:
            (nbits,) = params
            if nbits == 0:
                return [rnd_int(party, t, count, own=[0] * count)]
            return [prnd_int(party, nbits, t, count)[0]]
        if kind == Kind.INVPAIR:
            return list(rnd_inv(party, t, count))
        if kind == Kind.PREMUL:
            (ell,) = params
            u, z = rnd_inv(party, t, count * ell)
            u, z = u.reshape(count, ell), z.reshape(count, ell)
            w = u.copy()
            if ell > 1:
                shifted = mul_beaver(party, u[:, 1:], z[:, :-1],
                                     material.triples(party, t, (count, ell - 1)))
                w = Share.concat([u[:, :1], shifted], axis=1)
            return [w, z]
        if kind == Kind.DUAL:
            big, nbits = params
            return list(rnd_dual(party, t, big, nbits, count))
        if kind == Kind.MTRIPLE:
            return self._matrix_triples(party, t, params, count)
        raise ConfigError(f"no generator for {kind.name}")

    def _triples(self, party, t: int, count: int) -> BeaverTriple:
        if t in self.keys:
            key = self.keys[t]
            pairs = trigen(party, key.pk, key.share, 2 * count)
        else:
            base = self._triples(party, self.base.pk.N, 2 * count)
            pairs = trip_conv(party, base, t, self.lift.pk.N)
        first = BeaverTriple(pairs.a[:count], pairs.b[:count], pairs.c[:count])
        second = BeaverTriple(pairs.a[count:], pairs.b[count:], pairs.c[count:])
        return sacrifice(party, first, second)

    def _matrix_triples(self, party, t, dims, count) -> list[Share]:
        """Random A, B with C = AB from r*s*u scalar triples in one round."""
        r, s, u = dims
        A = rnd_int(party, t, count * r * s).reshape(count, r, s, 1)
        B = rnd_int(party, t, count * s * u).reshape(count, 1, s, u)
        shape = (count, r, s, u)
        Ab = Share(t, np.broadcast_to(A.values, shape).copy())
        Bb = Share(t, np.broadcast_to(B.values, shape).copy())
        C = mul_beaver(party, Ab, Bb, material.triples(party, t, shape)).sum(axis=2)
        return [A.reshape(count, r, s), B.reshape(count, s, u), C]

    def _tag(self, party, x: Share) -> Share:
        """Attach shares of alpha * x via a Beaver product with the key."""
        Q = party.mac_modulus
        alpha = Share(Q, np.full(x.shape, party.alpha, dtype=object))
        with party.scope("offline"), party.scope("tag"), _unauthenticated(party):
            tags = mul_beaver(party, x, alpha, material.triples(party, Q, x.shape))
        return Share(Q, x.values, tags.values)


# ---- store generation ------------------------------------------------------------

def dealer_stores(n: int, demand: Demand, *, seed=0, mac_modulus: int | None = None
                  ) -> list[PreprocessingStore]:
    stores = [PreprocessingStore() for _ in range(n)]
    if not demand:
        return stores
    Dealer(n, seed=seed, mac_modulus=mac_modulus).fill_stores(stores, demand)
    return stores


def protocol_stores(keys: list[tuple[PaillierKey, PaillierKey]], demand: Demand, *,
                    mac_keys: list[int] | None, mac_modulus: int | None, kappa: int,
                    seed=0, runner=run_simulated) -> tuple[list[PreprocessingStore], list]:
    """Run the interactive generators for ``demand`` and write one store per party.

    ``keys[i]`` is party i's (base, lift) Paillier key pair; ``mac_keys[i]``
    its share of the MAC key. Returns the stores and the logged aborts.
    """
    n = len(keys)

    def job(party):
        src = ProtocolSource(*keys[party.pid])
        party.material = src
        store = PreprocessingStore()
        if mac_modulus is not None and demand:
            store.append(Kind.MACKEY, mac_modulus, [party.alpha])
        for kind, t, params in sorted(demand, key=repr):
            count = demand[(kind, t, params)]
            parts = src.take(party, kind, t, params, count)
            for rec in shares_to_records(parts, count):
                store.append(kind, t, list(params) + rec)
        return store, src.aborts

    result = runner(n, job, seed=seed, mac_keys=mac_keys, mac_modulus=mac_modulus, kappa=kappa)
    return [o[0] for o in result.outputs], result.outputs[0][1]


def mac_key_shares(n: int, mac_modulus: int, seed=0) -> list[int]:
    return list(Dealer(n, seed=seed, mac_modulus=mac_modulus).alpha_shares)


# ---- verification -------------------------------------------------------------------

@dataclass
class StoreReport:
    checked: Counter = field(default_factory=Counter)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _reconstruct(parts: list[list[Share]]) -> tuple[list[np.ndarray], list[np.ndarray | None]]:
    values, macs = [], []
    for c in range(len(parts[0])):
        mod = parts[0][c].modulus
        values.append(sum(p[c].values for p in parts) % mod)
        macs.append(None if parts[0][c].macs is None else sum(p[c].macs for p in parts) % mod)
    return values, macs


def verify_stores(stores: list[PreprocessingStore]) -> StoreReport:
    """Reconstruct every record across all parties' stores and check it.

    Test-mode oracle: needs every party's store. Checks c = ab for
    triples, bit-ness, inverse pairs, prefix-mask structure, mask bounds,
    dual-mask agreement and MAC tags against the reconstructed key.
    """
    report = StoreReport()
    alpha = mac_mod = None
    if all(s.mac_key for s in stores):
        mac_mod = stores[0].mac_key[0]
        alpha = sum(s.mac_key[1] for s in stores) % mac_mod
    streams = [s._streams for s in stores]
    for key in sorted(streams[0], key=repr):
        kind, t, params = key
        lens = {len(st.get(key, ())) for st in streams}
        if len(lens) != 1:
            report.failures.append((kind.name, t, params, "record counts differ between parties"))
            continue
        recs = [list(st[key]) for st in streams]
        count = lens.pop()
        parts = [records_to_shares(r, kind, t, params, mac_mod) for r in recs]
        vals, macs = _reconstruct(parts)
        bad = _check_kind(kind, t, params, vals)
        for (mod, _), v, m in zip(components(kind, t, params), vals, macs):
            if m is not None and np.any((m - v * alpha) % mod != 0):
                bad.append("MAC tags do not match the key")
        for reason in bad:
            report.failures.append((kind.name, t, params, reason))
        report.checked[kind.name] += count
    return report


def _check_kind(kind: Kind, t: int, params: tuple, vals: list[np.ndarray]) -> list[str]:
    bad = []
    if kind == Kind.TRIPLE:
        a, b, c = vals
        if np.any((a * b - c) % t != 0):
            bad.append("c != ab")
    elif kind == Kind.MTRIPLE:
        A, B, C = vals
        for i in range(len(A)):
            if np.any((np.dot(A[i], B[i]) - C[i]) % t != 0):
                bad.append("C != AB")
                break
    elif kind == Kind.BIT:
        if any(int(v) not in (0, 1) for v in vals[0].ravel()):
            bad.append("non-bit value")
    elif kind == Kind.ZERO:
        if np.any(vals[0] != 0):
            bad.append("non-zero value")
    elif kind == Kind.BOUNDED:
        if any(int(v) >= 2 ** params[0] for v in vals[0].ravel()):
            bad.append("value exceeds its bit bound")
    elif kind == Kind.INVPAIR:
        if np.any(vals[0] * vals[1] % t != 1):
            bad.append("pair is not inverse")
    elif kind == Kind.PREMUL:
        w, z = vals
        u = w.copy()
        for j in range(1, w.shape[1]):
            u[:, j] = w[:, j] * _inverses(z[:, j - 1], t) % t
        if np.any(u * z % t != 1):
            bad.append("prefix masks are inconsistent")
    elif kind == Kind.DUAL:
        big, nbits = params
        small, large = vals
        if any(int(b) >= 2**nbits or int(b) % t != int(s) for s, b in zip(small, large)):
            bad.append("dual mask disagrees across moduli")
    return bad


def _inverses(col: np.ndarray, t: int) -> np.ndarray:
    return as_obj([pow(int(v), -1, t) for v in col])
