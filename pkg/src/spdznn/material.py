"""Correlated randomness consumed by the online protocols.

Protocols ask their ``Party`` for material through the helpers at the
bottom of this module (``triples``, ``bits``, ...). The party's material
source decides where it comes from:

* ``DealerSource`` -- a seeded trusted dealer shared by in-process parties,
  generating each batch lazily the first time any party asks for it;
* ``StoreSource`` -- a per-party preprocessing store loaded from disk;
* ``offline.ProtocolSource`` -- generated on the spot by the interactive
  offline protocols (Paillier triples, RndBit, RndInv, ...).

Material over the MAC field always carries tag shares.
"""

from __future__ import annotations

import math
import random
import threading
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import numtheory as nt
from .errors import MaterialDepleted, MaterialReuse
from .runtime.party import derive_seed
from .runtime.store import Kind, PreprocessingStore
from .shares import Share, as_obj


# ---- single-use material containers --------------------------------------

@dataclass
class BeaverTriple:
    a: Share
    b: Share
    c: Share
    used: bool = False

    @property
    def modulus(self) -> int:
        return self.a.modulus

    def consume(self) -> None:
        if self.used:
            raise MaterialReuse("Beaver triple already consumed")
        self.used = True


@dataclass
class MatrixTriple:
    A: Share
    B: Share
    C: Share
    used: bool = False

    @property
    def dims(self) -> tuple[int, int, int]:
        r, s = self.A.shape
        return (r, s, self.B.shape[1])

    def consume(self) -> None:
        if self.used:
            raise MaterialReuse("matrix triple already consumed")
        self.used = True


@dataclass
class InputMask:
    r: Share
    used: bool = False

    def consume(self) -> None:
        if self.used:
            raise MaterialReuse("input mask already consumed")
        self.used = True


# ---- record layout ----------------------------------------------------------

# kinds whose components never carry MAC tags (conversion masks)
PLAIN_KINDS = {Kind.DUAL}


def tagged(kind: Kind, mod: int, mac_modulus: int | None) -> bool:
    return mac_modulus is not None and mod == mac_modulus and Kind(kind) not in PLAIN_KINDS


def components(kind: Kind, t: int, params: tuple) -> list[tuple[int, tuple]]:
    """(modulus, per-item shape) of each component of a material item."""
    if kind in (Kind.TRIPLE,):
        return [(t, ())] * 3
    if kind in (Kind.BIT, Kind.RNDINT, Kind.ZERO, Kind.BOUNDED):
        return [(t, ())]
    if kind == Kind.INVPAIR:
        return [(t, ())] * 2
    if kind == Kind.MTRIPLE:
        r, s, u = params
        return [(t, (r, s)), (t, (s, u)), (t, (r, u))]
    if kind == Kind.PREMUL:
        (ell,) = params
        return [(t, (ell,))] * 2
    if kind == Kind.DUAL:
        big, _nbits = params
        return [(t, ()), (big, ())]
    raise ValueError(f"unsupported material kind {kind}")


def shares_to_records(parts: list[Share], count: int) -> list[list[int]]:
    """Flatten one party's component shares into per-item integer records."""
    recs: list[list[int]] = [[] for _ in range(count)]
    for sh in parts:
        vals = sh.values.reshape(count, -1)
        macs = None if sh.macs is None else sh.macs.reshape(count, -1)
        for i in range(count):
            recs[i].extend(int(v) for v in vals[i])
            if macs is not None:
                recs[i].extend(int(v) for v in macs[i])
    return recs


def records_to_shares(recs: list[list[int]], kind: Kind, t: int, params: tuple,
                      mac_modulus: int | None) -> list[Share]:
    count = len(recs)
    arr = as_obj(recs) if count else np.empty((0, 0), dtype=object)
    out, pos = [], 0
    for mod, shape in components(kind, t, params):
        size = math.prod(shape)
        vals = arr[:, pos:pos + size].reshape((count,) + shape)
        pos += size
        macs = None
        if tagged(kind, mod, mac_modulus):
            macs = arr[:, pos:pos + size].reshape((count,) + shape)
            pos += size
        out.append(Share(mod, vals, macs))
    return out


# ---- trusted dealer ------------------------------------------------------------

def split(rng: random.Random, secret: np.ndarray, t: int, n: int) -> list[np.ndarray]:
    """Additive n-way split of an object array modulo t."""
    flat = secret.ravel()
    r = rng.randrange
    parts = [as_obj([r(t) for _ in range(flat.size)]) for _ in range(n - 1)]
    last = flat.copy()
    for p in parts:
        last = last - p
    parts.append(last % t)
    return [p.reshape(secret.shape) for p in parts]


def _units(rng: random.Random, t: int, count: int) -> list[int]:
    out = []
    while len(out) < count:
        v = rng.randrange(1, t)
        if nt.gcd(v, t) == 1:
            out.append(v)
    return out


def plaintext_material(rng: random.Random, kind: Kind, t: int, params: tuple,
                       count: int) -> list[np.ndarray]:
    """Secret values of ``count`` material items, one array per component."""
    r = rng.randrange
    if kind == Kind.TRIPLE:
        a = as_obj([r(t) for _ in range(count)])
        b = as_obj([r(t) for _ in range(count)])
        return [a, b, a * b % t]
    if kind == Kind.BIT:
        return [as_obj([rng.getrandbits(1) for _ in range(count)])]
    if kind == Kind.RNDINT:
        return [as_obj([r(t) for _ in range(count)])]
    if kind == Kind.ZERO:
        return [as_obj([0] * count)]
    if kind == Kind.BOUNDED:
        (nbits,) = params
        return [as_obj([rng.getrandbits(nbits) if nbits else 0 for _ in range(count)])]
    if kind == Kind.INVPAIR:
        u = _units(rng, t, count)
        return [as_obj(u), as_obj([nt.invmod(v, t) for v in u])]
    if kind == Kind.MTRIPLE:
        rr, s, uu = params
        A = as_obj([r(t) for _ in range(count * rr * s)]).reshape(count, rr, s)
        B = as_obj([r(t) for _ in range(count * s * uu)]).reshape(count, s, uu)
        C = as_obj(np.stack([np.dot(A[i], B[i]) % t for i in range(count)])) if count else \
            np.empty((0, rr, uu), dtype=object)
        return [A, B, C.reshape(count, rr, uu)]
    if kind == Kind.PREMUL:
        (ell,) = params
        u = as_obj(_units(rng, t, count * ell)).reshape(count, ell)
        z = as_obj([nt.invmod(int(v), t) for v in u.ravel()]).reshape(count, ell)
        w = u.copy()
        if ell > 1:
            w[:, 1:] = u[:, 1:] * z[:, :-1] % t
        return [w, z]
    if kind == Kind.DUAL:
        big, nbits = params
        v = as_obj([rng.getrandbits(nbits) for _ in range(count)])
        return [v % t, v % big]
    raise ValueError(f"dealer cannot produce {kind}")


class Dealer:
    """Seeded trusted dealer for in-process sessions and store files."""

    def __init__(self, n: int, seed=0, mac_modulus: int | None = None):
        self.n, self.seed, self.mac_modulus = n, seed, mac_modulus
        rng = random.Random(derive_seed(seed, "dealer-mac-key"))
        self.alpha = rng.randrange(mac_modulus) if mac_modulus else None
        self.alpha_shares = None
        if mac_modulus:
            self.alpha_shares = [int(v) for v in split(rng, as_obj([self.alpha]), mac_modulus, n)
                                 for v in v.ravel()]
        self._lock = threading.Lock()
        self._cache: dict = {}
        self._requests: dict = defaultdict(int)

    def generate(self, kind: Kind, t: int, params: tuple, count: int, rng: random.Random
                 ) -> list[list[Share]]:
        """All parties' shares of ``count`` fresh items."""
        secrets = plaintext_material(rng, kind, t, params, count)
        per_party: list[list[Share]] = [[] for _ in range(self.n)]
        for (mod, _shape), sec in zip(components(kind, t, params), secrets):
            vals = split(rng, sec, mod, self.n)
            macs = [None] * self.n
            if tagged(kind, mod, self.mac_modulus):
                macs = split(rng, sec * self.alpha % mod, mod, self.n)
            for i in range(self.n):
                per_party[i].append(Share(mod, vals[i], macs[i]))
        return per_party

    def fetch(self, pid: int, kind: Kind, t: int, params: tuple, count: int) -> list[Share]:
        key = (Kind(kind), t, tuple(params), count)
        with self._lock:
            j = self._requests[(pid, key)]
            self._requests[(pid, key)] = j + 1
            entry = self._cache.get((key, j))
            if entry is None:
                rng = random.Random(derive_seed(self.seed, "dealer", int(kind), t, params, count, j))
                entry = [self.generate(Kind(kind), t, tuple(params), count, rng), self.n]
                self._cache[(key, j)] = entry
            entry[1] -= 1
            if entry[1] == 0:
                del self._cache[(key, j)]
            return entry[0][pid]

    def source(self, pid: int) -> "DealerSource":
        return DealerSource(self, pid)

    def fill_stores(self, stores: list[PreprocessingStore], demand: dict) -> None:
        """Append ``demand`` {(kind, modulus, params): count} to every store."""
        if self.mac_modulus:
            for i, st in enumerate(stores):
                st.append(Kind.MACKEY, self.mac_modulus, [self.alpha_shares[i]])
        for j, ((kind, t, params), count) in enumerate(sorted(demand.items(), key=repr)):
            rng = random.Random(derive_seed(self.seed, "store", j))
            per_party = self.generate(Kind(kind), t, tuple(params), count, rng)
            k = len(params)
            for st, parts in zip(stores, per_party):
                for rec in shares_to_records(parts, count):
                    st.append(kind, t, list(params)[:k] + rec if k else rec)


class MaterialSource:
    def take(self, party, kind: Kind, t: int, params: tuple, count: int) -> list[Share]:
        raise NotImplementedError


class DealerSource(MaterialSource):
    def __init__(self, dealer: Dealer, pid: int):
        self.dealer, self.pid = dealer, pid

    def take(self, party, kind, t, params, count):
        return self.dealer.fetch(self.pid, kind, t, params, count)


class StoreSource(MaterialSource):
    def __init__(self, store: PreprocessingStore):
        self.store = store

    def take(self, party, kind, t, params, count):
        recs = self.store.pop(kind, t, params, count)
        mac_mod = self.store.mac_key[0] if self.store.mac_key else None
        return records_to_shares(recs, Kind(kind), t, tuple(params), mac_mod)


# ---- typed helpers used by protocols ------------------------------------------

def _shape(shape) -> tuple[int, ...]:
    return (shape,) if isinstance(shape, int) else tuple(shape)


def take(party, kind: Kind, t: int, params: tuple, shape) -> list[Share]:
    shape = _shape(shape)
    count = math.prod(shape)
    if party.material is None:
        raise MaterialDepleted()
    parts = party.material.take(party, kind, t, tuple(params), count)
    out = []
    for (mod, comp_shape), sh in zip(components(kind, t, tuple(params)), parts):
        out.append(sh.reshape(shape + comp_shape))
    return party.tamper(f"material:{Kind(kind).name.lower()}", out)


def triples(party, t: int, shape) -> BeaverTriple:
    a, b, c = take(party, Kind.TRIPLE, t, (), shape)
    return BeaverTriple(a, b, c)


def matrix_triple(party, t: int, dims: tuple[int, int, int]) -> MatrixTriple:
    A, B, C = take(party, Kind.MTRIPLE, t, tuple(dims), 1)
    return MatrixTriple(A[0], B[0], C[0])


def bits(party, t: int, shape) -> Share:
    return take(party, Kind.BIT, t, (), shape)[0]


def randoms(party, t: int, shape) -> Share:
    return take(party, Kind.RNDINT, t, (), shape)[0]


def input_mask(party, t: int, shape) -> InputMask:
    return InputMask(randoms(party, t, shape))


def bounded(party, t: int, nbits: int, shape) -> Share:
    return take(party, Kind.BOUNDED, t, (nbits,), shape)[0]


def inverse_pairs(party, t: int, shape) -> tuple[Share, Share]:
    r, rinv = take(party, Kind.INVPAIR, t, (), shape)
    return r, rinv


def premul_masks(party, t: int, ell: int, shape) -> tuple[Share, Share]:
    w, z = take(party, Kind.PREMUL, t, (ell,), shape)
    return w, z


def dual_masks(party, small: int, big: int, nbits: int, shape) -> tuple[Share, Share]:
    r_small, r_big = take(party, Kind.DUAL, small, (big, nbits), shape)
    return r_small, r_big


def zeros(party, t: int, shape) -> Share:
    return take(party, Kind.ZERO, t, (), shape)[0]
