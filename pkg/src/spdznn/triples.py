"""Offline generation of Beaver triples and shared random integers.

Triples over an RSA modulus N come from threshold Paillier: every party
encrypts its shares of a and b, the parties multiply homomorphically and
reshare the encrypted product. Sacrificing one triple against another
catches incorrect material before it is used online.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import paillier
from .errors import SacrificeFailure
from .material import BeaverTriple, MatrixTriple
from .runtime.wire import MsgKind
from .sharing import expand_coin, joint_coin, open_many, reshare_from_ciphertext
from .shares import Share, as_obj


def _ct(pk, c: int) -> paillier.Ciphertext:
    return paillier.Ciphertext(int(c), pk.N)


def trigen(party, pk: paillier.PaillierPublicKey, key_share: paillier.PaillierDecShare,
           count: int = 1, own=None) -> BeaverTriple:
    """``count`` Beaver triples over Z_N in four rounds.

    ``own`` optionally fixes this party's (a_i, b_i) lists.
    """
    N = pk.N
    if own is None:
        a_i, b_i = party.rand_below(N, count), party.rand_below(N, count)
    else:
        a_i, b_i = [int(v) % N for v in own[0]], [int(v) % N for v in own[1]]
    with party.scope("trigen"):
        enc = [paillier.encrypt_random(pk, v, party.rng).c for v in a_i + b_i]
        rows = party.broadcast(enc, MsgKind.CIPHERTEXT)
        enc_a = [paillier.padd(pk, [_ct(pk, rows[j][i]) for j in range(party.n)])
                 for i in range(count)]
        # E(a * b_i), re-randomised so the published ciphertext hides b_i
        prods = [paillier.padd(pk, [paillier.pmult(pk, enc_a[i], b_i[i]),
                                    paillier.encrypt_random(pk, 0, party.rng)]).c
                 for i in range(count)]
        rows = party.broadcast(prods, MsgKind.CIPHERTEXT)
        enc_c = [paillier.padd(pk, [_ct(pk, rows[j][i]) for j in range(party.n)])
                 for i in range(count)]
        c = reshare_from_ciphertext(party, pk, key_share, enc_c)
    return BeaverTriple(Share(N, as_obj(a_i)), Share(N, as_obj(b_i)), c)


def matrix_trigen(party, pk: paillier.PaillierPublicKey, key_share: paillier.PaillierDecShare,
                  dims: tuple[int, int, int], own=None) -> MatrixTriple:
    """A matrix triple A (r x s), B (s x u), C = A @ B over Z_N."""
    N = pk.N
    r, s, u = dims
    if own is None:
        A_i = as_obj(party.rand_below(N, r * s)).reshape(r, s)
        B_i = as_obj(party.rand_below(N, s * u)).reshape(s, u)
    else:
        A_i, B_i = as_obj(own[0]) % N, as_obj(own[1]) % N
    with party.scope("matrix_trigen"):
        enc = [paillier.encrypt_random(pk, int(v), party.rng).c for v in A_i.ravel()]
        rows = party.broadcast(enc, MsgKind.CIPHERTEXT)
        enc_A = [[paillier.padd(pk, [_ct(pk, rows[j][p * s + k]) for j in range(party.n)])
                  for k in range(s)] for p in range(r)]
        mine = []
        for p in range(r):
            for q in range(u):
                terms = [paillier.pmult(pk, enc_A[p][k], int(B_i[k, q])) for k in range(s)]
                terms.append(paillier.encrypt_random(pk, 0, party.rng))
                mine.append(paillier.padd(pk, terms).c)
        rows = party.broadcast(mine, MsgKind.CIPHERTEXT)
        enc_C = [paillier.padd(pk, [_ct(pk, rows[j][i]) for j in range(party.n)])
                 for i in range(r * u)]
        C = reshare_from_ciphertext(party, pk, key_share, enc_C).reshape(r, u)
    return MatrixTriple(Share(N, A_i), Share(N, B_i), C)


def sacrifice(party, t1: BeaverTriple, t2: BeaverTriple, coin: bytes | None = None) -> BeaverTriple:
    """Check t1 against t2 element-wise; return t1, destroying t2.

    A public challenge rho is drawn per element. The parties open
    rho*a1 - a2 and b1 - b2, then open
    rho*c1 - c2 - (b1 - b2)*a2 - (rho*a1 - a2)*b1, which must be zero.
    """
    t = t1.a.modulus
    if t2.a.modulus != t or t1.a.shape != t2.a.shape:
        raise ValueError("sacrifice needs two triples of equal modulus and shape")
    t2.consume()
    with party.scope("sacrifice"):
        if coin is None:
            coin = joint_coin(party)
        rho = as_obj(expand_coin(coin, t1.a.size, t)).reshape(t1.a.shape)
        e, f = open_many(party, [t1.a * rho - t2.a, t1.b - t2.b])
        check = t1.c * rho - t2.c - t2.a * f - t1.b * e
        (zero,) = open_many(party, [check])
    bad = [i for i, v in enumerate(np.ravel(zero)) if int(v) != 0]
    if bad:
        raise SacrificeFailure(f"triple sacrifice failed at {len(bad)} position(s)",
                               frame=party.frame_label, detail=bad)
    return t1


def rnd_int(party, t: int, count: int = 1, own=None) -> Share:
    """Shared uniform residues: every party deals a sharing of its own value."""
    mine = party.rand_below(t, count) if own is None else [int(v) % t for v in np.ravel(own)]
    splits = []
    for v in mine:
        parts = party.rand_below(t, party.n - 1)
        splits.append(parts + [(v - sum(parts)) % t])
    per_party = {j: [splits[i][j] for i in range(count)] for j in range(party.n)}
    with party.scope("rnd_int"):
        got = party.deal(per_party, range(party.n))
    vals = [sum(got[d][i] for d in range(party.n)) % t for i in range(count)]
    return Share(t, as_obj(vals))


def concat_triples(ts: Sequence[BeaverTriple]) -> BeaverTriple:
    return BeaverTriple(Share.concat([x.a for x in ts]), Share.concat([x.b for x in ts]),
                        Share.concat([x.c for x in ts]))
