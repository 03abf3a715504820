"""Opening, MAC checking, input sharing and Beaver multiplication.

Every function takes the calling party's ``Party`` engine first and is run
by all parties in lockstep. Openings of authenticated values are queued on
the party and verified in one batch by ``mac_check``.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from . import material, paillier
from .errors import CommitmentMismatch, MacCheckFailure
from .runtime.wire import MsgKind
from .shares import Share, as_obj

NONCE_BYTES = 32


def alpha_for(party, t: int) -> int | None:
    return party.alpha if party.authenticated(t) else None


def add_const(party, x: Share, c) -> Share:
    """[x] + c for a public constant (scalar or array)."""
    return x.add_public(c, party.pid, alpha_for(party, x.modulus))


def public_share(party, t: int, c) -> Share:
    """A sharing of a public constant: party 0 holds it, tags alpha_i * c."""
    c = as_obj(c) % t
    vals = c if party.pid == 0 else c * 0
    macs = None
    if party.authenticated(t):
        macs = c * party.alpha % t
    return Share(t, as_obj(vals), macs)


# ---- opening ---------------------------------------------------------------

def open_many(party, xs: Sequence[Share]) -> list[np.ndarray]:
    """Open several shared tensors (any moduli) in one broadcast round."""
    flat = []
    for x in xs:
        flat.extend(int(v) for v in x.values.ravel())
    flat = party.tamper("open", flat)
    rows = party.broadcast(flat, MsgKind.OPEN)
    out, pos = [], 0
    for x in xs:
        size = x.size
        total = [sum(row[pos + i] for row in rows) % x.modulus for i in range(size)]
        opened = as_obj(total).reshape(x.shape)
        if x.macs is not None:
            party.pending.append((x.modulus, opened.ravel().copy(), x.macs.ravel().copy()))
        out.append(opened)
        pos += size
    return out


def open_shares(party, x: Share) -> np.ndarray:
    return open_many(party, [x])[0]


def open_to(party, owner: int, x: Share) -> np.ndarray | None:
    """Reveal [x] to ``owner`` only; other parties get None."""
    rows = party.send_to(owner, x.values.ravel())
    if rows is None:
        return None
    total = [sum(row[i] for row in rows) % x.modulus for i in range(x.size)]
    return as_obj(total).reshape(x.shape)


# ---- commitments and coins -------------------------------------------------

def commit(value: bytes, nonce: bytes) -> bytes:
    return hashlib.sha256(value + nonce).digest()


def _commit_reveal(party, payload: bytes) -> list[bytes]:
    """Commit to ``payload`` then reveal it; returns every party's payload."""
    nonce = party.random_bytes(NONCE_BYTES)
    width = len(payload)
    digest = commit(payload, nonce)
    commitments = party.broadcast([int.from_bytes(digest, "big")], MsgKind.COMMIT)
    opened = party.broadcast([width, int.from_bytes(payload, "big"),
                              int.from_bytes(nonce, "big")], MsgKind.REVEAL)
    out = []
    for j, (w, v, r) in enumerate(opened):
        val = v.to_bytes(w, "big")
        check = commit(val, r.to_bytes(NONCE_BYTES, "big"))
        if int.from_bytes(check, "big") != commitments[j][0]:
            raise CommitmentMismatch(f"party {j} opened a value that does not match its commitment",
                                     frame=party.frame_label)
        out.append(val)
    return out


def joint_coin(party, nbytes: int = 32) -> bytes:
    """Unbiased public random bytes by commit-reveal XOR (two rounds)."""
    with party.scope("coin"):
        mine = party.random_bytes(nbytes)
        mine = party.tamper("coin", mine)
        acc = bytearray(nbytes)
        for val in _commit_reveal(party, mine):
            for i, b in enumerate(val[:nbytes]):
                acc[i] ^= b
    return bytes(acc)


def expand_coin(seed: bytes, count: int, t: int) -> list[int]:
    """Derive ``count`` residues mod t from a public seed."""
    width = (t.bit_length() + 64 + 7) // 8
    stream = hashlib.shake_256(seed).digest(width * count)
    return [int.from_bytes(stream[i * width:(i + 1) * width], "big") % t for i in range(count)]


# ---- MAC check ---------------------------------------------------------------

def mac_check(party) -> bool:
    """Batch-verify every queued opening of an authenticated value.

    Raises MacCheckFailure when the random linear combination of the tag
    differences does not vanish. Returns True (and clears the queue) on
    success; an empty queue is trivially accepted.
    """
    if not party.pending:
        return True
    with party.scope("mac_check"):
        t = party.mac_modulus
        values = np.concatenate([p[1] for p in party.pending if p[0] == t])
        macs = np.concatenate([p[2] for p in party.pending if p[0] == t])
        party.pending.clear()
        rho = as_obj(expand_coin(joint_coin(party), len(values), t))
        macs = as_obj(party.tamper("mac_shares", macs))
        sigma = int(np.dot(rho, (macs - party.alpha * values) % t)) % t
        width = (t.bit_length() + 7) // 8
        sigmas = _commit_reveal(party, sigma.to_bytes(width, "big"))
        total = sum(int.from_bytes(s, "big") for s in sigmas) % t
    if total != 0:
        raise MacCheckFailure(frame=party.frame_label)
    return True


# ---- input sharing -------------------------------------------------------------

def share_input(party, owner: int, x, t: int, shape) -> Share:
    """Secret-share the owner's private tensor ``x`` using a fresh mask.

    The mask holders reveal their shares of [r] to the owner. Over plain
    moduli the owner then sets x + r - r_owner and the others -r_j. Over the
    MAC field the owner broadcasts x - r instead so that tags follow
    linearly.
    """
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    mask = material.input_mask(party, t, shape)
    mask.consume()
    r = mask.r
    with party.scope("share_input"):
        r_plain = open_to(party, owner, r)
        if party.authenticated(t):
            eps = None
            if party.pid == owner:
                eps = [int(v) for v in ((as_obj(x).reshape(shape) - r_plain) % t).ravel()]
            eps = as_obj(party.from_owner(owner, eps)).reshape(shape)
            return add_const(party, r, eps)
    if party.pid == owner:
        vals = (as_obj(x).reshape(shape) + r_plain - r.values) % t
    else:
        vals = (-r.values) % t
    return Share(t, vals)


def reshare_from_ciphertext(party, pk: paillier.PaillierPublicKey,
                            key_share: paillier.PaillierDecShare,
                            cts: Sequence[paillier.Ciphertext], own_mask=None) -> Share:
    """Turn ciphertexts of x into additive shares of x mod N.

    Every party publishes E(r_j), all decrypt E(x + sum r_j) jointly; party
    0 keeps (x + r) - r_0 and the others keep -r_j. ``own_mask`` fixes this
    party's r_j (used by hand-traced examples).
    """
    N = pk.N
    count = len(cts)
    if own_mask is None:
        mask = party.rand_below(N, count)
    else:
        mask = [int(v) % N for v in np.ravel(own_mask)]
    with party.scope("reshare"):
        mine = [paillier.encrypt_random(pk, m, party.rng).c for m in mask]
        rows = party.broadcast(mine, MsgKind.CIPHERTEXT)
        summed = []
        for i, ct in enumerate(cts):
            parts = [paillier.Ciphertext(rows[j][i], N) for j in range(party.n)]
            summed.append(paillier.padd(pk, parts + [ct]))
        plain = paillier.joint_decrypt(party, summed, pk, key_share)
    if party.pid == 0:
        vals = [(p - m) % N for p, m in zip(plain, mask)]
    else:
        vals = [(-m) % N for m in mask]
    return Share(N, as_obj(vals))


# ---- multiplication -------------------------------------------------------------

def mul_beaver(party, x: Share, y: Share, triple: material.BeaverTriple) -> Share:
    """Element-wise [x*y] from one Beaver triple per element (one round)."""
    triple.consume()
    a, b, c = triple.a, triple.b, triple.c
    if not (x.modulus == y.modulus == a.modulus):
        raise ValueError("operands and triple must share a modulus")
    with party.scope("mul"):
        x_minus_a, y_minus_b = open_many(party, [x - a, y - b])
    z = c + b * x_minus_a + a * y_minus_b
    return add_const(party, z, x_minus_a * y_minus_b)


def multiply(party, x: Share, y: Share) -> Share:
    """mul_beaver with a triple drawn from the party's material source."""
    if x.shape != y.shape:
        x, y = _bcast(x, y.shape), _bcast(y, x.shape)
    return mul_beaver(party, x, y, material.triples(party, x.modulus, x.shape))


def _bcast(s: Share, shape) -> Share:
    shape = np.broadcast_shapes(s.shape, shape)
    v = np.broadcast_to(s.values, shape).copy()
    m = None if s.macs is None else np.broadcast_to(s.macs, shape).copy()
    return Share(s.modulus, v, m)


def matmul_beaver(party, x: Share, y: Share, triple: material.MatrixTriple) -> Share:
    """[X @ Y] from a matrix triple of matching dimensions (one round)."""
    triple.consume()
    A, B, C = triple.A, triple.B, triple.C
    if (x.shape, y.shape) != (A.shape, B.shape):
        raise ValueError(f"matrix triple dims {triple.dims} do not fit {x.shape} @ {y.shape}")
    with party.scope("matmul"):
        E, F = open_many(party, [x - A, y - B])
    t = x.modulus
    Z = C + B.matmul_public_left(E) + A.matmul_public_right(F)
    return add_const(party, Z, np.dot(E, F) % t)


def matmul(party, x: Share, y: Share) -> Share:
    r, s = x.shape
    u = y.shape[1]
    return matmul_beaver(party, x, y, material.matrix_triple(party, x.modulus, (r, s, u)))


def linear_combine(party, terms: Sequence[tuple[int, Share]], constant=0) -> Share:
    """sum(coef * [x]) + constant, computed locally."""
    if not terms:
        raise ValueError("need at least one term")
    mods = {s.modulus for _, s in terms}
    if len(mods) != 1:
        raise ValueError(f"modulus mismatch: {sorted(mods)}")
    acc = None
    for coef, sh in terms:
        term = sh * coef
        acc = term if acc is None else acc + term
    return add_const(party, acc, constant)
