"""Secure comparison over a ring Z_N or a prime field.

Generation protocols (``rnd_bit``, ``rnd_inv``, ``prnd_int``) run
interactively; the online protocols (``premulc``, ``inner``,
``bit_lt_c``, ``mod2m``, ``gez``) draw their masks from the party's
material source so that only input-dependent openings happen online.

Statistical masks are sized by ``mask_bits``: kappa extra bits when the
modulus has room, fewer when a wider mask would let the masked value wrap.
"""

from __future__ import annotations

import numpy as np

from . import material
from . import numtheory as nt
from .errors import ProtocolAbort, RandomBitAbort
from .sharing import add_const, mul_beaver, open_many, public_share, share_input
from .shares import Share, as_obj


# ---- helpers ----------------------------------------------------------------

def mask_bits(t: int, value_bits: int, kappa: int) -> int:
    """Largest s <= kappa with (2^v - 1) + (2^(v+s) - 1) < t."""
    for s in range(kappa, -1, -1):
        if (2**value_bits - 1) + (2**(value_bits + s) - 1) < t:
            return s
    raise ValueError(f"modulus {t} has no headroom for {value_bits}-bit values")


def lsb_mask_bits(t: int, ell: int, kappa: int) -> int:
    """Bit length of r in LSB: r < 2^b with 2^(l-1) + (2^l - 1) + 2(2^b - 1) + 1 < t."""
    for b in range(ell + kappa - 1, -1, -1):
        if 2**(ell - 1) + (2**ell - 1) + 2 * (2**b - 1) + 1 < t:
            return b
    raise ValueError(f"modulus {t} has no headroom for a {ell}-bit LSB")


def to_bits(values, ell: int) -> np.ndarray:
    """Public integers to an (..., ell) array of bits, least significant first."""
    v = as_obj(values)
    out = np.empty(v.shape + (ell,), dtype=object)
    for i in range(ell):
        out[..., i] = (v >> i) & 1
    return out


def compose_bits(bits: Share) -> Share:
    """sum_i 2^i [b_i] along the last axis."""
    ell = bits.shape[-1]
    return bits.matmul_public_right(as_obj([2**i for i in range(ell)]))


def _mul(party, x: Share, y: Share) -> Share:
    return mul_beaver(party, x, y, material.triples(party, x.modulus, x.shape))


def _flat(x: Share) -> tuple[Share, tuple]:
    return x.reshape(-1), x.shape


# ---- random bits, inverses, integers -----------------------------------------

def _deal_bits(party, t: int, count: int) -> Share:
    """Every party shares ``count`` private random bits; result shape (n, count)."""
    mine = [party.rng.getrandbits(1) for _ in range(count)]
    mine = list(party.tamper("deal_bits", mine))
    if party.authenticated(t):
        rows = [share_input(party, j, mine if j == party.pid else None, t, count)
                for j in range(party.n)]
        return Share.stack(rows)
    per_party = {}
    splits = []
    for v in mine:
        parts = party.rand_below(t, party.n - 1)
        splits.append(parts + [(int(v) - sum(parts)) % t])
    per_party = {j: [s[j] for s in splits] for j in range(party.n)}
    got = party.deal(per_party, range(party.n))
    return Share(t, as_obj([got[d] for d in range(party.n)]))


def _xor_tree(party, leaves: Share) -> Share:
    """XOR-reduce axis 0 with x + y - 2xy, one multiplication round per level."""
    t = leaves.modulus
    width = 1
    while width < leaves.shape[0]:
        width *= 2
    if width > leaves.shape[0]:
        pad = public_share(party, t, np.zeros((width - leaves.shape[0],) + leaves.shape[1:],
                                              dtype=object))
        leaves = Share.concat([leaves, pad])
    while leaves.shape[0] > 1:
        left, right = leaves[0::2], leaves[1::2]
        prod = _mul(party, left, right)
        leaves = left + right - prod * 2
    return leaves[0]


def rnd_bit(party, t: int, count: int = 1, retries: int = 1) -> Share:
    """``count`` shared uniform bits over Z_t.

    Each party deals a private bit, the sharings are XORed, and
    a(1 - a) is opened to catch non-bits. Failing slots are regenerated up
    to ``retries`` times before the protocol aborts.
    """
    with party.scope("rnd_bit"):
        out = np.empty(count, dtype=object)
        macs = np.empty(count, dtype=object) if party.authenticated(t) else None
        todo = list(range(count))
        attempt = 0
        while True:
            a = _xor_tree(party, _deal_bits(party, t, len(todo)))
            check = _mul(party, a, add_const(party, -a, 1))
            (opened,) = open_many(party, [check])
            bad = []
            for j, slot in enumerate(todo):
                if int(opened[j]) != 0:
                    bad.append(slot)
                    continue
                out[slot] = a.values[j]
                if macs is not None:
                    macs[slot] = a.macs[j]
            if not bad:
                return Share(t, out, macs)
            if attempt >= retries:
                raise RandomBitAbort(f"random bit check failed in {len(bad)} of {count} slots",
                                     frame=party.frame_label, detail=bad)
            attempt += 1
            todo = bad


def prnd_int(party, k: int, t: int, count: int = 1, retries: int = 1) -> tuple[Share, Share]:
    """Shared k-bit integers with their bits: (composed (count,), bits (count, k))."""
    if k >= t.bit_length():
        raise ValueError("bit length must be below log2 of the modulus")
    bits = rnd_bit(party, t, count * k, retries).reshape(count, k)
    return compose_bits(bits), bits


def rnd_inv(party, t: int, count: int = 1, xy: tuple[Share, Share] | None = None,
            max_attempts: int = 64) -> tuple[Share, Share]:
    """Shared random units with their inverses, retrying non-invertible draws.

    ``xy`` supplies the first candidate pair (for traced examples).
    """
    from .triples import rnd_int

    with party.scope("rnd_inv"):
        r_out = np.empty(count, dtype=object)
        inv_out = np.empty(count, dtype=object)
        todo = list(range(count))
        for attempt in range(max_attempts):
            if attempt == 0 and xy is not None:
                x, y = xy
            else:
                both = rnd_int(party, t, 2 * len(todo))
                x, y = both[:len(todo)], both[len(todo):]
            (u,) = open_many(party, [_mul(party, x, y)])
            left = []
            for j, slot in enumerate(todo):
                uj = int(u[j])
                if uj == 0 or nt.gcd(uj, t) != 1:
                    left.append(slot)
                    continue
                r_out[slot] = x.values[j]
                inv_out[slot] = y.values[j] * nt.invmod(uj, t) % t
            todo = left
            if not todo:
                return Share(t, r_out), Share(t, inv_out)
    raise ProtocolAbort("random inverse generation did not terminate", frame=party.frame_label)


# ---- prefix products and inner products ----------------------------------------

def premulc(party, a: Share) -> Share:
    """Prefix products along the last axis of invertible shared values.

    Uses preprocessed masks w_1 = r_1, w_i = r_i r_(i-1)^-1 and z_i = r_i^-1:
    the parties open m_i = w_i a_i, then b_i = z_i * prod_(j<=i) m_j.
    """
    t = a.modulus
    ell = a.shape[-1]
    if ell == 0:
        return a
    batch = a.shape[:-1]
    with party.scope("premulc"):
        w, z = material.premul_masks(party, t, ell, batch)
        (m,) = open_many(party, [_mul(party, w, a)])
    if any(int(v) == 0 or nt.gcd(int(v), t) != 1 for v in m.ravel()):
        raise ProtocolAbort("prefix product input is not invertible", frame=party.frame_label)
    prefix = m.copy()
    for i in range(1, ell):
        prefix[..., i] = prefix[..., i - 1] * m[..., i] % t
    return z * prefix


def inner(party, x: Share, y: Share) -> Share:
    """sum_i x_i y_i along the last axis (one multiplication round)."""
    with party.scope("inner"):
        return _mul(party, x, y).sum(axis=-1)


# ---- BitLTC -----------------------------------------------------------------------

def bit_lt_map(party, a_bits, b_bits: Share) -> Share:
    """[y] whose least significant bit is (a < b); bits LSB first."""
    a_bits = as_obj(a_bits)
    ell = b_bits.shape[-1]
    # y_i = b_i (1 - a_i), d_i = a_i xor b_i; both linear since a is public
    y_bits = b_bits * (1 - a_bits)
    top = y_bits[..., ell - 1]
    if ell == 1:
        return top
    d = add_const(party, b_bits * (1 - 2 * a_bits), a_bits)
    # prefix products of (d_(l-1)+1, ..., d_1+1) give x_(l-2), ..., x_0
    desc = add_const(party, d[..., :0:-1], 1)
    pre = premulc(party, desc)
    x = pre[..., ::-1]
    return top + inner(party, x, y_bits[..., :ell - 1])


def lsb(party, y: Share, ell: int) -> Share:
    """Least significant bit of a shared value below 2^ell."""
    t = y.modulus
    nbits = lsb_mask_bits(t, ell, party.kappa)
    with party.scope("lsb"):
        u = material.bits(party, t, y.shape)
        r = material.bounded(party, t, nbits, y.shape)
        masked = add_const(party, y + r * 2 + u, 2**(ell - 1))
        (c,) = open_many(party, [masked])
    # the offset is odd when ell = 1; strip its parity
    c0 = (c - 2**(ell - 1)) % 2
    return add_const(party, u * (1 - 2 * c0), c0)


def bit_lt_c(party, a, b_bits: Share) -> Share:
    """[a < b] for public a and bit-shared b (bits LSB first)."""
    ell = b_bits.shape[-1]
    with party.scope("bit_lt_c"):
        y = bit_lt_map(party, to_bits(a, ell), b_bits)
        return lsb(party, y, ell)


# ---- modular reduction, comparison, truncation -----------------------------------

def mod2m(party, x: Share, k: int, m: int) -> Share:
    """[x mod 2^m] for x a signed k-bit value, 0 <= m < k."""
    t = x.modulus
    if m == 0:
        return x * 0
    s = mask_bits(t, k, party.kappa)
    with party.scope("mod2m"):
        bits = material.bits(party, t, x.shape + (m,))
        r_low = compose_bits(bits)
        r_high = material.bounded(party, t, k + s - m, x.shape)
        masked = add_const(party, x + r_high * 2**m + r_low, 2**(k - 1))
        (c,) = open_many(party, [masked])
        c_low = c % 2**m
        u = bit_lt_c(party, c_low, bits)
    return add_const(party, u * 2**m - r_low, c_low)


def gez(party, x: Share, k: int) -> Share:
    """[x >= 0] for x a signed k-bit value (centred lift)."""
    t = x.modulus
    if k < 1:
        raise ValueError("bit length must be positive")
    with party.scope("gez"):
        low = mod2m(party, x, k, k - 1)
        inv = nt.invmod(2**(k - 1), t)
        return add_const(party, (x - low) * inv, 1)


def trunc(party, x: Share, k: int, m: int) -> Share:
    """Exact signed floor division of a k-bit value by 2^m."""
    if m == 0:
        return x
    t = x.modulus
    with party.scope("trunc"):
        low = mod2m(party, x, k, m)
        return (x - low) * nt.invmod(2**m, t)


def ltz(party, x: Share, k: int) -> Share:
    return add_const(party, -gez(party, x, k), 1)
