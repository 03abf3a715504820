"""Moving shares between moduli.

The offline phase produces material modulo an RSA modulus N; the online
phase runs modulo a prime Q. Conversion goes through a larger modulus
N' > N^2 where the sum of the shares no longer wraps, so the wrap count
delta = floor(sum x_i / N) can be computed with secure comparisons and
then corrected for locally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import material
from . import numtheory as nt
from .comparison import compose_bits, gez, rnd_bit
from .errors import ConfigError
from .material import BeaverTriple
from .sharing import add_const, mul_beaver, open_many
from .shares import Share, as_obj


@dataclass(frozen=True)
class ModulusTower:
    """Q (online field) < N (Paillier modulus) < sqrt(N') (lifting modulus)."""

    Q: int
    N: int
    N_prime: int
    n: int

    def validate(self) -> "ModulusTower":
        if not nt.is_prime(self.Q):
            raise ConfigError(f"Q={self.Q} is not prime")
        if not self.n < self.Q < self.N:
            raise ConfigError(f"need n < Q < N, got n={self.n}, Q={self.Q}, N={self.N}")
        if not self.N * self.N < self.N_prime:
            raise ConfigError(f"need N < sqrt(N'), got N={self.N}, N'={self.N_prime}")
        return self


def choose_n_prime(N: int, kappa: int = 0) -> int:
    """Smallest prime above max(N^2, (2^kappa N)^2)."""
    return nt.next_prime(max(N * N, (2**kappa * N) ** 2))


def wrap_bits(source: int, n: int) -> int:
    """Signed bit length that holds sum(x_i) - j*source for all j < n."""
    return nt.ceil_log2(n * source) + 1


def _lift(x: Share, big: int) -> Share:
    """Reinterpret each share as an integer modulo ``big``."""
    return Share(big, x.values.copy())


def lift_wrap(party, x: Share, big: int) -> Share:
    """[delta] mod ``big`` where delta = floor(sum of shares / modulus)."""
    src = x.modulus
    if big <= src * src:
        raise ValueError("the lifting modulus must exceed the square of the source modulus")
    n = party.n
    if n == 1:
        return Share(big, x.values * 0)
    k = wrap_bits(src, n)
    with party.scope("lift_wrap"):
        lifted = _lift(x, big)
        offsets = as_obj([j * src for j in range(1, n)])
        stacked = Share(big, np.repeat(lifted.values[..., None], n - 1, axis=-1))
        diffs = add_const(party, stacked, -offsets)
        return gez(party, diffs, k).sum(axis=-1)


def lift_mod(party, x: Share, big: int, delta: Share | None = None) -> Share:
    """The same secret shared modulo ``big``; x_i - delta_i * N per party."""
    if delta is None:
        delta = lift_wrap(party, x, big)
    return _lift(x, big) - delta * x.modulus


def drop_mod(party, x: Share, target: int, nbits: int | None = None) -> Share:
    """Reduce a shared value known to be below ``target`` into Z_target.

    The parties open x + r over the big modulus with a mask r of
    ceil(log2 target) + kappa bits (``nbits`` overrides) held in both moduli.
    """
    big = x.modulus
    if nbits is None:
        nbits = nt.ceil_log2(target) + party.kappa
    with party.scope("drop_mod"):
        r_small, r_big = material.dual_masks(party, target, big, nbits, x.shape)
        (y,) = open_many(party, [Share(big, x.values) + r_big])
    r_small = Share(target, r_small.values)
    return (-r_small).add_public(y % target, party.pid, None)


def wrap(party, x: Share, big: int) -> Share:
    """[delta] mod N for the shares of x over N."""
    return drop_mod(party, lift_wrap(party, x, big), x.modulus)


def sha_conv(party, x: Share, Q: int, big: int, delta: Share | None = None) -> Share:
    """[x] mod N to [x] mod Q through the lifting modulus ``big``.

    Each party sets (x_i mod Q) - delta_i * (N mod Q) with delta moved to Q
    by drop_mod.
    """
    src = x.modulus
    with party.scope("sha_conv"):
        if delta is None:
            delta = lift_wrap(party, x, big)
        delta_q = drop_mod(party, delta, Q)
    return Share(Q, x.values % Q) - delta_q * (src % Q)


def trip_conv(party, triple: BeaverTriple, Q: int, big: int, outer: int | None = None
              ) -> BeaverTriple:
    """Convert a Beaver triple over Z_N into one over Z_Q.

    With ab = c + sigma*N, the parties convert a, b, c, lift them to N',
    compute [sigma N] = [a][b] - [c] over N' with an N' triple, and bring
    sigma*N down to Q. That last step uses sha_conv through ``outer`` (a
    modulus above N'^2) when given; otherwise drop_mod straight from N'
    with a mask of ceil(log2 N^2) + kappa bits, sound because
    N' > (2^kappa N)^2 keeps sigma*N + r from wrapping.
    """
    triple.consume()
    a, b, c = triple.a, triple.b, triple.c
    N = a.modulus
    count = a.size
    shape = a.shape
    with party.scope("trip_conv"):
        joint = Share.concat([a.ravel(), b.ravel(), c.ravel()])
        delta = lift_wrap(party, joint, big)
        conv = sha_conv(party, joint, Q, big, delta=delta)
        lifted = lift_mod(party, joint, big, delta=delta)
        aL, bL, cL = lifted[:count], lifted[count:2 * count], lifted[2 * count:]
        prod = mul_beaver(party, aL, bL, material.triples(party, big, (count,)))
        sigma_n = prod - cL
        if outer is not None:
            sigma_q = sha_conv(party, sigma_n, Q, outer)
        else:
            sigma_q = drop_mod(party, sigma_n, Q, nbits=nt.ceil_log2(N * N) + party.kappa)
    aQ, bQ, cQ = conv[:count], conv[count:2 * count], conv[2 * count:]
    return BeaverTriple(aQ.reshape(shape), bQ.reshape(shape), (cQ + sigma_q).reshape(shape))


# ---- doubly shared masks ------------------------------------------------------------

def dual_mask_from_bits(party, small: int, big: int, nbits: int, count: int = 1,
                        retries: int = 1) -> tuple[Share, Share]:
    """A random nbits-bit r shared mod ``small`` and mod ``big``.

    Random bits are generated over Z_small, lifted to Z_big, and composed
    in both moduli.
    """
    bits = rnd_bit(party, small, count * nbits, retries).reshape(count, nbits)
    lifted = lift_mod(party, bits.ravel(), big).reshape(count, nbits)
    weights = as_obj([pow(2, i, small) for i in range(nbits)])
    return bits.matmul_public_right(weights), compose_bits(lifted)


def rnd_dual(party, small: int, big: int, nbits: int, count: int = 1) -> tuple[Share, Share]:
    """A random r < 2^nbits shared mod ``small`` and mod ``big``.

    Every party deals a private value of nbits - ceil(log2 n) bits in both
    moduli and r is their sum, so r never reaches 2^nbits.
    """
    own_bits = nbits - nt.ceil_log2(party.n)
    if own_bits < 1:
        raise ValueError("mask too short for this many parties")
    mine = [party.rng.getrandbits(own_bits) for _ in range(count)]
    per_party = {j: [] for j in range(party.n)}
    for v in mine:
        for t in (small, big):
            parts = party.rand_below(t, party.n - 1)
            parts.append((v - sum(parts)) % t)
            for j in range(party.n):
                per_party[j].append(parts[j])
    with party.scope("rnd_dual"):
        got = party.deal(per_party, range(party.n))
    tot_small = [sum(got[d][2 * i] for d in range(party.n)) % small for i in range(count)]
    tot_big = [sum(got[d][2 * i + 1] for d in range(party.n)) % big for i in range(count)]
    return Share(small, as_obj(tot_small)), Share(big, as_obj(tot_big))
