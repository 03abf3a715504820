"""Threshold Paillier with a trusted-dealer key ceremony.

The generator is fixed to g = N + 1 so that (N+1)^m = 1 + mN mod N^2.
The dealer splits the exponent d (d = 1 mod N, d = 0 mod lambda) into
additive shares modulo N*lambda; raising a ciphertext to every share and
multiplying the results yields (N+1)^m, from which m = (v - 1) / N.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import numtheory as nt
from .codec import decode_counted, encode_counted
from .errors import DecryptionAbort, FormatError

MAX_PRIME_ATTEMPTS = 64


@dataclass(frozen=True)
class PaillierPublicKey:
    N: int

    def __post_init__(self):
        if self.N < 2 or self.N % 2 == 0:
            raise ValueError("Paillier modulus must be odd and at least 3")

    @property
    def Nsq(self) -> int:
        return self.N * self.N

    @property
    def g(self) -> int:
        return self.N + 1


@dataclass(frozen=True)
class PaillierDecShare:
    party_index: int  # 1-based
    d_i: int


@dataclass(frozen=True)
class Ciphertext:
    c: int
    key_id: int  # the public modulus N identifies the key


def _seeded_rng(seed: bytes, label: str) -> random.Random:
    digest = hashlib.sha256(label.encode() + b"\x00" + bytes(seed)).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _walk_down_to_prime(start: int, bits: int, avoid: int | None = None) -> int:
    """First prime at or below ``start`` that stays within ``bits`` bits."""
    lo, top = 1 << (bits - 1), (1 << bits) - 1
    c = start | 1
    for _ in range(2):
        while c >= lo:
            if c != avoid and nt.is_prime(c):
                return c
            c -= 2
        c = top  # wrap once to the top of the range
    raise RuntimeError(f"no {bits}-bit prime found")


def dealer_primes(modulus_bits: int, rng_seed: bytes) -> tuple[int, int]:
    """Deterministic prime walk: two seeded odd starts, each walked down to a prime."""
    half = modulus_bits // 2
    rng = _seeded_rng(rng_seed, "paillier-primes")
    for _ in range(MAX_PRIME_ATTEMPTS):
        p = _walk_down_to_prime(rng.getrandbits(half) | (1 << (half - 1)), half)
        q = _walk_down_to_prime(rng.getrandbits(half) | (1 << (half - 1)), half, avoid=p)
        n, lam = p * q, (p - 1) * (q - 1)
        if nt.gcd(n, lam) == 1:
            return p, q
    raise RuntimeError("prime generation failed after bounded retries")


def keygen_dealer(modulus_bits: int, n_parties: int, rng_seed: bytes
                  ) -> tuple[PaillierPublicKey, list[PaillierDecShare]]:
    if modulus_bits < 16:
        raise ValueError("modulus_bits must be at least 16")
    if n_parties < 2:
        raise ValueError("need at least two parties")
    p, q = dealer_primes(modulus_bits, rng_seed)
    n, lam = p * q, (p - 1) * (q - 1)
    d = nt.crt_exponent(n, lam)
    mod = n * lam
    rng = _seeded_rng(rng_seed, "paillier-shares")
    parts = [rng.randrange(mod) for _ in range(n_parties - 1)]
    parts.append((d - sum(parts)) % mod)
    shares = [PaillierDecShare(i + 1, s) for i, s in enumerate(parts)]
    return PaillierPublicKey(n), shares


def encrypt(pk: PaillierPublicKey, m: int, r: int) -> Ciphertext:
    if not 0 <= m < pk.N:
        raise ValueError("plaintext out of range")
    if r % pk.N == 0 or nt.gcd(r, pk.N) != 1:
        raise ValueError("encryption randomness must be invertible modulo N")
    nsq = pk.Nsq
    c = (1 + m * pk.N) % nsq * nt.powmod(r, pk.N, nsq) % nsq
    return Ciphertext(c, pk.N)


def random_unit(pk: PaillierPublicKey, rng: random.Random) -> int:
    while True:
        r = rng.randrange(1, pk.N)
        if nt.gcd(r, pk.N) == 1:
            return r


def encrypt_random(pk: PaillierPublicKey, m: int, rng: random.Random) -> Ciphertext:
    return encrypt(pk, m % pk.N, random_unit(pk, rng))


def _check_key(pk: PaillierPublicKey, cs: Sequence[Ciphertext]) -> None:
    for c in cs:
        if c.key_id != pk.N:
            raise ValueError("ciphertext key mismatch")


def padd(pk: PaillierPublicKey, cs: Sequence[Ciphertext]) -> Ciphertext:
    """Homomorphic sum: product of ciphertexts mod N^2."""
    _check_key(pk, cs)
    acc = 1
    for c in cs:
        acc = acc * c.c % pk.Nsq
    return Ciphertext(acc, pk.N)


def pmult(pk: PaillierPublicKey, c: Ciphertext, k: int) -> Ciphertext:
    """Homomorphic scaling by a public (or locally known) constant."""
    _check_key(pk, [c])
    if not 0 <= k < pk.N:
        raise ValueError("scalar out of range")
    return Ciphertext(nt.powmod(c.c, k, pk.Nsq), pk.N)


def pinv(pk: PaillierPublicKey, c: Ciphertext) -> Ciphertext:
    _check_key(pk, [c])
    try:
        return Ciphertext(nt.invmod(c.c, pk.Nsq), pk.N)
    except ValueError as exc:
        raise ValueError("malformed ciphertext: not invertible modulo N^2") from exc


def partial_decrypt(pk: PaillierPublicKey, c: Ciphertext, share: PaillierDecShare) -> int:
    _check_key(pk, [c])
    return nt.powmod(c.c, share.d_i, pk.Nsq)


def combine_partials(pk: PaillierPublicKey, partials: Sequence[int]) -> int:
    """Multiply partial decryptions and apply L(v) = (v - 1) / N.

    Aborts when the combined value is not 1 modulo N, which is what an
    honest combination always yields.
    """
    v = 1
    for p in partials:
        v = v * p % pk.Nsq
    if v % pk.N != 1:
        raise DecryptionAbort("joint decryption produced an invalid group element")
    return (v - 1) // pk.N


def decrypt_with_shares(pk: PaillierPublicKey, c: Ciphertext,
                        shares: Sequence[PaillierDecShare]) -> int:
    """Local decryption from all shares (test and dealer use only)."""
    return combine_partials(pk, [partial_decrypt(pk, c, s) for s in shares])


def joint_decrypt(party, cts: Sequence[Ciphertext], pk: PaillierPublicKey,
                  share: PaillierDecShare) -> list[int]:
    """One broadcast round: everyone publishes c^{d_i}; all combine locally."""
    mine = [partial_decrypt(pk, c, share) for c in cts]
    mine = party.tamper("partial_decrypt", mine)
    with party.scope("joint_decrypt"):
        everyone = party.broadcast(mine)
    return [combine_partials(pk, [row[j] for row in everyone]) for j in range(len(cts))]


def write_key_file(path: str | Path, pk: PaillierPublicKey, share: PaillierDecShare) -> None:
    Path(path).write_bytes(encode_counted([pk.N, pk.g, share.party_index, share.d_i]))


def read_key_file(path: str | Path) -> tuple[PaillierPublicKey, PaillierDecShare]:
    buf = Path(path).read_bytes()
    values, end = decode_counted(buf)
    if len(values) != 4 or end != len(buf):
        raise FormatError("key file must hold exactly N, g, party_index, d_i", end)
    n, g, idx, d_i = values
    if g != n + 1:
        raise FormatError("generator must equal N + 1")
    return PaillierPublicKey(n), PaillierDecShare(idx, d_i)
