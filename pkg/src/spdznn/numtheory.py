"""Modular arithmetic helpers shared by every protocol layer.

All residues are plain Python ints; gmpy2 backs primality testing and
modular exponentiation where operands get large.
"""

from __future__ import annotations

import gmpy2


def is_prime(n: int) -> bool:
    """Probabilistic primality test (deterministic for n < 2**64)."""
    if n < 2:
        return False
    return bool(gmpy2.is_prime(n, 50))


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than n."""
    return int(gmpy2.next_prime(n))


def prev_prime(n: int, floor: int = 2) -> int | None:
    """Largest prime strictly below n and at least ``floor``, else None."""
    c = n - 1
    if c > 2 and c % 2 == 0:
        c -= 1
    while c >= floor:
        if is_prime(c):
            return c
        c -= 1 if c <= 2 else 2
    return None


def powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def invmod(a: int, mod: int) -> int:
    """Inverse of a modulo mod; raises ValueError if it does not exist."""
    try:
        return int(gmpy2.invert(a % mod, mod))
    except ZeroDivisionError as exc:
        raise ValueError(f"{a} is not invertible modulo {mod}") from exc


def gcd(a: int, b: int) -> int:
    return int(gmpy2.gcd(a, b))


def centered(v: int, mod: int) -> int:
    """Signed representative of v in (-mod/2, mod/2]."""
    v %= mod
    return v - mod if v > mod // 2 else v


def bit_length(n: int) -> int:
    return int(n).bit_length()


def ceil_log2(n: int) -> int:
    """Smallest l with 2**l >= n (0 for n <= 1)."""
    return max(int(n) - 1, 0).bit_length()


def crt_exponent(n: int, lam: int) -> int:
    """The d with d = 1 mod n and d = 0 mod lam (requires gcd(n, lam) = 1)."""
    return lam * invmod(lam, n) % (n * lam)
