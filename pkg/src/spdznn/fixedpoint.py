"""Fixed-point numbers over the prime field Z_Q.

A real x is stored as round(x * 2^f) reduced into Z_Q, negative values
wrapping to the top of the field. Products carry 2f fractional bits and
are brought back with ``trunc_pr`` (one round, +1 ulp with probability
equal to the dropped fraction) or ``trunc`` (exact, via comparison).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import comparison, material
from . import numtheory as nt
from .errors import ConfigError
from .sharing import add_const, mul_beaver, open_many
from .shares import Share, as_obj


@dataclass(frozen=True)
class FxParams:
    e: int
    f: int
    Q: int
    kappa: int

    @property
    def k(self) -> int:
        return self.e + self.f

    def validate(self) -> "FxParams":
        if self.f < 1:
            raise ConfigError("need at least one fraction bit")
        if self.k + self.kappa > nt.ceil_log2(self.Q):
            raise ConfigError(f"Q has {nt.ceil_log2(self.Q)} bits, need k + kappa = "
                              f"{self.k + self.kappa}")
        if not nt.is_prime(self.Q):
            raise ConfigError("Q must be prime")
        return self


def test_profile() -> FxParams:
    """e=4, f=8, kappa=8 over a 32-bit prime."""
    return FxParams(4, 8, nt.next_prime(2**31), 8)


def production_profile() -> FxParams:
    """64-bit values with 52 fraction bits, kappa=80, Q > 2^145."""
    return FxParams(12, 52, nt.next_prime(2**145), 80)


# ---- encoding ------------------------------------------------------------------

def _round_half_away(q: Fraction) -> int:
    mag = int(abs(q) + Fraction(1, 2))
    return mag if q >= 0 else -mag


def fx_encode(x, params: FxParams):
    """Encode a real or an array of reals into Z_Q."""
    arr = np.asarray(x, dtype=float)
    bound = 2.0 ** (params.e - 1)
    if np.any(np.abs(arr) >= bound) or not np.all(np.isfinite(arr)):
        raise ValueError(f"value out of range: |x| must be below {bound}")
    scale = 2**params.f
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = _round_half_away(Fraction(float(v)) * scale) % params.Q
    if np.ndim(x) == 0:
        return int(out[()])
    return out


def fx_decode(v, params: FxParams):
    """Inverse of fx_encode (centred lift, then scale down)."""
    arr = as_obj(v)
    scale = 2.0 ** params.f
    out = np.empty(arr.shape, dtype=float)
    for idx, r in np.ndenumerate(arr):
        out[idx] = nt.centered(int(r), params.Q) / scale
    if arr.ndim == 0:
        return float(out[()])
    return out


def signed(v, Q: int):
    arr = as_obj(v)
    out = np.empty(arr.shape, dtype=object)
    for idx, r in np.ndenumerate(arr):
        out[idx] = nt.centered(int(r), Q)
    return out


# ---- truncation -------------------------------------------------------------------

def trunc_pr(party, x: Share, m: int, k: int) -> Share:
    """floor(x / 2^m) + beta, beta = 1 with probability (x mod 2^m) / 2^m.

    x must be a signed k-bit value. One opening round.
    """
    if m == 0:
        return x
    t = x.modulus
    s = comparison.mask_bits(t, k, party.kappa)
    with party.scope("trunc_pr"):
        r_low = material.bounded(party, t, m, x.shape)
        r_high = material.bounded(party, t, k + s - m, x.shape)
        masked = add_const(party, x + r_high * 2**m + r_low, 2**(k - 1))
        (c,) = open_many(party, [masked])
    c_low = c % 2**m
    return add_const(party, x + r_low, -c_low) * nt.invmod(2**m, t)


def trunc(party, x: Share, m: int, k: int) -> Share:
    """Exact signed floor(x / 2^m) for a signed k-bit value."""
    return comparison.trunc(party, x, k, m)


def fx_mul(party, x: Share, y: Share, params: FxParams) -> Share:
    """Fixed-point product: Beaver multiplication then trunc_pr by f."""
    prod = mul_beaver(party, x, y, material.triples(party, x.modulus, x.shape))
    return trunc_pr(party, prod, params.f, params.k + params.f)


def fx_gez(party, x: Share, params: FxParams) -> Share:
    return comparison.gez(party, x, params.k)
