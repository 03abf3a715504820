"""One party's view of secret-shared tensors.

A ``Share`` holds this party's additive shares of a tensor of secrets
modulo ``modulus``. When the tensor lives in the MAC field it also holds
this party's shares of the tags alpha * x (an authenticated share).
Values are numpy object arrays of Python ints so any modulus size works.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def as_obj(x) -> np.ndarray:
    """Object array of Python ints (shape preserved)."""
    a = np.asarray(x, dtype=object)
    if a.dtype != object:
        a = a.astype(object)
    return a


def obj_zeros(shape) -> np.ndarray:
    a = np.empty(shape, dtype=object)
    a.fill(0)
    return a


def mod_array(a, t: int) -> np.ndarray:
    return as_obj(a) % t


class Share:
    __slots__ = ("modulus", "values", "macs")

    def __init__(self, modulus: int, values, macs=None):
        self.modulus = int(modulus)
        self.values = as_obj(values)
        self.macs = None if macs is None else as_obj(macs)
        if self.macs is not None and self.macs.shape != self.values.shape:
            raise ValueError("MAC shares must match value shares in shape")

    # ---- shape helpers -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def authenticated(self) -> bool:
        return self.macs is not None

    def _wrap(self, values, macs) -> "Share":
        return Share(self.modulus, values, macs)

    def __getitem__(self, idx) -> "Share":
        v = self.values[idx]
        m = None if self.macs is None else self.macs[idx]
        if not isinstance(v, np.ndarray):
            v = as_obj([v]).reshape(())
            m = None if m is None else as_obj([m]).reshape(())
        return self._wrap(v, m)

    def reshape(self, *shape) -> "Share":
        m = None if self.macs is None else self.macs.reshape(*shape)
        return self._wrap(self.values.reshape(*shape), m)

    def ravel(self) -> "Share":
        return self.reshape(-1)

    @property
    def T(self) -> "Share":
        m = None if self.macs is None else self.macs.T
        return self._wrap(self.values.T, m)

    def transpose(self, *axes) -> "Share":
        m = None if self.macs is None else self.macs.transpose(*axes)
        return self._wrap(self.values.transpose(*axes), m)

    def copy(self) -> "Share":
        m = None if self.macs is None else self.macs.copy()
        return self._wrap(self.values.copy(), m)

    @staticmethod
    def concat(parts: Sequence["Share"], axis: int = 0) -> "Share":
        t = _same_modulus(parts)
        vals = np.concatenate([p.values for p in parts], axis=axis)
        if all(p.macs is not None for p in parts):
            macs = np.concatenate([p.macs for p in parts], axis=axis)
        elif any(p.macs is not None for p in parts):
            raise ValueError("cannot mix authenticated and plain shares")
        else:
            macs = None
        return Share(t, vals, macs)

    @staticmethod
    def stack(parts: Sequence["Share"], axis: int = 0) -> "Share":
        t = _same_modulus(parts)
        vals = np.stack([p.values for p in parts], axis=axis)
        macs = None
        if parts and parts[0].macs is not None:
            macs = np.stack([p.macs for p in parts], axis=axis)
        return Share(t, vals, macs)

    # ---- local linear algebra -----------------------------------------
    def _check(self, other: "Share") -> None:
        if not isinstance(other, Share):
            raise TypeError("expected a Share")
        if other.modulus != self.modulus:
            raise ValueError(f"modulus mismatch: {self.modulus} vs {other.modulus}")
        if (self.macs is None) != (other.macs is None):
            raise ValueError("cannot combine authenticated and plain shares")

    def __add__(self, other: "Share") -> "Share":
        self._check(other)
        t = self.modulus
        m = None if self.macs is None else (self.macs + other.macs) % t
        return self._wrap((self.values + other.values) % t, m)

    def __sub__(self, other: "Share") -> "Share":
        self._check(other)
        t = self.modulus
        m = None if self.macs is None else (self.macs - other.macs) % t
        return self._wrap((self.values - other.values) % t, m)

    def __neg__(self) -> "Share":
        t = self.modulus
        m = None if self.macs is None else (-self.macs) % t
        return self._wrap((-self.values) % t, m)

    def __mul__(self, k) -> "Share":
        """Multiply by a public scalar or a public array (broadcasting)."""
        if isinstance(k, Share):
            raise TypeError("shared-by-shared products need a Beaver triple")
        t = self.modulus
        k = k % t if isinstance(k, int) else as_obj(k) % t
        m = None if self.macs is None else (self.macs * k) % t
        return self._wrap((self.values * k) % t, m)

    __rmul__ = __mul__

    def matmul_public_left(self, pub) -> "Share":
        """pub @ self for a public matrix."""
        t = self.modulus
        pub = as_obj(pub)
        m = None if self.macs is None else np.dot(pub, self.macs) % t
        return self._wrap(np.dot(pub, self.values) % t, m)

    def matmul_public_right(self, pub) -> "Share":
        """self @ pub for a public matrix."""
        t = self.modulus
        pub = as_obj(pub)
        m = None if self.macs is None else np.dot(self.macs, pub) % t
        return self._wrap(np.dot(self.values, pub) % t, m)

    def sum(self, axis=None) -> "Share":
        t = self.modulus
        v = as_obj(self.values.sum(axis=axis))
        m = None if self.macs is None else as_obj(self.macs.sum(axis=axis))
        return self._wrap(v % t, None if m is None else m % t)

    def add_public(self, c, pid: int, alpha_share: int | None) -> "Share":
        """Add a public constant: party 0 adds it to its value share and
        every party adds alpha_i * c to its tag share."""
        t = self.modulus
        c = c % t if isinstance(c, int) else as_obj(c) % t
        vals = (self.values + c) % t if pid == 0 else self.values + 0 * c
        vals = as_obj(vals)
        m = None
        if self.macs is not None:
            m = (self.macs + alpha_share * c) % t
        return self._wrap(vals, m)

    def __repr__(self) -> str:
        tag = "auth " if self.macs is not None else ""
        return f"Share({tag}mod {self.modulus}, shape {self.shape})"


def _same_modulus(parts: Iterable[Share]) -> int:
    mods = {p.modulus for p in parts}
    if len(mods) != 1:
        raise ValueError(f"modulus mismatch: {sorted(mods)}")
    return mods.pop()
