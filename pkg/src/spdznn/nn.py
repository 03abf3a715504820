"""Neural-network layer protocols over fixed-point shares in Z_Q.

Layer work that Table-style round accounting attributes to a layer runs
inside the layer's own counter scope (``linear``, ``relu``, ``maxpool``,
...). Rescaling a product back to f fraction bits is charged to the
separate ``rescale`` scope so the two costs can be read independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import material
from . import numtheory as nt
from .comparison import gez
from .errors import MaterialReuse
from .fixedpoint import FxParams, fx_encode, trunc_pr
from .sharing import add_const, matmul_beaver, mul_beaver, public_share
from .shares import Share, as_obj


def _mul(party, x: Share, y: Share) -> Share:
    return mul_beaver(party, x, y, material.triples(party, x.modulus, x.shape))


def rescale(party, x: Share, params: FxParams, extra: int = 0) -> Share:
    """Drop f (+ extra) fraction bits from a double-precision product."""
    with party.scope("rescale"):
        return trunc_pr(party, x, params.f + extra, params.k + params.f + extra)


# ---- probabilistic bits and dropout -------------------------------------------

def prnd_bit_params(params: FxParams, p: float) -> tuple[int, int]:
    """(payload bits, threshold) for a drop probability p.

    The comparison runs on payload + 1 bits so the statistical mask still
    fits below Q.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    payload = nt.ceil_log2(params.Q) - params.kappa - 2
    return payload, int(p * 2**payload)


def prnd_bit(party, p: float, params: FxParams, shape) -> Share:
    """Shared bits that are 0 with probability p and 1 otherwise.

    A shared uniform payload-bit integer a is compared with the public
    threshold floor(p * 2^payload): b = [a - threshold >= 0].
    """
    payload, threshold = prnd_bit_params(params, p)
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    with party.scope("prnd_bit"):
        a = material.bounded(party, params.Q, payload, shape)
        return gez(party, add_const(party, a, -threshold), payload + 1)


@dataclass
class DropoutMask:
    bits: Share
    p: float
    scale: int
    forward_used: bool = False
    backward_used: bool = False

    @property
    def scaled(self) -> Share:
        """b * c_bar, the fixed-point factor applied to kept entries."""
        return self.bits * self.scale


def dropout_mask(party, shape, p: float, params: FxParams) -> DropoutMask:
    """Prepare a mask ahead of the layer (counted under ``dropout_mask``)."""
    if p >= 1.0:
        raise ValueError("drop probability must be below 1")
    with party.scope("dropout_mask"):
        bits = prnd_bit(party, p, params, shape)
    return DropoutMask(bits, p, fx_encode(1.0 / (1.0 - p), params))


def dropout(party, x: Share, mask: DropoutMask, params: FxParams) -> Share:
    """x * b * c_bar entry-wise: one multiplication round plus a rescale."""
    if mask.forward_used:
        raise MaterialReuse("dropout mask already used for a forward pass")
    if mask.bits.shape != x.shape:
        raise ValueError("mask shape does not match the input")
    mask.forward_used = True
    with party.scope("dropout"):
        y = _mul(party, x, mask.scaled)
    return rescale(party, y, params)


def ddropout(party, g: Share, mask: DropoutMask, params: FxParams) -> Share:
    """Backward pass of dropout with the forward mask."""
    if mask.backward_used:
        raise MaterialReuse("dropout mask already used for a backward pass")
    mask.backward_used = True
    with party.scope("ddropout"):
        y = _mul(party, g, mask.scaled)
    return rescale(party, y, params)


# ---- linear and convolution ------------------------------------------------------

def linear_forward(party, x: Share, w: Share, params: FxParams, triple=None) -> Share:
    """x (r x s) @ w (s x u): one matrix-triple round, then a rescale."""
    r, s = x.shape
    u = w.shape[1]
    with party.scope("linear"):
        if triple is None:
            triple = material.matrix_triple(party, x.modulus, (r, s, u))
        y = matmul_beaver(party, x, w, triple)
    return rescale(party, y, params)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def im2col_indices(shape, kernel: tuple[int, int], stride: int, padding: int):
    """Gather indices turning (C, H, W) into (C*kh*kw, Ho*Wo) columns."""
    C, H, W = shape
    kh, kw = kernel
    Ho = conv_output_size(H, kh, stride, padding)
    Wo = conv_output_size(W, kw, stride, padding)
    c = np.repeat(np.arange(C), kh * kw)
    di = np.tile(np.repeat(np.arange(kh), kw), C)
    dj = np.tile(np.arange(kw), C * kh)
    oi = stride * np.repeat(np.arange(Ho), Wo)
    oj = stride * np.tile(np.arange(Wo), Ho)
    rows = di[:, None] + oi[None, :]
    cols = dj[:, None] + oj[None, :]
    return c[:, None], rows, cols, (Ho, Wo)


def im2col(x, kernel, stride: int, padding: int):
    """Columns of a (C, H, W) array (object or numeric), zero padded."""
    x = np.asarray(x)
    C, H, W = x.shape
    padded = np.zeros((C, H + 2 * padding, W + 2 * padding), dtype=x.dtype)
    if x.dtype == object:
        padded = np.empty(padded.shape, dtype=object)
        padded.fill(0)
    padded[:, padding:padding + H, padding:padding + W] = x
    c, rows, cols, out = im2col_indices(x.shape, kernel, stride, padding)
    return padded[c, rows, cols], out


def conv2d_forward(party, x: Share, filters: Share, params: FxParams, stride: int = 1,
                   padding: int = 0) -> Share:
    """Convolution of (B, C, H, W) or (C, H, W) shares with (O, C, kh, kw) filters.

    The input is unrolled into columns and multiplied by the flattened
    filters in one matrix-triple round, then rescaled.
    """
    single = x.values.ndim == 3
    vals = x.values[None] if single else x.values
    macs = None if x.macs is None else (x.macs[None] if single else x.macs)
    O, C, kh, kw = filters.shape
    cols_v, cols_m, out = [], [], None
    for b in range(vals.shape[0]):
        cv, out = im2col(vals[b], (kh, kw), stride, padding)
        cols_v.append(cv)
        if macs is not None:
            cols_m.append(im2col(macs[b], (kh, kw), stride, padding)[0])
    cols = Share(x.modulus, np.concatenate(cols_v, axis=1),
                 None if macs is None else np.concatenate(cols_m, axis=1))
    fmat = filters.reshape(O, C * kh * kw)
    with party.scope("conv2d"):
        y = matmul_beaver(party, fmat, cols,
                          material.matrix_triple(party, x.modulus, (O, C * kh * kw, cols.shape[1])))
    y = rescale(party, y, params)
    B = vals.shape[0]
    Ho, Wo = out
    y = y.reshape(O, B, Ho, Wo).transpose(1, 0, 2, 3)
    return y[0] if single else y


# ---- ReLU -------------------------------------------------------------------------

def relu(party, x: Share, params: FxParams) -> tuple[Share, Share]:
    """(x * s, s) with s = [x >= 0] entry-wise."""
    with party.scope("relu"):
        s = gez(party, x, params.k)
        y = _mul(party, x, s)
    return y, s


def drelu(party, g: Share, s: Share) -> Share:
    """Backward pass of ReLU: g * s with the stored sign bits."""
    with party.scope("drelu"):
        return _mul(party, g, s)


# ---- max pooling ------------------------------------------------------------------

def _pad_windows(party, x: Share, params: FxParams) -> Share:
    j = x.shape[-1]
    width = 1
    while width < j:
        width *= 2
    if width == j:
        return x
    sentinel = -(2**(params.k - 1)) + 1
    pad = public_share(party, x.modulus,
                       np.full(x.shape[:-1] + (width - j,), sentinel % x.modulus, dtype=object))
    return Share.concat([x, pad], axis=-1)


def maxpool(party, x: Share, params: FxParams) -> tuple[Share, Share]:
    """Maximum along the last axis by a comparison tournament.

    Returns the maxima and the trace, an (..., s, log2 s) array of shared
    bits whose row i holds the comparison outcomes on leaf i's path.
    """
    j = x.shape[-1]
    x = _pad_windows(party, x, params)
    s = x.shape[-1]
    depth = s.bit_length() - 1
    batch = x.shape[:-1]
    t = x.modulus
    with party.scope("maxpool"):
        level = x
        columns = []
        for _ in range(depth):
            left, right = level[..., 0::2], level[..., 1::2]
            diff = left - right
            c = gez(party, diff, params.k + 1)
            level = right + _mul(party, c, diff)
            # leaf i sits under pair i >> (d+1); left leaves take c, right ones 1 - c
            width = 2**(len(columns) + 1)
            pair = np.arange(s) // width
            is_left = (np.arange(s) % width) < width // 2
            chosen_c = c.values[..., pair]
            flip = add_const(party, -c, 1).values[..., pair]
            vals = np.where(is_left, chosen_c, flip)
            macs = None
            if c.macs is not None:
                one_minus = add_const(party, -c, 1)
                macs = np.where(is_left, c.macs[..., pair], one_minus.macs[..., pair])
            col = Share(t, as_obj(vals), None if macs is None else as_obj(macs))
            columns.append(col + material.zeros(party, t, col.shape))
        y = level[..., 0]
    if depth == 0:
        trace = Share(t, np.empty(batch + (s, 0), dtype=object),
                      None if x.macs is None else np.empty(batch + (s, 0), dtype=object))
    else:
        trace = Share.stack(columns, axis=-1)
    if s != j:
        trace = trace[..., :j, :]
    return y, trace


def dmaxpool(party, trace: Share) -> Share:
    """One-hot argmax indicator: the product of each row of the trace.

    A balanced product tree takes ceil(log2 depth) multiplication rounds.
    """
    t = trace.modulus
    with party.scope("dmaxpool"):
        level = trace
        if level.shape[-1] == 0:
            return public_share(party, t, np.ones(trace.shape[:-1], dtype=object))
        while level.shape[-1] > 1:
            if level.shape[-1] % 2:
                one = public_share(party, t, np.ones(level.shape[:-1] + (1,), dtype=object))
                level = Share.concat([level, one], axis=-1)
            level = _mul(party, level[..., 0::2], level[..., 1::2])
        return level[..., 0]


def pool_windows(x: Share, size: int) -> Share:
    """(B, C, H, W) -> (B, C, H/size, W/size, size*size) non-overlapping windows."""
    B, C, H, W = x.shape
    def arrange(a):
        a = a.reshape(B, C, H // size, size, W // size, size)
        return a.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // size, W // size, size * size)
    return Share(x.modulus, arrange(x.values), None if x.macs is None else arrange(x.macs))


def unpool_windows(w: Share, size: int) -> Share:
    """Inverse of pool_windows."""
    B, C, Hp, Wp, _ = w.shape
    def arrange(a):
        a = a.reshape(B, C, Hp, Wp, size, size).transpose(0, 1, 2, 4, 3, 5)
        return a.reshape(B, C, Hp * size, Wp * size)
    return Share(w.modulus, arrange(w.values), None if w.macs is None else arrange(w.macs))
