"""Property-based checks of sharing, tagging, encoding and serialisation."""

import random

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from spdznn import codec, fixedpoint
from spdznn import numtheory as nt
from spdznn.comparison import mask_bits
from spdznn.material import split
from spdznn.runtime.store import Kind, PreprocessingStore
from spdznn.runtime.wire import MsgKind, decode_frame, encode_frame
from spdznn.shares import Share, as_obj
from spdznn.training import _floor_shift

from conftest import combine

P = fixedpoint.test_profile()
Q = P.Q
SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])

moduli = st.sampled_from([11, 35, 60491, Q, nt.next_prime(2**145)])
parties = st.integers(2, 6)


def _tagged(values, t, n, alpha, seed):
    rng = random.Random(seed)
    vals = split(rng, as_obj(values) % t, t, n)
    alpha_parts = [int(a[0]) for a in split(rng, as_obj([alpha]), t, n)]
    macs = split(rng, as_obj(values) * alpha % t, t, n)
    return [Share(t, v, m) for v, m in zip(vals, macs)], alpha_parts


@SETTINGS
@given(t=moduli, n=parties, data=st.data())
def test_split_reconstructs(t, n, data):
    values = data.draw(st.lists(st.integers(0, t - 1), min_size=1, max_size=20))
    parts = split(random.Random(data.draw(st.integers())), as_obj(values), t, n)
    assert len(parts) == n
    assert combine(parts, t).tolist() == values


@SETTINGS
@given(t=moduli, n=parties, data=st.data())
def test_tags_are_linear(t, n, data):
    ints = st.integers(0, t - 1)
    x, y, a, b, c, alpha = (data.draw(ints) for _ in range(6))
    xs, alpha_parts = _tagged([x], t, n, alpha, data.draw(st.integers()))
    ys, _ = _tagged([y], t, n, alpha, data.draw(st.integers()))
    out = [(xs[i] * a + ys[i] * b).add_public(c, i, alpha_parts[i]) for i in range(n)]
    value = int(combine([o.values for o in out], t)[0])
    tag = int(combine([o.macs for o in out], t)[0])
    assert value == (a * x + b * y + c) % t
    assert tag == alpha * value % t


@SETTINGS
@given(x=st.floats(-7.99, 7.99, allow_nan=False))
def test_encode_decode_error(x):
    assert abs(fixedpoint.fx_decode(fixedpoint.fx_encode(x, P), P) - x) <= 2.0 ** (-P.f - 1)


@SETTINGS
@given(v=st.integers(-(2**30), 2**30))
def test_signed_inverts_reduction(v):
    assert int(fixedpoint.signed([v % Q], Q)[0]) == v


@SETTINGS
@given(values=st.lists(st.integers(0, 2**300), max_size=30))
def test_codec_roundtrip(values):
    buf = codec.encode_ints(values)
    assert codec.decode_ints(buf) == (values, len(buf))
    assert codec.decode_counted(codec.encode_counted(values)) == (values, len(buf) + 4)


@SETTINGS
@given(kind=st.sampled_from(list(MsgKind)), sid=st.integers(0, 2**64 - 1),
       tag=st.integers(0, 2**32 - 1), values=st.lists(st.integers(0, 2**200), max_size=10))
def test_frame_roundtrip(kind, sid, tag, values):
    f = decode_frame(encode_frame(kind, sid, tag, values))
    assert (f.kind, f.session_id, f.round_tag, f.values) == (kind, sid, tag, values)


records = st.tuples(st.sampled_from([Kind.TRIPLE, Kind.BIT, Kind.RNDINT, Kind.ZERO]),
                    st.sampled_from([35, Q]),
                    st.lists(st.integers(0, 2**40), min_size=1, max_size=6))


@SETTINGS
@given(recs=st.lists(records, max_size=12))
def test_store_roundtrip(recs):
    s = PreprocessingStore()
    for kind, t, ints in recs:
        s.append(kind, t, ints)
    back = PreprocessingStore.from_bytes(s.to_bytes())
    assert back.to_bytes() == s.to_bytes()
    assert back.summary() == s.summary()


@SETTINGS
@given(t=st.integers(2**12, 2**200), v=st.integers(1, 40), kappa=st.integers(1, 80))
def test_mask_bits_never_wrap(t, v, kappa):
    if (2**v - 1) + (2**v - 1) >= t:
        return
    s = mask_bits(t, v, kappa)
    assert 0 <= s <= kappa
    assert (2**v - 1) + (2**(v + s) - 1) < t


@SETTINGS
@given(x=st.integers(-(2**11), 2**11 - 1), m=st.integers(0, 8))
def test_floor_shift_reference_matches_python(x, m):
    # the plaintext reference model truncates by arithmetic shift
    assert int(_floor_shift(np.array([x], dtype=object), m)[0]) == x // 2**m
