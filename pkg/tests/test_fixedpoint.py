"""Fixed-point encoding, truncation and multiplication over Z_Q."""

import numpy as np
import pytest

from spdznn import fixedpoint as fx
from spdznn.errors import ConfigError
from spdznn.sharing import open_many
from spdznn.shares import Share

from conftest import run_outputs, split_values

P = fx.test_profile()
Q = P.Q
F4 = fx.FxParams(4, 4, Q, 8)


def test_profiles():
    assert Q == 2147483659 and (P.e, P.f, P.kappa, P.k) == (4, 8, 8, 12)
    prod = fx.production_profile()
    assert prod.Q > 2**145 and (prod.e, prod.f, prod.kappa) == (12, 52, 80)
    prod.validate()


def test_params_validation():
    with pytest.raises(ConfigError):
        fx.FxParams(4, 8, 251, 8).validate()
    with pytest.raises(ConfigError):
        fx.FxParams(4, 8, 2**31, 8).validate()
    with pytest.raises(ConfigError):
        fx.FxParams(4, 0, Q, 8).validate()


@pytest.mark.parametrize("x,expected", [(1.5, 24), (0.0, 0), (-1.5, Q - 24)])
def test_encode_examples(x, expected):
    assert fx.fx_encode(x, F4) == expected


def test_encode_rejects_overflow_and_nan():
    with pytest.raises(ValueError):
        fx.fx_encode(8.0, F4)
    with pytest.raises(ValueError):
        fx.fx_encode(float("nan"), F4)


def test_encode_rounds_half_away_from_zero():
    assert fx.fx_encode(1 / 32, F4) == 1
    assert fx.fx_encode(-1 / 32, F4) == Q - 1


def test_decode_roundtrip_error():
    xs = np.random.default_rng(0).uniform(-7.9, 7.9, 5000)
    back = fx.fx_decode(fx.fx_encode(xs, P), P)
    assert np.max(np.abs(back - xs)) <= 2.0 ** (-P.f - 1)


def test_signed():
    assert list(fx.signed([0, 5, Q - 5], Q)) == [0, 5, -5]


# ---- truncation ---------------------------------------------------------------------------

def _trunc_pr_values(x, m, k, copies, seed=0):
    parts = split_values([x % Q] * copies, Q, 3, seed)

    def job(party):
        (out,) = open_many(party, [fx.trunc_pr(party, Share(Q, parts[party.pid]), m, k)])
        return [int(v) for v in fx.signed(out, Q)]
    return run_outputs(job, seed=seed)[0]


def test_trunc_pr_exact_multiple_is_exact():
    # 576 = 36 * 16: the dropped fraction is zero, so 37 never appears
    assert set(_trunc_pr_values(576, 4, 20, 2000)) == {36}


def test_trunc_pr_zero():
    assert set(_trunc_pr_values(0, 4, 20, 200)) == {0}


@pytest.mark.parametrize("x,m", [(580, 4), (-580, 4), (1000, 8)])
def test_trunc_pr_rounds_up_with_fraction_probability(x, m):
    n = 10_000
    vals = _trunc_pr_values(x, m, 20, n, seed=x)
    lo = x >> m
    assert set(vals) <= {lo, lo + 1}
    p = (x % 2**m) / 2**m
    rate = vals.count(lo + 1) / n
    assert abs(rate - p) <= 4 * (p * (1 - p) / n) ** 0.5


def _trunc_values(xs, m, k):
    parts = split_values([x % Q for x in xs], Q, 3, 1)

    def job(party):
        (out,) = open_many(party, [fx.trunc(party, Share(Q, parts[party.pid]), m, k)])
        return [int(v) for v in fx.signed(out, Q)]
    return run_outputs(job)[0]


@pytest.mark.parametrize("x,m,expected", [(37, 2, 9), (-37, 2, -10), (37, 0, 37), (-1, 3, -1)])
def test_trunc_examples(x, m, expected):
    assert _trunc_values([x], m, 8) == [expected]


# ---- multiplication and comparison ----------------------------------------------------------

def _fx_mul(xs, ys, params=P):
    a = split_values(fx.fx_encode(xs, params), params.Q, 3, 2)
    b = split_values(fx.fx_encode(ys, params), params.Q, 3, 3)

    def job(party):
        z = fx.fx_mul(party, Share(params.Q, a[party.pid]), Share(params.Q, b[party.pid]), params)
        return fx.fx_decode(open_many(party, [z])[0], params)
    return run_outputs(job, kappa=params.kappa)[0]


def test_fx_mul_examples():
    got = _fx_mul([1.5, 2.75, 1.0, -3.0], [2.0, 0.0, 1.25, 1.5])
    assert abs(got[0] - 3.0) <= 2**-8
    assert got[1] == 0.0
    assert abs(got[2] - 1.25) <= 2**-8
    assert abs(got[3] + 4.5) <= 2**-8


@pytest.mark.parametrize("x,expected", [(0.25, 1), (-0.25, 0), (0.0, 1), (-2**-8, 0)])
def test_fx_gez(x, expected):
    parts = split_values([fx.fx_encode(x, P)], Q, 3, 4)

    def job(party):
        return int(open_many(party, [fx.fx_gez(party, Share(Q, parts[party.pid]), P)])[0][0])
    assert run_outputs(job)[0] == expected
