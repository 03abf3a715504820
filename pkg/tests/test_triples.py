"""Paillier triple generation, sacrificing and shared random integers."""

import numpy as np
import pytest
from scipy import stats

from spdznn.errors import SacrificeFailure
from spdznn.material import BeaverTriple, triples
from spdznn.sharing import open_many
from spdznn.shares import Share
from spdznn.triples import matrix_trigen, rnd_int, sacrifice, trigen

from conftest import reveal, run, run_outputs
from test_paillier import toy_key


def _opened_triple(tr, party):
    a, b, c = open_many(party, [tr.a, tr.b, tr.c])
    return [int(v) for v in a], [int(v) for v in b], [int(v) for v in c]


def test_trigen_hand_trace():
    pk, shares = toy_key(2)
    own = {0: ([3], [2]), 1: ([4], [1])}

    def job(party):
        return _opened_triple(trigen(party, pk, shares[party.pid], 1, own=own[party.pid]), party)
    a, b, c = run_outputs(job, n=2)[0]
    assert (a, b, c) == ([7], [3], [21])


def test_trigen_zero_a():
    pk, shares = toy_key(3)

    def job(party):
        return _opened_triple(trigen(party, pk, shares[party.pid], 2,
                                     own=([0, 0], [5, 9])), party)
    assert run_outputs(job)[0][2] == [0, 0]


def test_trigen_1000_random_triples():
    pk, shares = toy_key(3)

    def job(party):
        return _opened_triple(trigen(party, pk, shares[party.pid], 1000), party)
    a, b, c = run_outputs(job)[0]
    assert all(x * y % 35 == z for x, y, z in zip(a, b, c))
    assert len(set(a)) > 30


def test_trigen_round_count():
    pk, shares = toy_key(3)
    res = run(lambda p: trigen(p, pk, shares[p.pid], 3))
    assert res.counters[0].rounds("trigen") == 4


@pytest.mark.parametrize("dims", [(1, 1, 1), (2, 2, 2), (2, 3, 1)])
def test_matrix_trigen(dims):
    pk, shares = toy_key(3)

    def job(party):
        tr = matrix_trigen(party, pk, shares[party.pid], dims)
        A, B, C = open_many(party, [tr.A, tr.B, tr.C])
        return A, B, C
    A, B, C = run_outputs(job)[0]
    assert (np.dot(A, B) % 35 == C).all()


def test_matrix_trigen_zero_a():
    pk, shares = toy_key(3)
    zeros = np.zeros((2, 2), dtype=object)

    def job(party):
        tr = matrix_trigen(party, pk, shares[party.pid], (2, 2, 2),
                           own=(zeros, np.ones((2, 2), dtype=object) * (party.pid + 1)))
        return open_many(party, [tr.C])[0]
    assert (run_outputs(job)[0] == 0).all()


# ---- sacrifice -------------------------------------------------------------------------

def _perturbed(tr: BeaverTriple, delta: int, pid: int) -> BeaverTriple:
    """Party 0 shifts its share of c by delta."""
    if pid != 0:
        return tr
    return BeaverTriple(tr.a, tr.b, Share(tr.c.modulus, (tr.c.values + delta) % tr.c.modulus))


def _sacrifice_job(count, perturb=None, delta=1):
    """perturb: None, 't1' or 't2' (whose c share party 0 shifts by delta)."""
    def job(party):
        t1, t2 = triples(party, 35, count), triples(party, 35, count)
        if perturb == "t1":
            t1 = _perturbed(t1, delta, party.pid)
        elif perturb == "t2":
            t2 = _perturbed(t2, delta, party.pid)
        try:
            sacrifice(party, t1, t2)
        except SacrificeFailure as exc:
            return len(exc.detail)
        return 0
    return job


def test_sacrifice_honest_accepts():
    assert run_outputs(_sacrifice_job(1)) == [0, 0, 0]


def test_sacrifice_catches_perturbed_c2():
    # the check is rho*0 - delta: always nonzero
    assert run_outputs(_sacrifice_job(200, "t2"))[0] == 200


def test_sacrifice_500_honest_pairs():
    assert run_outputs(_sacrifice_job(500), seed=3)[0] == 0


@pytest.mark.parametrize("delta,miss", [(1, 1 / 35), (7, 7 / 35), (5, 5 / 35)])
def test_sacrifice_miss_rate_follows_gcd(delta, miss):
    # perturbing c1 by delta escapes only when rho * delta = 0 mod 35
    count = 4000
    caught = run_outputs(_sacrifice_job(count, "t1", delta), seed=delta)[0]
    rate = 1 - caught / count
    sigma = (miss * (1 - miss) / count) ** 0.5
    assert abs(rate - miss) <= 4 * sigma


def test_sacrifice_rejects_shape_mismatch():
    def job(party):
        sacrifice(party, triples(party, 35, 2), triples(party, 35, 3))
    with pytest.raises(ValueError):
        run_outputs(job)


# ---- shared random integers ------------------------------------------------------------

def test_rnd_int_dealt_values():
    def job(party):
        return rnd_int(party, 35, 1, own=[5 + party.pid])
    assert reveal(run_outputs(job), 35) == [18]


def test_rnd_int_uniform_chi_square():
    vals = reveal(run_outputs(lambda p: rnd_int(p, 35, 10_000), seed=11), 35)
    counts = np.bincount(vals, minlength=35)
    assert stats.chisquare(counts).pvalue > 0.01


def test_rnd_int_uniform_with_single_honest_party():
    def job(party):
        own = None if party.pid == 0 else [3] * 10_000
        return rnd_int(party, 35, 10_000, own=own)
    counts = np.bincount(reveal(run_outputs(job, seed=12), 35), minlength=35)
    assert stats.chisquare(counts).pvalue > 0.01
