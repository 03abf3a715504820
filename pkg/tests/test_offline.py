"""Demand planning, store generation and store verification."""

import pytest

from spdznn import fixedpoint, offline, paillier
from spdznn.errors import ConfigError, MacCheckFailure, MaterialDepleted
from spdznn.material import StoreSource
from spdznn.runtime.session import run_simulated
from spdznn.runtime.store import Kind, PreprocessingStore
from spdznn.sharing import mac_check, mul_beaver, open_many, share_input
from spdznn.material import triples

Q = fixedpoint.test_profile().Q


def _mul_job(count):
    def job(party):
        x = share_input(party, 0, list(range(1, count + 1)) if party.pid == 0 else None, Q, count)
        z = mul_beaver(party, x, x, triples(party, Q, count))
        out = open_many(party, [z])[0]
        mac_check(party)
        return [int(v) for v in out]
    return job


def _run_from_stores(stores, job):
    return run_simulated(len(stores), job, sources=[StoreSource(s) for s in stores],
                         mac_keys=[s.mac_key[1] for s in stores], mac_modulus=Q)


def test_parse_demand_names():
    d = offline.parse_demand(["triples_Q=10", "bit=5", "bounded:12=4", "triple=2"], Q)
    assert d == {(Kind.TRIPLE, Q, ()): 12, (Kind.BIT, Q, ()): 5, (Kind.BOUNDED, Q, (12,)): 4}
    with pytest.raises(ConfigError):
        offline.parse_demand(["gadget=1"], Q)


def test_plan_demand_counts_a_job():
    demand = offline.plan_demand(3, _mul_job(4), mac_modulus=Q, kappa=8)
    assert demand[(Kind.TRIPLE, Q, ())] == 4


def test_dealer_store_verifies_and_feeds_a_session(tmp_path):
    stores = offline.dealer_stores(3, offline.parse_demand(["triples_Q=10"], Q),
                                   seed="t", mac_modulus=Q)
    report = offline.verify_stores(stores)
    assert report.ok and report.checked["TRIPLE"] == 10
    for i, s in enumerate(stores):
        s.save(tmp_path / f"party{i}.store")
    loaded = [PreprocessingStore.load(tmp_path / f"party{i}.store") for i in range(3)]
    assert offline.verify_stores(loaded).checked == report.checked

    # a full online job also needs its input masks: plan them
    demand = offline.plan_demand(3, _mul_job(10), mac_modulus=Q, kappa=8)
    planned = offline.dealer_stores(3, demand, seed="t", mac_modulus=Q)
    res = _run_from_stores(planned, _mul_job(10))
    assert res.outputs[0] == [v * v for v in range(1, 11)]
    assert all(s.available(Kind.TRIPLE, Q) == 0 for s in planned)


def test_empty_demand_gives_empty_store_and_online_job_aborts():
    stores = offline.dealer_stores(3, {}, mac_modulus=Q)
    assert all(s.summary() == {} for s in stores)
    for i, s in enumerate(stores):
        s.append(Kind.MACKEY, Q, [offline.mac_key_shares(3, Q)[i]])
    with pytest.raises(MaterialDepleted):
        _run_from_stores(stores, _mul_job(1))


def test_verify_catches_a_bad_triple():
    stores = offline.dealer_stores(3, {(Kind.TRIPLE, Q, ()): 3}, mac_modulus=Q)
    rec = stores[1]._streams[(Kind.TRIPLE, Q, ())][1]
    rec[4] = (rec[4] + 1) % Q  # records interleave value and tag: a, a_tag, b, b_tag, c, c_tag
    report = offline.verify_stores(stores)
    assert not report.ok


def test_verify_catches_a_bad_tag():
    stores = offline.dealer_stores(3, {(Kind.BIT, Q, ()): 4}, mac_modulus=Q)
    rec = stores[0]._streams[(Kind.BIT, Q, ())][0]
    rec[-1] = (rec[-1] + 5) % Q
    assert not offline.verify_stores(stores).ok


def test_corrupted_tag_in_store_aborts_online():
    demand = offline.plan_demand(3, _mul_job(2), mac_modulus=Q, kappa=8)
    stores = offline.dealer_stores(3, demand, mac_modulus=Q)
    rec = stores[2]._streams[(Kind.TRIPLE, Q, ())][0]
    rec[-1] = (rec[-1] + 1) % Q
    with pytest.raises(MacCheckFailure):
        _run_from_stores(stores, _mul_job(2))


@pytest.mark.parametrize("kind,params", [(Kind.INVPAIR, ()), (Kind.BOUNDED, (9,)),
                                         (Kind.PREMUL, (4,)), (Kind.ZERO, ()),
                                         (Kind.RNDINT, ())])
def test_every_dealer_kind_verifies(kind, params):
    stores = offline.dealer_stores(3, {(kind, Q, params): 5}, mac_modulus=Q)
    report = offline.verify_stores(stores)
    assert report.ok and report.checked[kind.name] == 5


@pytest.mark.slow
def test_protocol_mode_store_verifies():
    base = paillier.keygen_dealer(40, 3, b"offline-base")
    lift = paillier.keygen_dealer(100, 3, b"offline-lift")
    keys = [(offline.PaillierKey(base[0], base[1][i]), offline.PaillierKey(lift[0], lift[1][i]))
            for i in range(3)]
    stores, aborts = offline.protocol_stores(
        keys, offline.parse_demand(["triples_Q=1"], Q), mac_keys=offline.mac_key_shares(3, Q),
        mac_modulus=Q, kappa=8)
    assert aborts == []
    report = offline.verify_stores(stores)
    assert report.ok and report.checked["TRIPLE"] == 1
