"""Number theory helpers and threshold Paillier."""

import random

import pytest
import sympy

from spdznn import numtheory as nt
from spdznn import paillier
from spdznn.errors import DecryptionAbort, FormatError
from spdznn.jobs import TOY_KEY_SEED

from conftest import PointTamper, run_outputs


def toy_key(n_parties=3, seed=0):
    """Hand-built decryption shares for N = 35 (5 * 7)."""
    N, lam = 35, 24
    d = nt.crt_exponent(N, lam)
    rng = random.Random(seed)
    parts = [rng.randrange(N * lam) for _ in range(n_parties - 1)]
    parts.append((d - sum(parts)) % (N * lam))
    return paillier.PaillierPublicKey(N), [paillier.PaillierDecShare(i + 1, s)
                                           for i, s in enumerate(parts)]


# ---- numtheory -----------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 35, 251, 241, 2**31 + 11, 2**61 - 1, 2**64 + 1])
def test_is_prime_matches_sympy(n):
    assert nt.is_prime(n) == sympy.isprime(n)


def test_next_and_prev_prime():
    assert nt.next_prime(2**31) == sympy.nextprime(2**31) == 2147483659
    assert nt.prev_prime(252) == 251
    assert nt.prev_prime(3) == 2
    assert nt.prev_prime(2) is None


def test_invmod_and_centered():
    assert nt.invmod(6, 35) == 6
    with pytest.raises(ValueError):
        nt.invmod(5, 35)
    assert nt.centered(34, 35) == -1
    assert nt.centered(17, 35) == 17
    assert nt.centered(18, 35) == -17


@pytest.mark.parametrize("n,expected", [(0, 0), (1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (1024, 10)])
def test_ceil_log2(n, expected):
    assert nt.ceil_log2(n) == expected


def test_crt_exponent():
    d = nt.crt_exponent(35, 24)
    assert d % 35 == 1 and d % 24 == 0


# ---- key generation --------------------------------------------------------------

def test_keygen_fixed_seed_gives_251_241():
    p, q = paillier.dealer_primes(16, TOY_KEY_SEED)
    assert {p, q} == {251, 241}
    assert sympy.isprime(p) and sympy.isprime(q)
    pk, _ = paillier.keygen_dealer(16, 2, TOY_KEY_SEED)
    assert pk.N == 60491 == 251 * 241


def test_keygen_shares_sum_to_d():
    pk, shares = paillier.keygen_dealer(16, 3, b"three")
    p, q = sympy.factorint(pk.N).keys()
    lam = (p - 1) * (q - 1)
    d = sum(s.d_i for s in shares) % (pk.N * lam)
    assert d % pk.N == 1 and d % lam == 0
    assert pk.g == pk.N + 1
    assert [s.party_index for s in shares] == [1, 2, 3]


def test_keygen_is_deterministic():
    assert paillier.keygen_dealer(32, 3, b"x") == paillier.keygen_dealer(32, 3, b"x")
    assert paillier.keygen_dealer(32, 3, b"x")[0] != paillier.keygen_dealer(32, 3, b"y")[0]


def test_keygen_rejects_tiny_modulus():
    with pytest.raises(ValueError):
        paillier.keygen_dealer(8, 2, b"s")


# ---- encryption and homomorphisms ---------------------------------------------

def test_encrypt_direct_oracle():
    pk = paillier.PaillierPublicKey(35)
    assert paillier.encrypt(pk, 4, 2).c == pow(36, 4, 1225) * pow(2, 35, 1225) % 1225
    assert paillier.encrypt(pk, 0, 1).c == 1


def test_encrypt_rejects_non_unit_randomness():
    pk = paillier.PaillierPublicKey(35)
    with pytest.raises(ValueError):
        paillier.encrypt(pk, 4, 7)
    with pytest.raises(ValueError):
        paillier.encrypt(pk, 35, 2)


def test_zero_decrypts_to_zero_for_any_r():
    pk, shares = toy_key()
    for r in (1, 2, 3, 4, 6, 8, 34):
        assert paillier.decrypt_with_shares(pk, paillier.encrypt(pk, 0, r), shares) == 0


@pytest.mark.parametrize("a,b,expected", [(3, 4, 7), (34, 1, 0), (9, 0, 9)])
def test_padd(a, b, expected):
    pk, shares = toy_key()
    c = paillier.padd(pk, [paillier.encrypt(pk, a, 2), paillier.encrypt(pk, b, 3)])
    assert paillier.decrypt_with_shares(pk, c, shares) == expected


@pytest.mark.parametrize("m,k,expected", [(3, 4, 12), (9, 1, 9), (9, 0, 0)])
def test_pmult(m, k, expected):
    pk, shares = toy_key()
    c = paillier.pmult(pk, paillier.encrypt(pk, m, 2), k)
    assert paillier.decrypt_with_shares(pk, c, shares) == expected


def test_pinv():
    pk, shares = toy_key()
    assert paillier.decrypt_with_shares(pk, paillier.pinv(pk, paillier.encrypt(pk, 4, 2)),
                                        shares) == 31
    assert paillier.decrypt_with_shares(pk, paillier.pinv(pk, paillier.encrypt(pk, 0, 2)),
                                        shares) == 0
    c = paillier.encrypt(pk, 13, 3)
    both = paillier.padd(pk, [c, paillier.pinv(pk, c)])
    assert paillier.decrypt_with_shares(pk, both, shares) == 0


def test_pinv_rejects_malformed_ciphertext():
    pk = paillier.PaillierPublicKey(35)
    with pytest.raises(ValueError):
        paillier.pinv(pk, paillier.Ciphertext(5, 35))


def test_key_mismatch_rejected():
    pk = paillier.PaillierPublicKey(35)
    other = paillier.PaillierPublicKey(33)
    with pytest.raises(ValueError):
        paillier.padd(pk, [paillier.encrypt(other, 1, 2)])


# ---- joint decryption ------------------------------------------------------------

def _decrypt_job(pk, shares, m):
    ct = paillier.encrypt(pk, m, 5)

    def job(party):
        return paillier.joint_decrypt(party, [ct], pk, shares[party.pid])[0]
    return job


@pytest.mark.parametrize("m", [4, 0])
def test_joint_decrypt_three_parties(m):
    pk, shares = paillier.keygen_dealer(64, 3, b"joint")
    assert run_outputs(_decrypt_job(pk, shares, m)) == [m, m, m]


def test_joint_decrypt_aborts_on_random_partial():
    pk, shares = paillier.keygen_dealer(64, 3, b"joint")
    bad = PointTamper("partial_decrypt", lambda vals: [random.Random(1).randrange(pk.Nsq)])
    with pytest.raises(DecryptionAbort):
        run_outputs(_decrypt_job(pk, shares, 4), adversaries={1: bad})


def test_key_file_roundtrip(tmp_path):
    pk, shares = paillier.keygen_dealer(32, 2, b"file")
    path = tmp_path / "party0.key"
    paillier.write_key_file(path, pk, shares[0])
    assert paillier.read_key_file(path) == (pk, shares[0])
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(FormatError):
        paillier.read_key_file(path)
