"""Single-protocol conformance jobs behind ``spdznn run-protocol``.

Each job runs one protocol for every party over the chosen transport and
checks the opened outputs against a plaintext oracle. ``toy`` selects the
small exhaustive settings (N = 35, Q = 11 for conversions; a 16-bit RSA
modulus for GEZ); otherwise a random batch at test-profile sizes is used.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import paillier
from .comparison import gez
from .conversion import choose_n_prime, sha_conv, trip_conv
from .fixedpoint import test_profile
from .material import BeaverTriple, Dealer, split
from .runtime.party import derive_seed
from .runtime.session import SessionResult, run_networked, run_simulated
from .sharing import mac_check, mul_beaver, open_many, share_input
from .material import triples as take_triples
from .shares import Share, as_obj

PROTOCOLS = ("mul", "gez", "sha-conv", "trip-conv")

TOY_N, TOY_Q = 35, 11
TOY_KEY_SEED = b"\x00\x00\x00\x54"  # yields the 16-bit RSA modulus 60491


@dataclass
class JobSpec:
    job: object
    expected: list
    modulus: int | None  # MAC field, if any
    kappa: int
    detail: str


def toy_rsa_modulus() -> int:
    pk, _ = paillier.keygen_dealer(16, 2, TOY_KEY_SEED)
    return pk.N


def _splits(rng: random.Random, values, t: int, n: int) -> list[list[int]]:
    return [[int(v) for v in part] for part in split(rng, as_obj(list(values)), t, n)]


def _mul_job(n: int, seed, toy: bool) -> JobSpec:
    P = test_profile()
    Q = P.Q
    rng = random.Random(derive_seed(seed, "mul-inputs"))
    size = 16 if toy else 256
    xs = [rng.randrange(Q) for _ in range(size)]
    ys = [rng.randrange(Q) for _ in range(size)]

    def job(party):
        x = share_input(party, 0, xs if party.pid == 0 else None, Q, size)
        y = share_input(party, 1 % party.n, ys if party.pid == 1 % party.n else None, Q, size)
        z = mul_beaver(party, x, y, take_triples(party, Q, size))
        (out,) = open_many(party, [z])
        mac_check(party)
        return [int(v) for v in out]

    return JobSpec(job, [a * b % Q for a, b in zip(xs, ys)], Q, P.kappa,
                   f"{size} products over Q={Q}")


def _gez_job(n: int, seed, toy: bool) -> JobSpec:
    rng = random.Random(derive_seed(seed, "gez-inputs"))
    if toy:
        t, k, kappa = toy_rsa_modulus(), 8, 8
        xs = list(range(-128, 128))
    else:
        P = test_profile()
        t, k, kappa = P.Q, P.k, P.kappa
        xs = [rng.randrange(-2**(k - 1), 2**(k - 1)) for _ in range(256)]
    shares = _splits(rng, [x % t for x in xs], t, n)

    def job(party):
        x = Share(t, as_obj(shares[party.pid]))
        (out,) = open_many(party, [gez(party, x, k)])
        return [int(v) for v in out]

    return JobSpec(job, [int(x >= 0) for x in xs], None, kappa,
                   f"{len(xs)} signed {k}-bit inputs over t={t}")


def _conv_moduli(toy: bool, kappa: int) -> tuple[int, int, int]:
    if toy:
        return TOY_N, TOY_Q, choose_n_prime(TOY_N, kappa)
    pk, _ = paillier.keygen_dealer(40, 2, b"run-protocol-base")
    return pk.N, test_profile().Q, choose_n_prime(pk.N, kappa)


def _sha_conv_job(n: int, seed, toy: bool, splits: int = 10) -> JobSpec:
    kappa = 8
    N, Q, Np = _conv_moduli(toy, kappa)
    rng = random.Random(derive_seed(seed, "sha-conv-inputs"))
    xs = [x for x in range(N) for _ in range(splits)] if toy else \
        [rng.randrange(N) for _ in range(128)]
    shares = _splits(rng, xs, N, n)

    def job(party):
        x = Share(N, as_obj(shares[party.pid]))
        (out,) = open_many(party, [sha_conv(party, x, Q, Np)])
        return [int(v) for v in out]

    what = f"all x in Z_{N} x {splits} splits" if toy else f"{len(xs)} random x over N={N}"
    return JobSpec(job, [x % Q for x in xs], None, kappa, f"{what}, Q={Q}, N'={Np}")


def _trip_conv_job(n: int, seed, toy: bool) -> JobSpec:
    kappa = 8
    N, Q, Np = _conv_moduli(toy, kappa)
    rng = random.Random(derive_seed(seed, "trip-conv-inputs"))
    if toy:
        pairs = [(a, b) for a in range(N) for b in range(N)]
    else:
        pairs = [(rng.randrange(N), rng.randrange(N)) for _ in range(32)]
    a_sh = _splits(rng, [a for a, _ in pairs], N, n)
    b_sh = _splits(rng, [b for _, b in pairs], N, n)
    c_sh = _splits(rng, [a * b % N for a, b in pairs], N, n)

    def job(party):
        i = party.pid
        tr = BeaverTriple(Share(N, as_obj(a_sh[i])), Share(N, as_obj(b_sh[i])),
                          Share(N, as_obj(c_sh[i])))
        conv = trip_conv(party, tr, Q, Np)
        a, b, c = open_many(party, [conv.a, conv.b, conv.c])
        return [int((int(x) * int(y) - int(z)) % Q) for x, y, z in zip(a, b, c)]

    what = f"all (a, b) in Z_{N}^2" if toy else f"{len(pairs)} random triples over N={N}"
    return JobSpec(job, [0] * len(pairs), None, kappa, f"{what}, Q={Q}, N'={Np}")


def build_job(name: str, n: int = 3, seed=0, toy: bool = False, splits: int = 10) -> JobSpec:
    if name == "mul":
        return _mul_job(n, seed, toy)
    if name == "gez":
        return _gez_job(n, seed, toy)
    if name == "sha-conv":
        return _sha_conv_job(n, seed, toy, splits)
    if name == "trip-conv":
        return _trip_conv_job(n, seed, toy)
    raise ValueError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")


def run_protocol(name: str, *, n: int = 3, seed=0, toy: bool = False, transport: str = "sim",
                 splits: int = 10, latency: float = 0.0) -> dict:
    """Run one protocol job; returns a JSON-ready report."""
    spec = build_job(name, n, seed, toy, splits)
    dealer = Dealer(n, seed=("run-protocol", name, seed), mac_modulus=spec.modulus)
    runner = run_simulated if transport == "sim" else run_networked
    if transport not in ("sim", "tcp"):
        raise ValueError(f"unknown transport {transport!r}")
    res: SessionResult = runner(n, spec.job, seed=seed, dealer=dealer, kappa=spec.kappa,
                                latency=latency)
    outputs = res.outputs[0]
    failures = sum(1 for got, want in zip(outputs, spec.expected) if got != want)
    agree = all(o == outputs for o in res.outputs)
    return {
        "protocol": name,
        "mode": "toy" if toy else "batch",
        "transport": transport,
        "parties": n,
        "inputs": spec.detail,
        "checked": len(spec.expected),
        "failures": failures + (0 if agree else 1),
        "outputs": outputs,
        "counters": {k: list(v) for k, v in res.counters[0].snapshot().items()},
        "seconds": round(res.seconds, 3),
    }
