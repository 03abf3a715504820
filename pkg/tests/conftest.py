"""Shared helpers: run a job for every party and rebuild secrets from shares."""

from __future__ import annotations

import random

import numpy as np
import pytest

from spdznn.material import Dealer, split
from spdznn.runtime.party import Adversary
from spdznn.runtime.session import run_simulated
from spdznn.shares import Share, as_obj

TOY_N = 35
TOY_Q = 11


def run(job, n: int = 3, *, mac_modulus: int | None = None, seed=0, kappa: int = 8,
        adversaries=None, dealer=None):
    """Run ``job`` for n simulated parties with a seeded dealer."""
    if dealer is None:
        dealer = Dealer(n, seed=("tests", seed), mac_modulus=mac_modulus)
    return run_simulated(n, job, seed=seed, dealer=dealer, kappa=kappa, adversaries=adversaries)


def run_outputs(job, n: int = 3, **kw) -> list:
    return run(job, n, **kw).outputs


def split_values(values, t: int, n: int, seed=0) -> list[np.ndarray]:
    """Additive n-way sharing of plain values mod t; entry i is party i's array."""
    return split(random.Random(repr(("split", seed))), as_obj(values) % t, t, n)


def combine(parts, t: int) -> np.ndarray:
    """Sum per-party share arrays mod t."""
    total = as_obj(parts[0]).copy()
    for p in parts[1:]:
        total = total + as_obj(p)
    return total % t


def reveal(outputs, t: int) -> list[int]:
    """Rebuild a flat list of secrets from per-party Share outputs."""
    vals = [o.values if isinstance(o, Share) else o for o in outputs]
    return [int(v) for v in combine(vals, t).ravel()]


class PointTamper(Adversary):
    """Apply ``fn(values)`` at one hook point, at most ``times`` times."""

    def __init__(self, point: str, fn, times: int = 1):
        self.point, self.fn, self.left = point, fn, times

    def tamper(self, party, point, values):
        if point == self.point and self.left > 0:
            self.left -= 1
            return self.fn(values)
        return values


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion that ran."""
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
