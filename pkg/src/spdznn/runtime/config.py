"""Run configuration: an INI-style key=value file with bracketed sections.

Example::

    [parties]
    n = 3
    transport = sim

    [tower]
    Q = 2147483659
    N_bits = 40
    N_prime_bits = 100

    [fixed]
    e = 4
    f = 8
    kappa = 8

    [model]
    layers = linear 16 8; relu; linear 8 2

    [train]
    epochs = 5
    batch_size = 20
    lr_shift = 5
    dropout = 0.0
    seed = 0

    [data]
    synthetic = 200 16

The tower may give literal moduli (``N``, ``N_prime``) or bit lengths; its
ordering n < Q < N < sqrt(N') is checked at load time.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .. import numtheory as nt
from ..errors import ConfigError
from ..fixedpoint import FxParams


@dataclass
class TowerSpec:
    Q: int
    N: int | None = None
    N_prime: int | None = None
    N_bits: int | None = None
    N_prime_bits: int | None = None

    def validate(self, n: int, kappa: int) -> "TowerSpec":
        if not nt.is_prime(self.Q):
            raise ConfigError(f"Q={self.Q} is not prime")
        if not n < self.Q:
            raise ConfigError(f"need n < Q, got n={n}, Q={self.Q}")
        # with bit lengths b, a keygen modulus lies in [2^(b-1), 2^b)
        n_low = self.N if self.N is not None else (2 ** (self.N_bits - 1) if self.N_bits else None)
        n_high = self.N if self.N is not None else (2 ** self.N_bits if self.N_bits else None)
        if n_low is None:
            return self
        if not self.Q < n_low:
            raise ConfigError(f"need Q < N, got Q={self.Q} and N of {n_low.bit_length()} bits")
        np_low = self.N_prime if self.N_prime is not None else (
            2 ** (self.N_prime_bits - 1) if self.N_prime_bits else None)
        if np_low is not None and not n_high * n_high < np_low:
            raise ConfigError("need N < sqrt(N')")
        if np_low is not None and not (2**kappa * n_high) ** 2 < np_low:
            raise ConfigError("need N' > (2^kappa N)^2 for statistically hidden conversions")
        return self


@dataclass
class RunConfig:
    n: int = 3
    transport: str = "sim"
    endpoints: list[tuple[str, int]] = field(default_factory=list)
    latency: float = 0.0
    tower: TowerSpec = field(default_factory=lambda: TowerSpec(nt.next_prime(2**31)))
    fx: FxParams = field(default_factory=lambda: FxParams(4, 8, nt.next_prime(2**31), 8))
    layers: str = "linear 16 8; relu; linear 8 2"
    epochs: int = 5
    batch_size: int = 20
    lr_shift: int = 5
    dropout: float = 0.0
    seed: int = 0
    data: dict = field(default_factory=lambda: {"synthetic": "200 16"})
    offline_source: str = "dealer"
    store_dir: str | None = None
    demand_overrides: list[str] = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if self.n < 2:
            raise ConfigError("need at least two parties")
        if self.transport not in ("sim", "tcp"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.endpoints and len(self.endpoints) != self.n:
            raise ConfigError("one endpoint per party is required")
        if self.fx.Q != self.tower.Q:
            raise ConfigError("the fixed-point field must be the tower's Q")
        self.tower.validate(self.n, self.fx.kappa)
        self.fx.validate()
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.offline_source not in ("dealer", "store"):
            raise ConfigError(f"unknown offline source {self.offline_source!r}")
        return self


def _int(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return int(sec[key], 0)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} must be an integer") from None


def _endpoints(text: str) -> list[tuple[str, int]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        host, _, port = item.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"bad endpoint {item!r}")
        out.append((host, int(port)))
    return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep Q / N case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    if cp.has_section("parties"):
        sec = cp["parties"]
        cfg.n = _int(sec, "n", cfg.n)
        cfg.transport = sec.get("transport", cfg.transport)
        cfg.endpoints = _endpoints(sec.get("endpoints", ""))
        cfg.latency = float(sec.get("latency", cfg.latency))
    e, f, kappa = cfg.fx.e, cfg.fx.f, cfg.fx.kappa
    if cp.has_section("fixed"):
        sec = cp["fixed"]
        e, f, kappa = _int(sec, "e", e), _int(sec, "f", f), _int(sec, "kappa", kappa)
    Q = cfg.tower.Q
    if cp.has_section("tower"):
        sec = cp["tower"]
        Q = _int(sec, "Q", None)
        if Q is None:
            bits = _int(sec, "Q_bits", None)
            Q = nt.next_prime(2**bits) if bits else cfg.tower.Q
        cfg.tower = TowerSpec(Q, _int(sec, "N"), _int(sec, "N_prime"), _int(sec, "N_bits"),
                              _int(sec, "N_prime_bits"))
    cfg.fx = FxParams(e, f, Q, kappa)
    if cp.has_section("model"):
        cfg.layers = cp["model"].get("layers", cfg.layers)
    if cp.has_section("train"):
        sec = cp["train"]
        cfg.epochs = _int(sec, "epochs", cfg.epochs)
        cfg.batch_size = _int(sec, "batch_size", cfg.batch_size)
        cfg.lr_shift = _int(sec, "lr_shift", cfg.lr_shift)
        cfg.dropout = float(sec.get("dropout", cfg.dropout))
        cfg.seed = _int(sec, "seed", cfg.seed)
    if cp.has_section("data"):
        cfg.data = dict(cp["data"])
    if cp.has_section("offline"):
        sec = cp["offline"]
        cfg.offline_source = sec.get("source", cfg.offline_source)
        cfg.store_dir = sec.get("store_dir", cfg.store_dir)
        cfg.demand_overrides = [d.strip() for d in sec.get("demand", "").split(",") if d.strip()]
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    base = Path(path).resolve().parent
    for key in ("images", "labels"):
        if key in cfg.data and not Path(cfg.data[key]).is_absolute():
            cfg.data[key] = str(base / cfg.data[key])
    return cfg
