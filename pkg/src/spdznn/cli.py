"""Command line entry point: ``spdznn <command>``.

Failures exit nonzero and print one JSON object on stderr whose
``error`` field is a machine-readable category (``config-error``,
``format-error``, ``mac-failure``, ``offline-depleted``, ...).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import offline, paillier
from .errors import ConfigError, FormatError, ProtocolAbort
from .jobs import PROTOCOLS, run_protocol
from .material import StoreSource
from .runtime.config import RunConfig, load_config
from .runtime.idx import load_idx_dataset
from .runtime.store import PreprocessingStore
from .training import TrainConfig, parse_layers, separable_dataset, train_session, training_job

EXIT_FAILED, EXIT_CONFIG, EXIT_ABORT = 1, 2, 3


def _fail(category: str, message: str, code: int, **extra) -> None:
    click.echo(json.dumps({"error": category, "message": message, **extra}), err=True)
    sys.exit(code)


def _emit(obj) -> None:
    click.echo(json.dumps(obj, sort_keys=True, default=str))


class _Group(click.Group):
    """Maps library exceptions to categorised exits."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ProtocolAbort as exc:
            _fail(exc.category, str(exc), EXIT_ABORT, frame=exc.frame)
        except (ConfigError, FormatError) as exc:
            _fail(exc.category, str(exc), EXIT_CONFIG)
        except OSError as exc:
            _fail("io-error", str(exc), EXIT_CONFIG)


def _seed_bytes(seed: str) -> bytes:
    try:
        return bytes.fromhex(seed)
    except ValueError:
        return seed.encode()


# ---- shared helpers ---------------------------------------------------------------

def load_data(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Dataset named by the [data] section, shaped for the first layer."""
    data = cfg.data
    if "images" in data:
        X, Y = load_idx_dataset(data["images"], data["labels"])
        limit = int(data.get("limit", len(X)))
        X, Y = X[:limit], Y[:limit]
        first = parse_layers(cfg.layers)[0]
        X = X[:, None] if first.kind == "conv2d" else X.reshape(len(X), -1)
    elif "synthetic" in data:
        try:
            count, features = (int(v) for v in data["synthetic"].split())
        except ValueError:
            raise ConfigError("[data] synthetic must be '<samples> <features>'") from None
        X, Y = separable_dataset(count, features, seed=int(data.get("seed", cfg.seed)))
    else:
        raise ConfigError("[data] needs images/labels or synthetic")
    n_classes = int(data.get("classes", int(Y.max()) + 1))
    return X, Y, n_classes


def train_config(cfg: RunConfig) -> TrainConfig:
    layers = parse_layers(cfg.layers)
    if cfg.dropout > 0:
        # a dropout layer after every hidden ReLU unless the list has its own
        if not any(layer.kind == "dropout" for layer in layers):
            out = []
            for i, layer in enumerate(layers):
                out.append(layer)
                if layer.kind == "relu" and i < len(layers) - 1:
                    out.append(type(layer)("dropout", (cfg.dropout,)))
            layers = out
    return TrainConfig(layers, cfg.epochs, cfg.batch_size, cfg.lr_shift, cfg.seed)


def _store_paths(directory: Path, n: int | None = None) -> list[Path]:
    paths = sorted(directory.glob("party*.store"), key=lambda p: int(p.stem[5:]))
    if not paths:
        raise ConfigError(f"no party*.store files in {directory}")
    if n is not None and len(paths) != n:
        raise ConfigError(f"expected {n} stores in {directory}, found {len(paths)}")
    return paths


def _read_keys(directory: Path, n: int) -> list[tuple[offline.PaillierKey, offline.PaillierKey]]:
    out = []
    for i in range(n):
        base = paillier.read_key_file(directory / f"party{i}.key")
        lift = paillier.read_key_file(directory / f"party{i}.lift.key")
        out.append((offline.PaillierKey(*base), offline.PaillierKey(*lift)))
    return out


# ---- commands ------------------------------------------------------------------------

@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """n-party secure computation: keys, preprocessing, protocols and training."""


@main.command()
@click.option("--parties", "n", type=int, default=3, show_default=True)
@click.option("--bits", type=int, default=2048, show_default=True,
              help="Bit length of the Paillier modulus N.")
@click.option("--lift-bits", type=int, default=0,
              help="Also deal a second key of this size for the lifting modulus N'.")
@click.option("--seed", default="00000001", show_default=True, help="Dealer seed (hex or text).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="keys",
              show_default=True)
def keygen(n, bits, lift_bits, seed, out_dir):
    """Trusted-dealer key ceremony: one key file per party."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes = [("", bits)] + ([(".lift", lift_bits)] if lift_bits else [])
    report = {"parties": n, "files": []}
    for suffix, size in sizes:
        pk, shares = paillier.keygen_dealer(size, n, _seed_bytes(seed) + suffix.encode())
        for i, share in enumerate(shares):
            path = out / f"party{i}{suffix}.key"
            paillier.write_key_file(path, pk, share)
            report["files"].append(str(path))
        probe = paillier.encrypt(pk, 42, 7)
        ok = paillier.decrypt_with_shares(pk, probe, shares) == 42
        report["N" + suffix.replace(".", "_")] = pk.N
        if not ok:
            _fail("keygen-failed", "joint decryption probe failed", EXIT_FAILED)
    _emit(report)


@main.command("offline")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--mode", type=click.Choice(["dealer", "protocol"]), default="dealer",
              show_default=True)
@click.option("--keys", "keys_dir", type=click.Path(file_okay=False),
              help="Key directory (protocol mode).")
@click.option("--demand", "demand_items", multiple=True,
              help="Explicit demand over Q, e.g. triple=10 or bounded:12=4. "
                   "Without it the training job in the config is planned.")
@click.option("--seed", type=int, default=0, show_default=True)
def offline_cmd(config_path, out_dir, mode, keys_dir, demand_items, seed):
    """Plan the demand and write one preprocessing store per party."""
    cfg = load_config(config_path)
    Q = cfg.fx.Q
    items = list(demand_items) or cfg.demand_overrides
    if items:
        demand = offline.parse_demand(items, Q)
    else:
        X, Y, classes = load_data(cfg)
        demand = offline.plan_demand(cfg.n, training_job(X, Y, classes, train_config(cfg), cfg.fx),
                                     mac_modulus=Q, kappa=cfg.fx.kappa, seed=cfg.seed)
    aborts: list = []
    if mode == "dealer":
        stores = offline.dealer_stores(cfg.n, demand, seed=("offline", seed), mac_modulus=Q)
    else:
        if not keys_dir:
            raise ConfigError("protocol mode needs --keys")
        keys = _read_keys(Path(keys_dir), cfg.n)
        stores, aborts = offline.protocol_stores(
            keys, demand, mac_keys=offline.mac_key_shares(cfg.n, Q, seed=("mac", seed)),
            mac_modulus=Q, kappa=cfg.fx.kappa, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, st in enumerate(stores):
        st.save(out / f"party{i}.store")
    _emit({"mode": mode, "stores": cfg.n, "items": stores[0].summary(), "aborts": aborts})


@main.command("run-protocol")
@click.argument("name", type=click.Choice(PROTOCOLS))
@click.option("--toy", is_flag=True, help="Exhaustive oracle at toy moduli.")
@click.option("--transport", type=click.Choice(["sim", "tcp"]), default="sim", show_default=True)
@click.option("--parties", "n", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--splits", type=int, default=10, show_default=True,
              help="Random share splits per input (sha-conv --toy).")
@click.option("--latency", type=float, default=0.0, help="Per-message delay in seconds.")
@click.option("--show-outputs", is_flag=True)
def run_protocol_cmd(name, toy, transport, n, seed, splits, latency, show_outputs):
    """Run one protocol against its plaintext oracle and report counters."""
    report = run_protocol(name, n=n, seed=seed, toy=toy, transport=transport, splits=splits,
                          latency=latency)
    if not show_outputs:
        report.pop("outputs")
    passed = report["checked"] - report["failures"]
    report["summary"] = f"{name} {report['mode']}: {passed}/{report['checked']} passed"
    _emit(report)
    if report["failures"]:
        sys.exit(EXIT_FAILED)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--metrics", "metrics_path", type=click.Path(dir_okay=False),
              default="metrics.jsonl", show_default=True)
@click.option("--transport", type=click.Choice(["sim", "tcp"]), default=None)
@click.option("--store-dir", type=click.Path(file_okay=False), default=None,
              help="Read preprocessing from party*.store files instead of the dealer.")
def train(config_path, metrics_path, transport, store_dir):
    """Secure training job; writes a line-delimited metrics log."""
    cfg = load_config(config_path)
    X, Y, classes = load_data(cfg)
    store_dir = store_dir or (cfg.store_dir if cfg.offline_source == "store" else None)
    sources = mac_keys = None
    if store_dir:
        stores = [PreprocessingStore.load(p) for p in _store_paths(Path(store_dir), cfg.n)]
        if any(st.mac_key is None or st.mac_key[0] != cfg.fx.Q for st in stores):
            raise ConfigError("stores carry no MAC key for this Q")
        sources = [StoreSource(st) for st in stores]
        mac_keys = [st.mac_key[1] for st in stores]
    lines = []

    def log(rec):
        line = {k: rec[k] for k in ("epoch", "loss", "accuracy", "rounds", "bytes", "seconds")
                if k in rec}
        lines.append(json.dumps(line, sort_keys=True))

    session, metrics, _ = train_session(X, Y, classes, train_config(cfg), cfg.fx, n=cfg.n,
                                        seed=cfg.seed, transport=transport or cfg.transport,
                                        sources=sources, mac_keys=mac_keys,
                                        latency=cfg.latency, log=log)
    Path(metrics_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    last = metrics[-1]
    _emit({"epochs": len(metrics), "accuracy": last.get("accuracy"), "rounds": session.rounds,
           "seconds": round(session.seconds, 3), "metrics": str(metrics_path)})


@main.command("verify-store")
@click.option("--dir", "store_dir", type=click.Path(exists=True, file_okay=False), required=True)
def verify_store(store_dir):
    """Reconstruct all parties' stores and re-check every record (test mode)."""
    stores = [PreprocessingStore.load(p) for p in _store_paths(Path(store_dir))]
    report = offline.verify_stores(stores)
    _emit({"ok": report.ok, "checked": dict(report.checked),
           "failures": [list(map(str, f)) for f in report.failures]})
    if not report.ok:
        _fail("store-invalid", f"{len(report.failures)} check(s) failed", EXIT_FAILED)


if __name__ == "__main__":  # pragma: no cover
    main()
