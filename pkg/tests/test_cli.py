"""The spdznn command line."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from spdznn import paillier
from spdznn.cli import main

ROOT = Path(__file__).resolve().parents[1]
TINY = str(ROOT / "configs" / "tiny.cfg")


@pytest.fixture
def cli():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    return invoke


def _error(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


def test_keygen_2048_files_jointly_decrypt(cli, tmp_path):
    res = cli("keygen", "--parties", 3, "--bits", 2048, "--out", tmp_path)
    assert res.exit_code == 0, res.output
    report = json.loads(res.stdout)
    assert len(report["files"]) == 3
    keys = [paillier.read_key_file(tmp_path / f"party{i}.key") for i in range(3)]
    pk = keys[0][0]
    assert pk.N.bit_length() >= 2047 and all(k[0].N == pk.N for k in keys)
    c = paillier.encrypt(pk, 123456789, 99991)
    assert paillier.decrypt_with_shares(pk, c, [k[1] for k in keys]) == 123456789


def test_keygen_is_deterministic_per_seed(cli, tmp_path):
    for d in ("a", "b"):
        assert cli("keygen", "--bits", 64, "--lift-bits", 160, "--seed", "ab",
                   "--out", tmp_path / d).exit_code == 0
    for name in ("party0.key", "party2.lift.key"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_protocol_sha_conv_toy(cli):
    res = cli("run-protocol", "sha-conv", "--toy", "--splits", 2)
    assert res.exit_code == 0
    report = json.loads(res.stdout)
    assert report["summary"] == "sha-conv toy: 70/70 passed"
    assert report["failures"] == 0 and report["counters"]["total"][0] > 0
    assert "outputs" not in report


def test_run_protocol_mul_over_tcp(cli):
    res = cli("run-protocol", "mul", "--transport", "tcp", "--show-outputs")
    report = json.loads(res.stdout)
    assert res.exit_code == 0 and report["failures"] == 0 and report["outputs"]


def test_train_writes_metrics_log(cli, tmp_path):
    log = tmp_path / "metrics.jsonl"
    res = cli("train", "--config", TINY, "--metrics", log)
    assert res.exit_code == 0, res.stderr
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert [r["epoch"] for r in lines] == [1, 2, 3, 4, 5]
    assert set(lines[0]) == {"epoch", "loss", "accuracy", "rounds", "bytes", "seconds"}
    assert json.loads(res.stdout)["accuracy"] >= 0.95


def test_offline_then_verify_store(cli, tmp_path):
    res = cli("offline", "--config", TINY, "--out", tmp_path, "--demand", "triples_Q=10",
              "--demand", "bit=4")
    assert res.exit_code == 0
    assert json.loads(res.stdout)["items"] == {"triple mod 2147483659": 10,
                                               "bit mod 2147483659": 4}
    res = cli("verify-store", "--dir", tmp_path)
    assert res.exit_code == 0 and json.loads(res.stdout)["ok"]


def test_verify_store_flags_tampering(cli, tmp_path):
    cli("offline", "--config", TINY, "--out", tmp_path, "--demand", "triple=2")
    path = tmp_path / "party1.store"
    buf = bytearray(path.read_bytes())
    buf[-1] ^= 1
    path.write_bytes(bytes(buf))
    res = cli("verify-store", "--dir", tmp_path)
    assert res.exit_code == 1
    assert _error(res)["error"] == "store-invalid"


def test_train_from_empty_store_reports_depletion(cli, tmp_path):
    cli("offline", "--config", TINY, "--out", tmp_path, "--demand", "triple=1")
    res = cli("train", "--config", TINY, "--store-dir", tmp_path,
              "--metrics", tmp_path / "m.jsonl")
    assert res.exit_code == 3
    err = _error(res)
    assert err["error"] == "offline-depleted" and err["frame"]


def test_bad_config_exit_code(cli, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[parties]\nn = 1\n")
    res = cli("train", "--config", bad)
    assert res.exit_code == 2 and _error(res)["error"] == "config-error"


def test_truncated_store_exit_code(cli, tmp_path):
    cli("offline", "--config", TINY, "--out", tmp_path, "--demand", "triple=1")
    path = tmp_path / "party0.store"
    path.write_bytes(path.read_bytes()[:-3])
    res = cli("verify-store", "--dir", tmp_path)
    assert res.exit_code == 2
    err = _error(res)
    assert err["error"] == "format-error" and "offset" in err["message"]


def test_missing_store_dir_is_config_error(cli, tmp_path):
    res = cli("verify-store", "--dir", tmp_path)
    assert res.exit_code == 2 and _error(res)["error"] == "config-error"
