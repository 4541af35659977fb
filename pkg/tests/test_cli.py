import json
import os
import re
import signal
import subprocess
import sys
import time

import pytest
import requests

from intentnet.cli import main
from intentnet.fixtures import topo5_document
from intentnet.topo import parse_topology


def test_config_env_var(tmp_path, monkeypatch):
    from intentnet.service import load_config

    config_path = tmp_path / "via-env.json"
    config_path.write_text(json.dumps({"api_port": 9191, "two_factor": {"enabled": True}}))
    monkeypatch.setenv("IBN_CONFIG", str(config_path))
    config = load_config()
    assert config["api_port"] == 9191
    assert config["two_factor"] == {"enabled": True, "code": ""}  # nested merge
    assert config["southbound_port"] == 6653  # defaults intact


def test_topo5_subcommand(capsys):
    assert main(["topo5"]) == 0
    out = capsys.readouterr().out
    topo = parse_topology(out)
    assert len(topo.switches) == 5


def test_oracle_subcommand(tmp_path, capsys):
    topo_path = tmp_path / "t.json"
    topo_path.write_text(topo5_document())
    assert main(["oracle", "least latency", "denver", "new york", "--topology", str(topo_path)]) == 0
    out = capsys.readouterr().out
    assert "s1 -> s2 -> s4 -> s3" in out
    assert "17.0 ms" in out

    assert main(["oracle", "high bandwidth", "denver", "new york", "--topology", str(topo_path)]) == 0
    assert "s1 -> s4 -> s3" in capsys.readouterr().out

    assert main(["oracle", "least latency", "denver", "atlantis", "--topology", str(topo_path)]) == 1


def test_bench_subcommand(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    assert main(["bench", "--trials", "3", "--webhook-trials", "2", "--out", str(out_dir)]) == 0
    printed = capsys.readouterr().out
    assert "median" in printed and "reference" in printed
    assert (out_dir / "bench.csv").exists()
    assert (out_dir / "bench.png").exists()
    rows = (out_dir / "bench.csv").read_text().strip().splitlines()
    assert rows[0] == "kind,label,seconds"
    assert len(rows) > 10


@pytest.fixture()
def served(tmp_path):
    """`serve` and `sim` as real subprocesses, like an operator would run them."""
    topo_path = tmp_path / "topo5.json"
    topo_path.write_text(topo5_document())
    config = {
        "topology": str(topo_path),
        "store": str(tmp_path / "state.db"),
        "api_port": 0,
        "southbound_port": 0,
        "webhook_secret": "cli-secret",
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))

    env = dict(os.environ, PYTHONUNBUFFERED="1")
    serve = subprocess.Popen(
        [sys.executable, "-m", "intentnet.cli", "serve", "--config", str(config_path)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True, env=env,
    )
    api_port = southbound_port = None
    deadline = time.monotonic() + 15
    while time.monotonic() < deadline and (api_port is None or southbound_port is None):
        line = serve.stdout.readline()
        if not line:
            break
        if match := re.search(r"api listening on [\d.]+:(\d+)", line):
            api_port = int(match.group(1))
        if match := re.search(r"southbound listening on [\d.]+:(\d+)", line):
            southbound_port = int(match.group(1))
    assert api_port and southbound_port, "serve did not report its ports"

    sim = subprocess.Popen(
        [
            sys.executable, "-m", "intentnet.cli", "sim",
            "--topology", str(topo_path),
            "--controller", f"127.0.0.1:{southbound_port}",
        ],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True, env=env,
    )
    base = f"http://127.0.0.1:{api_port}"
    yield base
    for proc in (sim, serve):
        proc.send_signal(signal.SIGINT)
    for proc in (sim, serve):
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()


def test_serve_sim_trace_end_to_end(served, capsys):
    base = served
    token = requests.post(
        f"{base}/api/login", json={"username": "admin", "password": "admin"}, timeout=10
    ).json()["token"]
    auth = {"Authorization": f"Bearer {token}"}

    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        doc = requests.get(f"{base}/api/topology", headers=auth, timeout=5).json()
        created = requests.post(
            f"{base}/api/intents",
            json={"intent_type": "least hopcount", "from_city": "denver", "to_city": "new york"},
            headers=auth, timeout=10,
        )
        if created.status_code == 201:
            break
        time.sleep(0.3)  # switches may still be connecting
    assert created.status_code == 201
    assert len(doc["nodes"]) == 8

    rc = main(["trace", "10.1.0.9", "10.3.0.9", "--url", base, "--token", token])
    out = capsys.readouterr().out
    assert rc == 0
    assert "outcome: delivered" in out
    assert out.splitlines()[0].startswith("s1")
