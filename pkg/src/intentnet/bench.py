"""Latency benchmarks: per-switch flow operations and webhook turns.

Runs against an in-process loopback deployment of the demo topology and
writes a CSV of raw samples plus a rendered figure next to it.
"""

from __future__ import annotations

import csv
import os
import statistics
import tempfile
import time
import uuid

import requests

from .dataplane import ADD, DELETE
from .engine import IntentType, enumerate_paths, resolve_cities, synthesize_flows
from .fixtures import topo5_document
from .service import Service, load_config
from .switchsim import SwitchFleet

# Published figure for the original hardware testbed, for side-by-side
# reporting: 0.0016 s to create, push, and verify flows on one device.
REFERENCE_PER_DEVICE_S = 0.0016


def flow_timing_samples(controller, topology, path, trials: int = 100) -> list[tuple[str, float]]:
    """Per-switch wall time of synthesize + push + verify, ``trials`` times."""
    samples: list[tuple[str, float]] = []
    cookie_base = 0x5EED << 16
    dpids = path.dpids()
    for trial in range(trials):
        cookie = cookie_base + trial + 1
        for dpid in dpids:
            name = topology.switch_by_dpid(dpid).name
            started = time.perf_counter()
            entries = [e for d, e in synthesize_flows(path, cookie) if d == dpid]
            for entry in entries:
                controller.push_flow(dpid, ADD, entry=entry)
            ok = controller.verify_flows(dpid, cookie, entries)
            elapsed = time.perf_counter() - started
            if not ok:
                raise RuntimeError(f"verify failed on {name} during benchmark")
            samples.append((name, elapsed))
        for dpid in dpids:
            controller.push_flow(dpid, DELETE, cookie=cookie)
    return samples


def webhook_timing_samples(api_url: str, secret: str, trials: int = 20) -> list[tuple[str, float]]:
    """Per-turn latency of the scripted conversation against /ask/alexa."""
    script = [
        "launch vivonet",
        "setup a least latency path from denver to new york",
        "yes",
    ]
    samples = []
    session = requests.Session()
    for trial in range(trials):
        session_id = f"bench-{uuid.uuid4().hex}"
        for turn, transcript in enumerate(script):
            payload = {"session_id": session_id, "type": "Utterance", "transcript": transcript}
            started = time.perf_counter()
            response = session.post(
                f"{api_url}/ask/alexa", json=payload,
                headers={"X-Webhook-Secret": secret}, timeout=10,
            )
            elapsed = time.perf_counter() - started
            response.raise_for_status()
            samples.append((f"turn{turn + 1}", elapsed))
    return samples


def write_report(outdir: str, flow_samples, webhook_samples) -> dict:
    """CSV of raw samples plus a histogram figure; returns the medians."""
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "bench.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "label", "seconds"])
        for label, seconds in flow_samples:
            writer.writerow(["flow_ops_per_switch", label, f"{seconds:.6f}"])
        for label, seconds in webhook_samples:
            writer.writerow(["webhook_turn", label, f"{seconds:.6f}"])

    flow_median = statistics.median(s for _, s in flow_samples)
    webhook_median = statistics.median(s for _, s in webhook_samples) if webhook_samples else None

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].hist([s * 1000 for _, s in flow_samples], bins=30, color="#4878d0")
    axes[0].axvline(flow_median * 1000, color="black", linestyle="--",
                    label=f"median {flow_median * 1000:.2f} ms")
    axes[0].axvline(REFERENCE_PER_DEVICE_S * 1000, color="red", linestyle=":",
                    label=f"reference {REFERENCE_PER_DEVICE_S * 1000:.1f} ms")
    axes[0].set_xlabel("synthesize + push + verify per switch (ms)")
    axes[0].set_ylabel("samples")
    axes[0].legend()
    if webhook_samples:
        axes[1].hist([s * 1000 for _, s in webhook_samples], bins=30, color="#6acc64")
        axes[1].axvline(webhook_median * 1000, color="black", linestyle="--",
                        label=f"median {webhook_median * 1000:.2f} ms")
        axes[1].set_xlabel("webhook turn (ms)")
        axes[1].legend()
    fig.tight_layout()
    png_path = os.path.join(outdir, "bench.png")
    fig.savefig(png_path, dpi=120)
    plt.close(fig)

    return {
        "flow_median_s": flow_median,
        "webhook_median_s": webhook_median,
        "reference_per_device_s": REFERENCE_PER_DEVICE_S,
        "csv": csv_path,
        "figure": png_path,
    }


def run_benchmark(trials: int = 100, webhook_trials: int = 20, outdir: str = "bench-out") -> dict:
    """Self-contained benchmark: loopback service + switches on the demo topology."""
    with tempfile.TemporaryDirectory() as tmp:
        topo_path = os.path.join(tmp, "topo5.json")
        with open(topo_path, "w") as fh:
            fh.write(topo5_document())
        config = load_config()
        config.update(
            {
                "topology": topo_path,
                "store": os.path.join(tmp, "bench.db"),
                "api_port": 0,
                "southbound_port": 0,
                "webhook_secret": "bench-secret",
            }
        )
        service = Service(config).start()
        topology = service.topology
        fleet = SwitchFleet(topology, "127.0.0.1", service.southbound_port)
        fleet.start()
        try:
            deadline = time.monotonic() + 5
            while len(service.controller.ready_dpids()) < len(topology.switches):
                if time.monotonic() > deadline:
                    raise RuntimeError("switches did not connect")
                time.sleep(0.01)
            request_path = _least_latency_path(topology)
            flow_samples = flow_timing_samples(service.controller, topology, request_path, trials)
            api_url = f"http://127.0.0.1:{service.api_port}"
            webhook_samples = webhook_timing_samples(api_url, "bench-secret", webhook_trials)
        finally:
            fleet.stop()
            service.stop()
    report = write_report(outdir, flow_samples, webhook_samples)
    return report


def _least_latency_path(topology):
    from .engine import IntentRequest

    request = IntentRequest(IntentType.LEAST_LATENCY, "denver", "new york")
    ingress, egress = resolve_cities(request, topology)
    paths = enumerate_paths(topology, ingress, egress)
    # Fixed, well-known route through four switches keeps trials comparable.
    by_names = {
        tuple(topology.switch_by_dpid(h.dpid).name for h in p.hops): p for p in paths
    }
    return by_names[("s1", "s2", "s4", "s3")]
