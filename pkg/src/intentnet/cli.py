"""Command-line entry points: serve, sim, utter, trace, oracle, bench, topo5."""

from __future__ import annotations

import argparse
import getpass
import logging
import sys
import threading
import uuid

from . import oracle as oracle_mod
from .fixtures import topo5_document
from .service import Service, load_config
from .switchsim import SwitchFleet
from .topo import parse_topology


def _parse_hostport(text: str, default_port: int) -> tuple[str, int]:
    if ":" in text:
        host, port = text.rsplit(":", 1)
        return host, int(port)
    return text, default_port


def cmd_serve(args) -> int:
    config = load_config(args.config)
    service = Service(config).start()
    print(f"api listening on {config['api_host']}:{service.api_port}")
    print(f"southbound listening on {config['southbound_host']}:{service.southbound_port}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def cmd_sim(args) -> int:
    with open(args.topology, "rb") as fh:
        topology = parse_topology(fh.read())
    host, port = _parse_hostport(args.controller, 6653)
    only = set(args.only.split(",")) if args.only else None
    fleet = SwitchFleet(topology, host, port, only=only, reconnect=True)
    fleet.start()
    print(f"{len(fleet.sims)} switches connecting to {host}:{port} (ctrl-c to stop)")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        fleet.stop()
    return 0


def cmd_utter(args) -> int:
    import requests

    session_id = uuid.uuid4().hex
    url = args.url.rstrip("/") + "/ask/alexa"
    print("transcript REPL; ctrl-d to exit")
    while True:
        try:
            transcript = input("> ")
        except EOFError:
            print()
            return 0
        payload = {"session_id": session_id, "type": "Utterance", "transcript": transcript}
        response = requests.post(url, json=payload, headers={"X-Webhook-Secret": args.secret}, timeout=30)
        if response.status_code != 200:
            print(f"! {response.status_code}: {response.text}")
            continue
        body = response.json()
        print(f"< {body['speech_text']}")
        if body.get("should_end_session"):
            session_id = uuid.uuid4().hex
            print("  (session ended; starting a fresh one)")


def _login(base_url: str, user: str, password: str) -> str:
    import requests

    response = requests.post(
        f"{base_url}/api/login", json={"username": user, "password": password}, timeout=10
    )
    if response.status_code != 200:
        raise SystemExit(f"login failed: {response.status_code} {response.text}")
    return response.json()["token"]


def cmd_trace(args) -> int:
    import requests

    base = args.url.rstrip("/")
    token = args.token or _login(base, args.user, args.password or getpass.getpass())
    response = requests.post(
        f"{base}/api/trace",
        json={"src_ip": args.src_ip, "dst_ip": args.dst_ip},
        headers={"Authorization": f"Bearer {token}"},
        timeout=10,
    )
    if response.status_code != 200:
        print(f"trace failed: {response.status_code} {response.text}", file=sys.stderr)
        return 1
    body = response.json()
    for hop in body["hops"]:
        print(f"{hop['switch']}  in:{hop['in_port']}  out:{hop['out_port']}")
    print(f"outcome: {body['outcome']}")
    return 0 if body["outcome"] == "delivered" else 2


def cmd_oracle(args) -> int:
    with open(args.topology, "rb") as fh:
        topology = parse_topology(fh.read())
    src = topology.endpoint_by_city(args.from_city.lower())
    dst = topology.endpoint_by_city(args.to_city.lower())
    if src is None or dst is None:
        known = ", ".join(topology.cities())
        print(f"unknown city; known cities: {known}", file=sys.stderr)
        return 1
    metric = " ".join(args.intent_type.lower().replace("_", " ").replace("-", " ").split())
    if metric not in oracle_mod.METRICS:
        print(f"intent type must be one of: {', '.join(oracle_mod.METRICS)}", file=sys.stderr)
        return 1
    best = oracle_mod.best_path(
        topology, metric, src.switch, dst.switch, min_bottleneck_mbps=args.demand
    )
    if best is None:
        print("no path satisfies the request", file=sys.stderr)
        return 2
    print(" -> ".join(best.names))
    print(
        f"latency {best.latency_ms:.1f} ms, bottleneck {best.bottleneck_mbps:.0f} mbps, "
        f"{best.hop_count} hops"
    )
    return 0


def cmd_bench(args) -> int:
    from .bench import REFERENCE_PER_DEVICE_S, run_benchmark

    report = run_benchmark(trials=args.trials, webhook_trials=args.webhook_trials, outdir=args.out)
    print(f"flow ops per switch: median {report['flow_median_s'] * 1000:.3f} ms "
          f"(reference {REFERENCE_PER_DEVICE_S * 1000:.1f} ms per device)")
    if report["webhook_median_s"] is not None:
        print(f"webhook turn: median {report['webhook_median_s'] * 1000:.3f} ms")
    print(f"wrote {report['csv']} and {report['figure']}")
    return 0


def cmd_topo5(args) -> int:
    print(topo5_document())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentnet",
        description="Intent-based networking controller with a simulated dataplane.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run controller + API gateway")
    p.add_argument("--config", help="JSON config path (or set IBN_CONFIG)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("sim", help="launch simulated switches from a topology file")
    p.add_argument("--topology", required=True)
    p.add_argument("--controller", default="127.0.0.1:6653")
    p.add_argument("--only", help="comma-separated switch names (default: all)")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("utter", help="interactive transcript REPL against /ask/alexa")
    p.add_argument("--url", default="http://127.0.0.1:8080")
    p.add_argument("--secret", default="dev-secret")
    p.set_defaults(fn=cmd_utter)

    p = sub.add_parser("trace", help="run a packet probe and print the hop list")
    p.add_argument("src_ip")
    p.add_argument("dst_ip")
    p.add_argument("--url", default="http://127.0.0.1:8080")
    p.add_argument("--token")
    p.add_argument("--user", default="admin")
    p.add_argument("--password")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("oracle", help="brute-force best path for cross-checking")
    p.add_argument("intent_type")
    p.add_argument("from_city")
    p.add_argument("to_city")
    p.add_argument("--topology", required=True)
    p.add_argument("--demand", type=float, default=0.0)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("bench", help="latency benchmark; writes CSV + figure")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--webhook-trials", type=int, default=20)
    p.add_argument("--out", default="bench-out")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("topo5", help="print the built-in five-switch demo topology")
    p.set_defaults(fn=cmd_topo5)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
