"""Composition root: config loading and lifecycle for the whole service
(controller + engine + dialogue + gateway) in one process."""

from __future__ import annotations

import json
import logging
import os
import threading

from .dialogue import DEFAULT_TIMEOUT_S, DialogueManager, InteractionModel
from .engine import IntentEngine
from .gateway import ApiGateway
from .southbound import Controller
from .store import Store
from .topo import Topology, parse_topology

log = logging.getLogger(__name__)

CONFIG_ENV_VAR = "IBN_CONFIG"

DEFAULTS = {
    "api_host": "127.0.0.1",
    "api_port": 8080,
    "southbound_host": "127.0.0.1",
    "southbound_port": 6653,
    "topology": "topo5.json",
    "store": "intentnet.db",
    "users": [{"name": "admin", "password": "admin"}],
    "webhook_secret": "dev-secret",
    "dialogue_timeout_s": DEFAULT_TIMEOUT_S,
    "invocation_name": "vivonet",
    "two_factor": {"enabled": False, "code": ""},
    "tls": {"cert": None, "key": None},
    "ui_dir": None,
    "echo_interval_s": 10.0,
    "token_ttl_s": 12 * 3600,
}


def load_config(path: str | None = None) -> dict:
    """Defaults overlaid with the JSON config file, if one is given
    (explicitly or via the IBN_CONFIG environment variable)."""
    config = json.loads(json.dumps(DEFAULTS))  # deep copy
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        with open(path, encoding="utf-8") as fh:
            loaded = json.load(fh)
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                config[key].update(value)
            else:
                config[key] = value
    return config


class Service:
    """Everything northbound of the switches, wired together."""

    def __init__(self, config: dict):
        self.config = config
        self.topology: Topology | None = None
        self.store: Store | None = None
        self.controller: Controller | None = None
        self.engine: IntentEngine | None = None
        self.dialogue: DialogueManager | None = None
        self.gateway: ApiGateway | None = None
        self.api_port: int | None = None
        self.southbound_port: int | None = None
        self._sweeper_stop = threading.Event()
        self._sweeper: threading.Thread | None = None

    def start(self) -> "Service":
        cfg = self.config
        with open(cfg["topology"], "rb") as fh:
            self.topology = parse_topology(fh.read())
        self.store = Store(cfg["store"])
        self.store.seed_endpoints(self.topology.endpoints)
        for user in cfg["users"]:
            self.store.ensure_user(user["name"], user["password"])

        self.controller = Controller(
            host=cfg["southbound_host"],
            port=cfg["southbound_port"],
            echo_interval=cfg["echo_interval_s"],
        )
        self.southbound_port = self.controller.start()

        self.engine = IntentEngine(self.topology, self.controller, self.store)
        self.dialogue = DialogueManager(
            InteractionModel(invocation=cfg["invocation_name"]),
            self.topology,
            self.engine.execute_intent,
            timeout_s=cfg["dialogue_timeout_s"],
        )
        self.gateway = ApiGateway(
            self.engine,
            self.store,
            self.dialogue,
            self.topology,
            webhook_secret=cfg["webhook_secret"],
            two_factor=cfg["two_factor"],
            ui_dir=cfg["ui_dir"],
            token_ttl_s=cfg["token_ttl_s"],
            tls=cfg["tls"],
        )
        self.api_port = self.gateway.start(cfg["api_host"], cfg["api_port"])

        self._sweeper = threading.Thread(target=self._sweep_loop, name="dialogue-sweeper", daemon=True)
        self._sweeper.start()
        log.info(
            "service up: api %s:%s southbound %s:%s",
            cfg["api_host"], self.api_port, cfg["southbound_host"], self.southbound_port,
        )
        return self

    def _sweep_loop(self) -> None:
        while not self._sweeper_stop.wait(1.0):
            try:
                self.dialogue.expire_sessions()
            except Exception:
                log.exception("session sweep failed")

    def stop(self) -> None:
        self._sweeper_stop.set()
        if self._sweeper is not None:
            self._sweeper.join(timeout=2)
        if self.gateway is not None:
            self.gateway.stop()
        if self.controller is not None:
            self.controller.stop()
        if self.store is not None:
            self.store.close()
