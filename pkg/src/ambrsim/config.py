"""Simulation configuration and the line-oriented ``key=value`` loader."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

PROTOCOLS = ("ambr", "flood-reactive", "flood-reactive-lr", "proactive")


class ConfigError(ValueError):
    """Invalid configuration input; message names the key and line."""


@dataclass
class SimConfig:
    # arena and radio
    area_width: float = 1300.0
    area_height: float = 1300.0
    n: int = 50
    tx_range: float = 250.0
    bandwidth: float = 5000.0
    data_size: int = 512
    loss_prob: float = 0.0
    propagation_delay: float = 0.0
    ack_timeout: float | None = None  # None -> 2 * airtime + 0.1 per packet

    # mobility
    v_min: float = 1.0
    v_max: float = 10.0
    pause: float = 10.0
    random_pause: bool = False

    # traffic
    sim_time: float = 200.0
    cbr_rate: float = 10.0
    num_flows: int = 10
    traffic_start: float = 10.0  # warm-up: hello sessions settle first
    traffic_start_spread: float = 5.0
    traffic_stop_margin: float = 10.0

    protocol: str = "ambr"

    # AMBR
    monitor_threshold: int = 5
    demote_threshold: int = 1
    dl_max: int = 5
    alive_period: float = 10.0
    piggyback_window: float | None = None  # None -> alive_period
    cache_ttl: float = 30.0
    query_timeout: float = 2.0
    hello_retry: float = 3.0
    hello_max_retries: int = 3
    neighbor_timeout: float | None = None  # None -> tx_range / v_max (never when static)
    queue_timeout: float = 10.0
    unreachable_holddown: float = 5.0
    node_up_spread: float = 1.0
    election_backoff: float = 0.5

    # flood-reactive baseline
    rreq_ttl: int = 35
    route_timeout: float = 10.0
    discovery_timeout: float = 3.0
    rreq_retries: int = 2
    local_repair_ttl: int = 2

    # proactive baseline
    update_period: float = 15.0
    entry_timeout: float = 45.0
    trigger_holdoff: float = 0.1
    min_trigger_interval: float = 1.0
    triggered_updates: bool = True

    broken_link_memory: float = 3.0
    max_hops: int = 64

    seed: int = 1
    replications: int = 1

    @property
    def static(self):
        return self.v_max <= 0.0

    @property
    def neighbor_lifetime(self):
        if self.neighbor_timeout is not None:
            return self.neighbor_timeout
        return self.tx_range / self.v_max if self.v_max > 0 else math.inf

    @property
    def piggyback(self):
        return self.alive_period if self.piggyback_window is None else self.piggyback_window

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        positive = (
            "area_width", "area_height", "n", "tx_range", "bandwidth", "data_size",
            "sim_time", "alive_period", "cache_ttl", "query_timeout", "hello_retry",
            "queue_timeout", "route_timeout", "discovery_timeout",
            "update_period", "entry_timeout", "max_hops",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}")
        nonneg = (
            "v_min", "v_max", "pause", "cbr_rate", "num_flows", "traffic_start",
            "traffic_start_spread", "traffic_stop_margin", "propagation_delay",
            "unreachable_holddown", "node_up_spread", "election_backoff", "trigger_holdoff",
            "min_trigger_interval", "broken_link_memory", "dl_max",
            "hello_max_retries", "rreq_retries", "demote_threshold",
        )
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.v_min > self.v_max:
            raise ConfigError(f"v_max ({self.v_max}) must not be below v_min ({self.v_min})")
        if self.v_max > 0 and self.v_min <= 0:
            # zero-speed legs never arrive; keep a strictly positive floor when moving
            raise ConfigError("v_min must be > 0 when V_max > 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"loss_prob must lie in [0, 1], got {self.loss_prob!r}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.monitor_threshold < 1:
            raise ConfigError("T must be >= 1")
        if self.rreq_ttl < 1 or self.local_repair_ttl < 1:
            raise ConfigError("rreq_ttl and local_repair_ttl must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.ack_timeout is not None and self.ack_timeout <= 0:
            raise ConfigError("ack_timeout must be > 0")
        if self.neighbor_timeout is not None and self.neighbor_timeout <= 0:
            raise ConfigError("neighbor_timeout must be > 0")
        if self.piggyback_window is not None and self.piggyback_window < 0:
            raise ConfigError("piggyback_window must be >= 0")
        return self


# short names used in config files and on the command line
ALIASES = {
    "V_max": "v_max",
    "vmax": "v_max",
    "T": "monitor_threshold",
    "DL_max": "dl_max",
    "p": "pause",
    "r": "tx_range",
    "bw": "bandwidth",
    "width": "area_width",
    "height": "area_height",
}

_FIELDS = {f.name: f for f in fields(SimConfig)}


def _coerce(name, raw):
    f = _FIELDS[name]
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    text = raw.strip()
    if "| None" in typ and text.lower() in ("none", ""):
        return None
    if typ.startswith("bool"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ.startswith("int"):
        value = float(text)
        if value != int(value):
            raise ValueError(f"not an integer: {raw!r}")
        return int(value)
    if typ.startswith("float"):
        return float(text)
    return text


def resolve_key(key):
    name = ALIASES.get(key, key)
    if name not in _FIELDS:
        name = ALIASES.get(key.lower(), key.lower())
    return name if name in _FIELDS else None


def _collect(text, source):
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"{source}:{lineno}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            name = resolve_key(key)
            if name is None:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            try:
                overrides[name] = (_coerce(name, value), key, lineno)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return overrides


def parse_assignments(text, base=None, source="<config>"):
    """Apply ``key=value`` tokens from ``text`` on top of ``base``.

    Tokens are separated by whitespace or newlines; ``#`` starts a comment.
    """
    overrides = _collect(text, source)
    cfg = dataclasses.replace(base or SimConfig(), **{k: v[0] for k, v in overrides.items()})
    try:
        cfg.validate()
    except ConfigError as exc:
        # point at the line of the offending key where we can
        for name, (_, key, lineno) in overrides.items():
            if str(exc).startswith(name + " "):
                raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path=None, overrides=(), base=None):
    """Read a config file (may be None) then apply CLI ``key=value`` overrides."""
    cfg = base or SimConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_assignments(fh.read(), cfg, source=str(path))
    if overrides:
        cfg = parse_assignments("\n".join(overrides), cfg, source="<flags>")
    return cfg.validate()


def explicit_overrides(path=None, overrides=()):
    """Only the keys actually set by a config file and flags, validated, as a dict."""
    cfg = load_config(path, overrides)
    names = set()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            names.update(_collect(fh.read(), str(path)))
    names.update(_collect("\n".join(overrides), "<flags>"))
    return {k: getattr(cfg, k) for k in sorted(names)}
