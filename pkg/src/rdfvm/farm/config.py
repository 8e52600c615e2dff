"""Farm configuration read from ``key=value`` lines."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

_INT_KEYS = {"poll_ms": "poll_interval_ms", "max_workers": "max_workers", "cycle_budget": "default_cycle_budget", "graph_quota": "graph_quota"}
_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


class ConfigError(ValueError):
    pass


@dataclass
class FarmConfig:
    store_path: Optional[Path] = None
    listen_address: str = "127.0.0.1:0"
    peer_addresses: list = field(default_factory=list)
    poll_interval_ms: int = 100
    max_workers: int = 2
    default_cycle_budget: int = 10_000
    graph_quota: int = 100_000
    # Hand suspended machines to the first peer instead of resuming them here.
    forward: bool = False
    mode: str = "r-fhat"
    ack_timeout: float = 5.0

    def __post_init__(self):
        if self.max_workers < 1:
            raise ConfigError("max_workers must be at least 1")
        if self.poll_interval_ms < 1:
            raise ConfigError("poll_ms must be at least 1")
        if self.default_cycle_budget < 1:
            raise ConfigError("cycle_budget must be at least 1")
        if self.graph_quota < 0:
            raise ConfigError("graph_quota must not be negative")
        if self.mode not in ("fhat", "r-fhat"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.forward and not self.peer_addresses:
            raise ConfigError("forward needs at least one peer")
        for addr in [self.listen_address, *self.peer_addresses]:
            parse_address(addr)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.strip().rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ConfigError(f"bad address {text!r}, expected host:port")
    return host, int(port)


def parse_config(text: str, base: Optional[Path] = None) -> FarmConfig:
    kwargs: dict = {"peer_addresses": []}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key in _INT_KEYS:
            try:
                kwargs[_INT_KEYS[key]] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from None
        elif key == "listen":
            kwargs["listen_address"] = value
        elif key == "peer":
            kwargs["peer_addresses"].extend(v.strip() for v in value.split(",") if v.strip())
        elif key == "store":
            path = Path(value)
            kwargs["store_path"] = path if path.is_absolute() or base is None else base / path
        elif key == "forward":
            if value.lower() not in _BOOL:
                raise ConfigError(f"line {lineno}: forward must be true or false")
            kwargs["forward"] = _BOOL[value.lower()]
        elif key == "mode":
            kwargs["mode"] = value
        elif key == "ack_timeout":
            kwargs["ack_timeout"] = float(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return FarmConfig(**kwargs)


def load_config(path) -> FarmConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base=path.parent)
