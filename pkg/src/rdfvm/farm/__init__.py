"""Compute farms: poll, claim, run and migrate machines."""

from .config import ConfigError, FarmConfig, load_config, parse_address, parse_config
from .farm import (
    POLL_QUERY,
    Farm,
    Outcome,
    ReceiveError,
    accept_envelope,
    apply_quotas,
    claim,
    envelope_for,
    execute_worker,
    migrate_out,
    poll,
    receive_migration,
    unclaim,
)
from .protocol import (
    ERR_CODES,
    MigrationEnvelope,
    PeerRejected,
    PeerUnreachable,
    ProtocolError,
    read_envelope,
    send_envelope,
)
from .sandbox import ACTIONS, Decision, check_permission, graph_allowed, sandbox_guard

__all__ = [
    "ACTIONS",
    "ConfigError",
    "Decision",
    "ERR_CODES",
    "Farm",
    "FarmConfig",
    "MigrationEnvelope",
    "Outcome",
    "POLL_QUERY",
    "PeerRejected",
    "PeerUnreachable",
    "ProtocolError",
    "ReceiveError",
    "accept_envelope",
    "apply_quotas",
    "check_permission",
    "claim",
    "envelope_for",
    "execute_worker",
    "graph_allowed",
    "load_config",
    "migrate_out",
    "parse_address",
    "parse_config",
    "poll",
    "read_envelope",
    "receive_migration",
    "sandbox_guard",
    "send_envelope",
    "unclaim",
]
