"""Write permissions for machines: own graph and spawned graphs only."""

from __future__ import annotations

from enum import Enum

from ..store import GraphStore
from ..terms import Uri
from ..vm.state import RvmState, home_graph_of


class Decision(str, Enum):
    ALLOW = "allow"
    DENY = "deny"


ACTIONS = ("read", "write", "delete")


def graph_allowed(home: Uri, target: Uri, action: str, store: GraphStore) -> bool:
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}")
    if action == "read" or target == home:
        return True
    seen = {target}
    g = store.spawned_by(target)
    while g is not None and g not in seen:
        if g == home:
            return True
        seen.add(g)
        g = store.spawned_by(g)
    return False


def check_permission(actor: Uri, target_graph: Uri, action: str, store: GraphStore) -> Decision:
    """Reads always pass; writes and deletes only inside the actor's own graphs."""
    if action == "read":
        return Decision.ALLOW
    home = home_graph_of(store, actor)
    if home is None:
        return Decision.DENY
    return Decision.ALLOW if graph_allowed(home, target_graph, action, store) else Decision.DENY


def sandbox_guard(store: GraphStore):
    """A machine guard enforcing :func:`check_permission` for running states."""

    def guard(state: RvmState, graph: Uri, action: str) -> bool:
        return graph_allowed(state.home_graph, graph, action, store)

    return guard
