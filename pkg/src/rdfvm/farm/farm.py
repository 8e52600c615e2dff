"""Poll a store for runnable machines, run them, and move them between farms."""

from __future__ import annotations

import enum
import logging
import signal
import socketserver
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from ..nquads import NQuadsSyntaxError, dump_store, load_store, parse_nquads, serialize_nquads
from ..sparql import parse_query, select
from ..store import GraphStore, Quad
from ..terms import RDF_TYPE, RVM_NS, Blank, Uri, bool_literal, string_literal
from ..vm.machine import run
from ..vm.state import MalformedState, RvmState, home_graph_of, load_state
from .config import FarmConfig, parse_address
from .protocol import (
    MigrationEnvelope,
    PeerRejected,
    PeerUnreachable,
    ProtocolError,
    ack,
    err,
    read_envelope,
    send_envelope,
)
from .sandbox import sandbox_guard

log = logging.getLogger(__name__)

POLL_QUERY = """
SELECT ?x
  WHERE {
    ?x <rdf:type> <rvm:RVM> .
    ?x <rvm:needsProcess> "true"^^xsd:boolean }
"""
_POLL = parse_query(POLL_QUERY, curie_brackets=True)
TRUE = bool_literal(True)
FALSE = bool_literal(False)


class Outcome(enum.Enum):
    TERMINAL = "Terminal"
    SUSPENDED = "Suspended"
    FAULTED = "Faulted"


def poll(store: GraphStore) -> list[Uri]:
    """Machines typed rvm:RVM with needsProcess true, in canonical order."""
    return [row["x"] for row in select(store, _POLL) if isinstance(row["x"], Uri)]


def _flag(store: GraphStore, uri: Uri, old, new) -> bool:
    with store.lock:
        g = home_graph_of(store, uri)
        if g is None:
            return False
        return store.compare_and_set(Quad(uri, RVM_NS.needsProcess, old, g), Quad(uri, RVM_NS.needsProcess, new, g))


def claim(store: GraphStore, uri: Uri) -> bool:
    """Atomically flip needsProcess true to false; True iff this caller won."""
    return _flag(store, uri, TRUE, FALSE)


def unclaim(store: GraphStore, uri: Uri) -> bool:
    return _flag(store, uri, FALSE, TRUE)


def _record_fault(store: GraphStore, uri: Uri, message: str) -> None:
    with store.lock:
        graphs = {q.g for q in store.match(uri, RDF_TYPE, RVM_NS.RVM, None)}
        for g in graphs:
            store.apply(
                inserts=[Quad(uri, RVM_NS.fault, string_literal(message), g)],
                deletes=store.match(uri, RVM_NS.fault, None, g),
            )


def apply_quotas(store: GraphStore, home: Uri, limit: Optional[int]) -> None:
    """Bound every graph the machine has spawned, unless already bounded."""
    if limit is None:
        return
    for g in store.spawned_graphs(home):
        if store.quota(g) is None:
            store.set_quota(g, limit)


def execute_worker(store: GraphStore, uri: Uri, config: FarmConfig, guard=True) -> tuple[Outcome, Optional[RvmState]]:
    """Run a claimed machine for one cycle budget under the sandbox."""
    try:
        state = load_state(store, uri)
    except MalformedState as e:
        log.warning("machine %s is malformed: %s", uri, e)
        _record_fault(store, uri, f"MalformedState: {e}")
        return Outcome.FAULTED, None
    apply_quotas(store, state.home_graph, config.graph_quota)
    state = replace(state, cycles_remaining=config.default_cycle_budget)
    g = sandbox_guard(store) if guard is True else guard or None
    state = run(state, store, mode=config.mode, guard=g)
    if state.fault is not None:
        return Outcome.FAULTED, state
    if state.program_location is not None:
        return Outcome.SUSPENDED, state
    return Outcome.TERMINAL, state


# -- migration -----------------------------------------------------------------


def _machines_in(store: GraphStore, graphs: list) -> list:
    out = []
    for g in graphs:
        out.extend(q.s for q in store.match(None, RDF_TYPE, RVM_NS.RVM, g) if isinstance(q.s, Uri))
    return sorted(set(out), key=str)


def envelope_for(store: GraphStore, graph: Uri) -> tuple[MigrationEnvelope, list, list]:
    """Snapshot ``graph`` and its spawned graphs.

    Runnable machines inside are claimed so no local worker starts them
    mid-transfer; the payload still advertises them as runnable.  Returns
    (envelope, snapshot quads, claimed machine URIs).
    """
    with store.lock:
        if not store.count(graph):
            raise LookupError(f"graph {graph} does not exist")
        graphs = [graph] + store.spawned_graphs(graph)
        claimed = [m for m in _machines_in(store, graphs) if claim(store, m)]
        snapshot = [q for g in graphs for q in store.match(g=g)]
    flipped = set()
    for m in claimed:
        for q in snapshot:
            if q.s == m and q.p == RVM_NS.needsProcess:
                flipped.add(q)
    payload_quads = [Quad(q.s, q.p, TRUE, q.g) if q in flipped else q for q in snapshot]
    env = MigrationEnvelope(graph.iri, len(payload_quads), serialize_nquads(payload_quads))
    return env, snapshot, claimed


def migrate_out(store: GraphStore, graph: Uri, peer: str, timeout: float = 5.0) -> int:
    """Send ``graph`` (and graphs it spawned) to ``peer``; delete locally on ACK.

    Returns the number of quads moved.  On rejection or timeout the local
    graphs are left as they were and the error is raised.
    """
    env, snapshot, claimed = envelope_for(store, graph)
    try:
        send_envelope(peer, env, timeout=timeout)
    except (PeerRejected, PeerUnreachable):
        for m in claimed:
            unclaim(store, m)
        raise
    store.apply(deletes=snapshot)
    log.info("migrated %s %d quads to %s", graph.iri, len(snapshot), peer)
    return len(snapshot)


class ReceiveError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def accept_envelope(env: MigrationEnvelope, store: GraphStore, config: FarmConfig) -> list[Quad]:
    """Validate and insert an envelope; raises ReceiveError(code, message)."""
    try:
        root = Uri(env.graph_uri)
    except ValueError:
        raise ReceiveError("parse", f"bad graph IRI {env.graph_uri!r}") from None
    lines = env.lines()
    if len(lines) != env.quad_count:
        raise ReceiveError("parse", f"announced {env.quad_count} quads, got {len(lines)}")
    try:
        quads = parse_nquads(env.payload)
    except NQuadsSyntaxError as e:
        raise ReceiveError("parse", str(e)) from None
    if len(quads) != env.quad_count:
        raise ReceiveError("parse", "payload lines are not all quads")
    parents = {q.g: q.o for q in quads if q.p == RVM_NS.spawnedBy and q.s == q.g}
    graphs = set()
    for q in quads:
        g, seen = q.g, set()
        while g != root and g in parents and g not in seen:
            seen.add(g)
            g = parents[g]
        if g != root:
            raise ReceiveError("parse", f"quad in graph {q.g} outside {root}")
        graphs.add(q.g)
    if config.graph_quota is not None and len(quads) > config.graph_quota:
        raise ReceiveError("quota", f"{len(quads)} quads exceed quota {config.graph_quota}")
    with store.lock:
        for g in sorted(graphs, key=str):
            if store.count(g):
                raise ReceiveError("conflict", f"graph {g} already present")
        for q in quads:
            for t in (q.s, q.o):
                if isinstance(t, Blank) and (store.match(t) or store.match(None, None, t)):
                    raise ReceiveError("conflict", f"blank node _:{t.label} already in use")
        store.apply(inserts=quads)
        for g in graphs:
            if g != root and store.quota(g) is None and config.graph_quota is not None:
                store.set_quota(g, config.graph_quota)
    return quads


def receive_migration(env: MigrationEnvelope, store: GraphStore, config: FarmConfig, persist=None) -> bytes:
    """Handle one envelope and return the reply line (ACK only after persisting)."""
    try:
        quads = accept_envelope(env, store, config)
    except ReceiveError as e:
        log.info("rejected %s: %s", env.graph_uri, e)
        return err(e.code, e.message)
    if persist is not None:
        try:
            persist()
        except OSError as e:
            with store.lock:
                store.apply(deletes=quads)
            return err("conflict", f"could not persist: {e}")
    log.info("received %s %d quads", env.graph_uri, len(quads))
    return ack(env.graph_uri)


# -- the server ----------------------------------------------------------------


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        farm: Farm = self.server.farm  # type: ignore[attr-defined]
        try:
            env = read_envelope(self.rfile)
        except ProtocolError as e:
            self.wfile.write(err("parse", str(e)))
            return
        self.wfile.write(farm.receive(env))


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class Farm:
    """A poll loop, a worker pool, and a migration listener over one store."""

    def __init__(self, config: FarmConfig, store: Optional[GraphStore] = None):
        self.config = config
        if store is None:
            path = config.store_path
            store = load_store(path) if path is not None and Path(path).exists() else GraphStore()
        self.store = store
        self.stop_event = threading.Event()
        self.pool = ThreadPoolExecutor(max_workers=config.max_workers, thread_name_prefix="rvm-worker")
        self.inflight: set = set()
        self._inflight_lock = threading.Lock()
        self._persist_lock = threading.Lock()
        self.server: Optional[_Server] = None
        self.stats = {"executed": 0, "migrated": 0, "received": 0, "faulted": 0}

    # persistence

    def persist(self) -> None:
        if self.config.store_path is None:
            return
        with self._persist_lock:
            dump_store(self.store, self.config.store_path)

    # migration endpoint

    def receive(self, env: MigrationEnvelope) -> bytes:
        reply = receive_migration(env, self.store, self.config, persist=self.persist)
        if reply.startswith(b"ACK"):
            self.stats["received"] += 1
        return reply

    @property
    def address(self) -> Optional[tuple]:
        return self.server.server_address if self.server is not None else None

    def start_listener(self) -> None:
        host, port = parse_address(self.config.listen_address)
        self.server = _Server((host, port), _Handler)
        self.server.farm = self  # type: ignore[attr-defined]
        threading.Thread(target=self.server.serve_forever, name="rvm-listener", daemon=True).start()
        log.info("listening on %s:%d", *self.server.server_address[:2])

    # polling and workers

    def poll_once(self) -> int:
        started = 0
        for uri in poll(self.store):
            with self._inflight_lock:
                if uri in self.inflight or len(self.inflight) >= self.config.max_workers:
                    continue
                if not claim(self.store, uri):
                    continue
                self.inflight.add(uri)
            self.pool.submit(self._work, uri)
            started += 1
        return started

    def _work(self, uri: Uri) -> None:
        try:
            outcome, state = execute_worker(self.store, uri, self.config)
            self.stats["executed"] += 1
            log.info("machine %s: %s", uri.iri, outcome.value)
            if outcome is Outcome.FAULTED:
                self.stats["faulted"] += 1
            self.persist()
            if outcome is Outcome.SUSPENDED and self.config.forward and state is not None:
                self._forward(state.home_graph)
        except Exception:  # a worker must never take the farm down
            log.exception("worker for %s failed", uri)
        finally:
            with self._inflight_lock:
                self.inflight.discard(uri)

    def _forward(self, graph: Uri) -> None:
        peer = self.config.peer_addresses[0]
        try:
            migrate_out(self.store, graph, peer, timeout=self.config.ack_timeout)
            self.stats["migrated"] += 1
            self.persist()
        except (PeerRejected, PeerUnreachable, LookupError) as e:
            log.warning("could not migrate %s to %s: %s", graph.iri, peer, e)

    def serve(self, install_signals: bool = True) -> None:
        """Run until :meth:`stop` or SIGINT/SIGTERM."""
        if install_signals and threading.current_thread() is threading.main_thread():
            for sig in (signal.SIGINT, signal.SIGTERM):
                signal.signal(sig, lambda *_: self.stop())
        if self.server is None:
            self.start_listener()
        interval = self.config.poll_interval_ms / 1000.0
        try:
            while not self.stop_event.is_set():
                self.poll_once()
                self.stop_event.wait(interval)
        finally:
            self.shutdown()

    def stop(self) -> None:
        self.stop_event.set()

    def shutdown(self) -> None:
        if self.server is not None:
            self.server.shutdown()
            self.server.server_close()
        self.pool.shutdown(wait=True)
        self.persist()
        log.info(
            "farm stopped: executed=%d migrated=%d received=%d faulted=%d",
            self.stats["executed"],
            self.stats["migrated"],
            self.stats["received"],
            self.stats["faulted"],
        )
