"""Command-line entry point: compile, instantiate, invoke, run, farm, migrate, query, dump."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__
from .compiler import API_GRAPH, UnknownClass, compile_api, instantiate
from .farm import (
    ConfigError,
    Farm,
    PeerRejected,
    PeerUnreachable,
    claim,
    load_config,
    migrate_out,
    poll,
)
from .neno import NenoError, parse, typecheck
from .nquads import NQuadsSyntaxError, dump_store, load_store, parse_term, serialize_nquads
from .sparql import MalformedQuery, parse_query, select
from .store import GraphStore
from .terms import BUILTIN_PREFIXES, RVM_NS, Uri
from .vm import DEFAULT_CYCLES, MalformedState, create_machine, load_state, run

log = logging.getLogger("rdfvm")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2


class UsageError(Exception):
    """Bad input from the user; reported on stderr with exit code 1."""


def _store(path: Path, must_exist: bool = True) -> GraphStore:
    if not path.exists():
        if must_exist:
            raise UsageError(f"store {path} does not exist")
        return GraphStore()
    try:
        return load_store(path)
    except NQuadsSyntaxError as e:
        raise UsageError(f"{path}: {e}") from None


def _uri(text: str) -> Uri:
    text = text.strip()
    if text.startswith("<") and text.endswith(">"):
        text = text[1:-1]
    try:
        return Uri(text)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _term(text: str):
    try:
        return parse_term(text)
    except (NQuadsSyntaxError, ValueError) as e:
        raise UsageError(f"bad term {text!r}: {e}") from None


# -- subcommands ---------------------------------------------------------------


def cmd_compile(args) -> int:
    try:
        source = Path(args.source).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(str(e)) from None
    try:
        checked = typecheck(parse(source))
    except NenoError as e:
        raise UsageError(f"{args.source}:{e}") from None
    api = compile_api(checked, graph=_uri(args.graph))
    dump_store(api, args.output)
    methods = len(api.match(None, RVM_NS.hasMethod, None, None))
    print(f"compiled {len(checked.classes)} class(es), {methods} method template(s) to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_instantiate(args) -> int:
    store = _store(Path(args.store), must_exist=False)
    api = _store(Path(args.api))
    graph = _uri(args.api_graph)
    if not store.count(graph):
        store.add_all(q for q in api.quads() if q.g == graph)
    try:
        obj = instantiate(store, graph, _uri(args.cls), _uri(args.object) if args.object else None)
    except (UnknownClass, ValueError) as e:
        raise UsageError(str(e)) from None
    dump_store(store, args.store)
    print(obj.graph.iri)
    return EXIT_OK


def cmd_invoke(args) -> int:
    store = _store(Path(args.store))
    terms = [_term(a) for a in args.arg]
    try:
        state = create_machine(
            store,
            _uri(args.object),
            args.method,
            terms,
            home_graph=_uri(args.home) if args.home else None,
            uri=_uri(args.rvm) if args.rvm else None,
            cycles=args.cycles,
        )
    except (LookupError, ValueError) as e:
        raise UsageError(str(e)) from None
    dump_store(store, args.store)
    print(state.uri.iri)
    return EXIT_OK


def cmd_run(args) -> int:
    store = _store(Path(args.store))
    if args.rvm:
        uri = _uri(args.rvm)
        claim(store, uri)
    else:
        uri = next((u for u in poll(store) if claim(store, u)), None)
        if uri is None:
            print("no runnable RVM", file=sys.stderr)
            return EXIT_USAGE
    try:
        state = load_state(store, uri)
    except MalformedState as e:
        raise UsageError(f"{uri.iri}: {e}") from None
    if args.max_cycles is not None:
        state = replace(state, cycles_remaining=args.max_cycles)
    elif state.cycles_remaining <= 0:
        # A suspended machine resumes with a fresh default budget.
        state = replace(state, cycles_remaining=DEFAULT_CYCLES)
    state = run(state, store, mode=args.mode)
    dump_store(store, args.store)
    if state.fault is not None:
        print(f"Faulted\t{state.fault}")
        return EXIT_FAULT
    if state.program_location is not None:
        print(f"Suspended\t{state.uri.iri}")
        return EXIT_OK
    result = state.result or ()
    print("Terminal" + "".join("\t" + str(t) for t in result))
    return EXIT_OK


def cmd_farm(args) -> int:
    try:
        config = load_config(args.config)
    except (OSError, ConfigError) as e:
        raise UsageError(str(e)) from None
    farm = Farm(config)
    farm.start_listener()
    host, port = farm.address[:2]
    # Printed so a parent process can learn an ephemeral port.
    print(f"listening {host}:{port}", flush=True)
    farm.serve()
    return EXIT_OK


def cmd_migrate(args) -> int:
    store = _store(Path(args.store))
    graph = _uri(args.graph)
    if not store.count(graph):
        raise UsageError(f"graph {graph.iri} does not exist")
    try:
        n = migrate_out(store, graph, args.to, timeout=args.timeout)
    finally:
        dump_store(store, args.store)
    print(f"migrated {graph.iri} {n}")
    return EXIT_OK


def _prefixes(items) -> dict:
    out = dict(BUILTIN_PREFIXES)
    for item in items:
        name, sep, iri = item.partition("=")
        if not sep:
            raise UsageError(f"bad --prefix {item!r}, expected name=iri")
        out[name] = iri
    return out


def cmd_query(args) -> int:
    store = _store(Path(args.store))
    try:
        q = parse_query(args.query, prefixes=_prefixes(args.prefix), curie_brackets=True)
    except MalformedQuery as e:
        raise UsageError(str(e)) from None
    rows = select(store, q)
    if q.is_ask:
        print("true" if rows else "false")
        return EXIT_OK
    proj = q.projection()
    for row in rows:
        print("\t".join(str(row[v]) if v in row else "" for v in proj))
    return EXIT_OK


def cmd_dump(args) -> int:
    store = _store(Path(args.store))
    sys.stdout.write(serialize_nquads(store, _uri(args.graph) if args.graph else None))
    return EXIT_OK


# -- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdfvm", description=__doc__)
    p.add_argument("--version", action="version", version=f"rdfvm {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log more (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    c = sub.add_parser("compile", help="compile a Neno file to an API graph")
    c.add_argument("source")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--graph", default=API_GRAPH.iri, help="name of the API graph")
    c.set_defaults(func=cmd_compile)

    c = sub.add_parser("instantiate", help="create an object in its own named graph")
    c.add_argument("--api", required=True)
    c.add_argument("--class", dest="cls", required=True)
    c.add_argument("--store", required=True)
    c.add_argument("--object", help="object URI (minted when omitted)")
    c.add_argument("--api-graph", default=API_GRAPH.iri)
    c.set_defaults(func=cmd_instantiate)

    c = sub.add_parser("invoke", help="create a runnable machine for a method call")
    c.add_argument("--store", required=True)
    c.add_argument("--object", required=True)
    c.add_argument("--method", required=True)
    c.add_argument("--arg", action="append", default=[], help="argument in N-Quads term syntax")
    c.add_argument("--home", help="graph holding the machine (default: the object's graph)")
    c.add_argument("--rvm", help="machine URI (minted when omitted)")
    c.add_argument("--cycles", type=int, default=100_000)
    c.set_defaults(func=cmd_invoke)

    c = sub.add_parser("run", help="run a machine in-process")
    c.add_argument("--store", required=True)
    c.add_argument("--rvm")
    c.add_argument("--mode", choices=("fhat", "r-fhat"), default="r-fhat")
    c.add_argument("--max-cycles", type=int)
    c.set_defaults(func=cmd_run)

    c = sub.add_parser("farm", help="serve a farm until interrupted")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_farm)

    c = sub.add_parser("migrate", help="send a graph to another farm")
    c.add_argument("--store", required=True)
    c.add_argument("--graph", required=True)
    c.add_argument("--to", required=True, metavar="HOST:PORT")
    c.add_argument("--timeout", type=float, default=5.0)
    c.set_defaults(func=cmd_migrate)

    c = sub.add_parser("query", help="evaluate a SELECT or ASK query")
    c.add_argument("--store", required=True)
    c.add_argument("--prefix", action="append", default=[], metavar="NAME=IRI")
    c.add_argument("query")
    c.set_defaults(func=cmd_query)

    c = sub.add_parser("dump", help="print canonical N-Quads")
    c.add_argument("--store", required=True)
    c.add_argument("--graph")
    c.set_defaults(func=cmd_dump)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; usage errors here are 1.
        return EXIT_USAGE if e.code else EXIT_OK
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"rdfvm {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PeerUnreachable, PeerRejected) as e:
        print(f"rdfvm {args.command}: {e}", file=sys.stderr)
        return EXIT_FAULT
    except Exception as e:  # internal fault
        log.debug("internal error", exc_info=True)
        print(f"rdfvm {args.command}: internal error: {e}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
