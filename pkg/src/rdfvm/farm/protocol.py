"""Wire format for moving a machine's graphs between farms.

    MIGRATE <graph-iri> <quad-count>\n
    <quad-count N-Quads lines>
    END\n

answered by ``ACK <graph-iri>\n`` or ``ERR <code> <message>\n``.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass

from .config import parse_address

ERR_CODES = ("quota", "parse", "conflict")
MAX_LINE = 1 << 20


class ProtocolError(Exception):
    pass


class PeerUnreachable(ConnectionError):
    pass


class PeerRejected(Exception):
    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


@dataclass
class MigrationEnvelope:
    graph_uri: str
    quad_count: int
    payload: str  # N-Quads, one quad per line

    def lines(self) -> list[str]:
        return [l for l in self.payload.split("\n") if l.strip()]

    def encode(self) -> bytes:
        body = "".join(l + "\n" for l in self.lines())
        return f"MIGRATE {self.graph_uri} {self.quad_count}\n{body}END\n".encode("utf-8")


def read_envelope(rfile) -> MigrationEnvelope:
    """Read one envelope from a binary file-like object."""
    head = rfile.readline(MAX_LINE).decode("utf-8", "replace").rstrip("\r\n")
    parts = head.split(" ")
    if len(parts) != 3 or parts[0] != "MIGRATE" or not parts[2].isdigit():
        raise ProtocolError(f"bad header {head!r}")
    graph, count = parts[1], int(parts[2])
    lines = []
    while True:
        raw = rfile.readline(MAX_LINE)
        if not raw:
            raise ProtocolError("connection closed before END")
        line = raw.decode("utf-8", "replace").rstrip("\r\n")
        if line == "END":
            break
        lines.append(line)
        if len(lines) > count + 1:
            raise ProtocolError("more lines than announced")
    return MigrationEnvelope(graph, count, "\n".join(lines))


def ack(graph_uri: str) -> bytes:
    return f"ACK {graph_uri}\n".encode("utf-8")


def err(code: str, message: str) -> bytes:
    message = " ".join(str(message).split())
    return f"ERR {code} {message}\n".encode("utf-8")


def send_envelope(address: str, envelope: MigrationEnvelope, timeout: float = 5.0) -> None:
    """Deliver ``envelope``; returns on ACK, raises PeerRejected or PeerUnreachable."""
    host, port = parse_address(address)
    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(envelope.encode())
            reply = sock.makefile("rb").readline(MAX_LINE).decode("utf-8", "replace").rstrip("\r\n")
    except OSError as e:
        raise PeerUnreachable(f"{address}: {e}") from None
    if reply == f"ACK {envelope.graph_uri}":
        return
    if reply.startswith("ERR "):
        _, code, *rest = reply.split(" ", 2)
        raise PeerRejected(code, rest[0] if rest else "")
    raise PeerUnreachable(f"{address}: unexpected reply {reply!r}")
