"""Memoized function results, reified so literal inputs are allowed.

Each entry is a blank node in graph ``rvm:memo`` carrying ``rvm:function``,
``rvm:input`` and ``rvm:output``.
"""

from __future__ import annotations

from typing import Optional

from ..store import GraphStore, Quad
from ..terms import RVM_NS, Uri

MEMO_GRAPH = RVM_NS.memo


class MemoConflict(ValueError):
    def __init__(self, fn, input, old, new):
        super().__init__(f"{fn}({input}) is memoized as {old}, not {new}")
        self.fn, self.input, self.old, self.new = fn, input, old, new


def _entries(store: GraphStore, fn: Uri, input) -> list:
    return [
        q.s
        for q in store.match(None, RVM_NS.input, input, MEMO_GRAPH)
        if store.match(q.s, RVM_NS.function, fn, MEMO_GRAPH)
    ]


def memo_lookup(store: GraphStore, fn: Uri, input) -> Optional[object]:
    with store.lock:
        for node in sorted(_entries(store, fn, input), key=str):
            out = store.value(node, RVM_NS.output, MEMO_GRAPH)
            if out is not None:
                return out
    return None


def memo_record(store: GraphStore, fn: Uri, input, output) -> None:
    """Record ``fn(input) = output``; a repeat is a no-op, a different output conflicts."""
    with store.lock:
        old = memo_lookup(store, fn, input)
        if old is not None:
            if old != output:
                raise MemoConflict(fn, input, old, output)
            return
        node = store.fresh_blank()
        store.add_all(
            [
                Quad(node, RVM_NS.function, fn, MEMO_GRAPH),
                Quad(node, RVM_NS.input, input, MEMO_GRAPH),
                Quad(node, RVM_NS.output, output, MEMO_GRAPH),
            ]
        )
