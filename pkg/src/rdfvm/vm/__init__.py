"""The RDF virtual machine: state encoding, interpreter and memo table."""

from .machine import (
    DEFAULT_CYCLES,
    MODES,
    CardinalityFault,
    Fault,
    OutOfCycles,
    PermissionDenied,
    QuotaFault,
    StackUnderflow,
    StateFault,
    TypeFault,
    create_machine,
    program_state,
    push_self,
    read_instruction,
    run,
    self_reference,
    step,
    with_fault,
)
from .memo import MEMO_GRAPH, MemoConflict, memo_lookup, memo_record
from .state import (
    Binding,
    Frame,
    MalformedState,
    RvmState,
    canonical,
    discard_state,
    grant,
    load_state,
    state_quads,
    store_state,
    value_set,
)

__all__ = [
    "DEFAULT_CYCLES",
    "MEMO_GRAPH",
    "MODES",
    "Binding",
    "CardinalityFault",
    "Fault",
    "Frame",
    "MalformedState",
    "MemoConflict",
    "OutOfCycles",
    "PermissionDenied",
    "QuotaFault",
    "RvmState",
    "StackUnderflow",
    "StateFault",
    "TypeFault",
    "canonical",
    "create_machine",
    "discard_state",
    "grant",
    "load_state",
    "memo_lookup",
    "memo_record",
    "program_state",
    "push_self",
    "read_instruction",
    "run",
    "self_reference",
    "state_quads",
    "step",
    "store_state",
    "value_set",
    "with_fault",
]
