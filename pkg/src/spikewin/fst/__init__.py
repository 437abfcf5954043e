"""Minimal weighted finite-state transducer toolkit (tropical semiring)."""

from . import semiring
from .core import EPSILON, Arc, SymbolTable, Wfst, linear_fst
from .io import FstFormatError, read_symbols, read_text, write_symbols, write_text
from .ops import (
    FROM_START,
    TO_FINAL,
    ContractError,
    DeterminizationOverflow,
    FstError,
    arc_sort,
    compose,
    connect,
    decode_labels,
    determinize,
    encode_labels,
    invert,
    is_deterministic,
    minimize,
    project,
    relabel,
    shortest_distance,
    shortest_path,
    weight_push,
)

__all__ = [
    "EPSILON", "Arc", "SymbolTable", "Wfst", "linear_fst", "semiring",
    "FstFormatError", "read_symbols", "read_text", "write_symbols", "write_text",
    "FROM_START", "TO_FINAL", "ContractError", "DeterminizationOverflow", "FstError",
    "arc_sort", "compose", "connect", "decode_labels", "determinize", "encode_labels",
    "invert", "is_deterministic", "minimize", "project", "relabel",
    "shortest_distance", "shortest_path", "weight_push",
]
