"""AT&T / OpenFst text format.

Arc lines are ``src dst ilabel olabel [weight]`` and final lines are
``state [weight]``, tab separated; a missing weight means 0 and the source
state of the first line is the start state.
"""

from __future__ import annotations

from .core import SymbolTable, Wfst


class FstFormatError(ValueError):
    pass


def _fmt(w: float) -> str:
    return repr(float(w))


def write_text(fst: Wfst) -> str:
    if fst.is_empty() or (not fst.arcs(fst.start) and fst.start not in fst.finals):
        # nothing leaves the start state: the language is empty
        return ""
    order = [fst.start] + [s for s in fst.states() if s != fst.start]
    lines = []
    for s in order:
        for a in fst.arcs(s):
            fields = [str(s), str(a.nextstate), str(a.ilabel), str(a.olabel)]
            if a.weight != 0.0:
                fields.append(_fmt(a.weight))
            lines.append("\t".join(fields))
        if s in fst.finals:
            f = fst.finals[s]
            lines.append(str(s) if f == 0.0 else f"{s}\t{_fmt(f)}")
    return "\n".join(lines) + "\n"


def read_text(text: str) -> Wfst:
    fst = Wfst()
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        try:
            if len(fields) in (4, 5):
                src, dst, il, ol = (int(x) for x in fields[:4])
                w = float(fields[4]) if len(fields) == 5 else 0.0
                rows.append(("arc", src, dst, il, ol, w))
            elif len(fields) in (1, 2):
                w = float(fields[1]) if len(fields) == 2 else 0.0
                rows.append(("final", int(fields[0]), w))
            else:
                raise ValueError(f"expected 1, 2, 4 or 5 fields, got {len(fields)}")
        except ValueError as e:
            raise FstFormatError(f"line {lineno}: {e}") from None
    if not rows:
        return fst
    max_state = 0
    for r in rows:
        max_state = max(max_state, r[1], r[2] if r[0] == "arc" else 0)
    fst.add_states(max_state + 1)
    fst.set_start(rows[0][1])
    for r in rows:
        if r[0] == "arc":
            _, src, dst, il, ol, w = r
            fst.add_arc(src, il, ol, w, dst)
        else:
            fst.set_final(r[1], r[2])
    return fst


def write_symbols(table: SymbolTable) -> str:
    return "".join(f"{sym}\t{key}\n" for sym, key in table.items())


def read_symbols(text: str) -> SymbolTable:
    table = SymbolTable(eps=None)
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        fields = raw.split()
        if len(fields) != 2:
            raise FstFormatError(f"line {lineno}: expected 'symbol id'")
        try:
            table.add(fields[0], int(fields[1]))
        except ValueError as e:
            raise FstFormatError(f"line {lineno}: {e}") from None
    return table
