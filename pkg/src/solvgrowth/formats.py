"""Plain-text matrix-set files.

Layout: a header line ``p a r``, a line with the a+1 modulus coefficients
(low degree first), then one matrix per line as r*r whitespace-separated
entries in row-major order.  Each entry is the comma-joined list of its a
coefficients; for a = 1 an entry is a single integer.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Tuple, Union

from .errors import DomainError
from .field import FieldCtx
from .matrix import GroupElement
from .sets import ElementSet


def _entry_str(ctx: FieldCtx, code: int) -> str:
    if ctx.a == 1:
        return str(code)
    return ",".join(str(c) for c in ctx.coeffs_of(code))


def _entry_parse(ctx: FieldCtx, tok: str) -> int:
    parts = tok.split(",")
    if len(parts) != ctx.a:
        raise DomainError(f"entry {tok!r} does not have {ctx.a} coefficients")
    return ctx.code_of([int(x) for x in parts])


def dump_set(S: ElementSet) -> str:
    ctx, r = S.ctx, S.r
    lines = [f"{ctx.p} {ctx.a} {r}", " ".join(str(c) for c in ctx.modulus)]
    for g in S:
        lines.append(" ".join(_entry_str(ctx, c) for c in g.codes))
    return "\n".join(lines) + "\n"


def parse_set(text: str) -> ElementSet:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(rows) < 2:
        raise DomainError("matrix-set file needs a header and a modulus line")
    p, a, r = (int(x) for x in rows[0])
    modulus = tuple(int(x) for x in rows[1])
    if len(modulus) != a + 1:
        raise DomainError("modulus line must carry a+1 coefficients")
    ctx = FieldCtx(p, a, modulus)
    elems: List[GroupElement] = []
    for row in rows[2:]:
        if len(row) != r * r:
            raise DomainError(f"matrix line has {len(row)} entries, expected {r * r}")
        codes = [_entry_parse(ctx, tok) for tok in row]
        elems.append(GroupElement(ctx, r, codes))
    if not elems:
        raise DomainError("matrix-set file carries no matrices")
    return ElementSet.from_elements(elems)


def write_set(path: Union[str, Path], S: ElementSet) -> None:
    Path(path).write_text(dump_set(S))


def read_set(path: Union[str, Path]) -> ElementSet:
    return parse_set(Path(path).read_text())
