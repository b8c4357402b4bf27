"""Invertible r x r matrices over F_{p^a} with a canonical byte encoding.

Entries are stored as a flat row-major tuple of field codes.  The canonical
encoding is row-major entries, each entry spelled as its `a` base-p digits,
little-endian, one byte per digit; ``key()`` packs the same digit string into
a single integer, which is what sets and the bulk kernels use for identity.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

from .errors import ContextError, DomainError, SingularError
from .field import FieldCtx, FieldElement


class GroupElement:
    """An invertible matrix over one field context."""

    __slots__ = ("ctx", "r", "codes", "_hash")

    def __init__(self, ctx: FieldCtx, r: int, codes: Sequence[int], check: bool = True):
        self.ctx = ctx
        self.r = r
        self.codes = tuple(int(c) for c in codes)
        self._hash = None
        if len(self.codes) != r * r:
            raise ContextError("entry tuple has wrong length")
        if check and _det(ctx, r, self.codes) == 0:
            raise SingularError("matrix is singular")

    # -- constructors --------------------------------------------------------
    @classmethod
    def identity(cls, ctx: FieldCtx, r: int) -> "GroupElement":
        codes = [0] * (r * r)
        for i in range(r):
            codes[i * r + i] = 1
        return cls(ctx, r, codes, check=False)

    @classmethod
    def from_rows(cls, ctx: FieldCtx, rows: Sequence[Sequence]) -> "GroupElement":
        r = len(rows)
        codes: List[int] = []
        for row in rows:
            if len(row) != r:
                raise ContextError("matrix is not square")
            for e in row:
                codes.append(_entry_code(ctx, e))
        return cls(ctx, r, codes)

    @classmethod
    def diagonal(cls, ctx: FieldCtx, entries: Sequence[int]) -> "GroupElement":
        r = len(entries)
        codes = [0] * (r * r)
        for i, e in enumerate(entries):
            codes[i * r + i] = _entry_code(ctx, e)
        return cls(ctx, r, codes)

    # -- identity / ordering ---------------------------------------------------
    def key(self) -> int:
        """Canonical integer: base-p digit string of the byte encoding."""
        ctx = self.ctx
        out = 0
        for c in reversed(self.codes):
            out = out * ctx.q + c
        return out

    def encode(self) -> bytes:
        """Canonical bytes: row-major entries, base-p digits little-endian."""
        ctx = self.ctx
        digits = bytearray()
        for c in self.codes:
            for _ in range(ctx.a):
                digits.append(c % ctx.p)
                c //= ctx.p
        return bytes(digits)

    @classmethod
    def decode(cls, ctx: FieldCtx, r: int, data: bytes) -> "GroupElement":
        if len(data) != r * r * ctx.a:
            raise ContextError("encoded length does not match r and a")
        codes = []
        for i in range(r * r):
            chunk = data[i * ctx.a : (i + 1) * ctx.a]
            codes.append(ctx.code_of(chunk))
        return cls(ctx, r, codes)

    @classmethod
    def from_key(cls, ctx: FieldCtx, r: int, key: int, check: bool = False) -> "GroupElement":
        codes = []
        for _ in range(r * r):
            codes.append(key % ctx.q)
            key //= ctx.q
        return cls(ctx, r, codes, check=check)

    def __eq__(self, other):
        return (
            isinstance(other, GroupElement)
            and self.r == other.r
            and self.codes == other.codes
            and self.ctx == other.ctx
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.r, self.codes))
        return self._hash

    def __repr__(self):
        rows = [
            "[" + ",".join(str(c) for c in self.codes[i * self.r : (i + 1) * self.r]) + "]"
            for i in range(self.r)
        ]
        return f"Mat({''.join(rows)} over F_{self.ctx.q})"

    # -- entry access -----------------------------------------------------------
    def entry(self, i: int, j: int) -> int:
        return self.codes[i * self.r + j]

    def entry_elem(self, i: int, j: int) -> FieldElement:
        return FieldElement.from_code(self.ctx, self.entry(i, j))

    def rows(self) -> List[Tuple[int, ...]]:
        return [self.codes[i * self.r : (i + 1) * self.r] for i in range(self.r)]

    # -- arithmetic ---------------------------------------------------------------
    def __mul__(self, other: "GroupElement") -> "GroupElement":
        self._check_compatible(other)
        ctx, r = self.ctx, self.r
        a, b = self.codes, other.codes
        out = [0] * (r * r)
        for i in range(r):
            for j in range(r):
                acc = 0
                for k in range(r):
                    acc = ctx.add(acc, ctx.mul(a[i * r + k], b[k * r + j]))
                out[i * r + j] = acc
        return GroupElement(ctx, r, out, check=False)

    def inverse(self) -> "GroupElement":
        codes = _inverse(self.ctx, self.r, self.codes)
        return GroupElement(self.ctx, self.r, codes, check=False)

    def conj(self, by: "GroupElement") -> "GroupElement":
        """by * self * by^-1."""
        return by * self * by.inverse()

    def comm(self, other: "GroupElement") -> "GroupElement":
        """[self, other] = self other self^-1 other^-1."""
        return self * other * self.inverse() * other.inverse()

    def pow(self, e: int) -> "GroupElement":
        base = self if e >= 0 else self.inverse()
        e = abs(e)
        out = GroupElement.identity(self.ctx, self.r)
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    # -- predicates ------------------------------------------------------------------
    def is_identity(self) -> bool:
        return self == GroupElement.identity(self.ctx, self.r)

    def is_upper_triangular(self) -> bool:
        r = self.r
        return all(
            self.codes[i * r + j] == 0 for i in range(r) for j in range(i)
        )

    def is_unitriangular(self) -> bool:
        r = self.r
        return self.is_upper_triangular() and all(
            self.codes[i * r + i] == 1 for i in range(r)
        )

    def is_diagonal(self) -> bool:
        r = self.r
        return all(
            self.codes[i * r + j] == 0 for i in range(r) for j in range(r) if i != j
        )

    def diag_part(self) -> "GroupElement":
        """Diagonal matrix with this element's diagonal entries."""
        return GroupElement.diagonal(
            self.ctx, [self.entry(i, i) for i in range(self.r)]
        )

    def order(self) -> int:
        n, x = 1, self
        ident = GroupElement.identity(self.ctx, self.r)
        while x != ident:
            x = x * self
            n += 1
        return n

    def _check_compatible(self, other: "GroupElement"):
        if self.r != other.r:
            raise ContextError("mixed matrix dimensions")
        self.ctx.check_same(other.ctx)


def _entry_code(ctx: FieldCtx, e) -> int:
    if isinstance(e, FieldElement):
        ctx.check_same(e.ctx)
        return e.code
    if isinstance(e, int):
        if ctx.a == 1:
            return e % ctx.p
        return e % ctx.p  # plain ints mean prime-subfield values
    if isinstance(e, (tuple, list)):
        return ctx.code_of(e)
    raise DomainError(f"cannot interpret entry {e!r}")


def _det(ctx: FieldCtx, r: int, codes: Sequence[int]) -> int:
    mat = [list(codes[i * r : (i + 1) * r]) for i in range(r)]
    det = 1
    for col in range(r):
        piv = next((k for k in range(col, r) if mat[k][col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            det = ctx.neg(det)
        det = ctx.mul(det, mat[col][col])
        inv = ctx.inv(mat[col][col])
        for k in range(col + 1, r):
            if mat[k][col] != 0:
                f = ctx.mul(mat[k][col], inv)
                mat[k] = [ctx.sub(a, ctx.mul(f, b)) for a, b in zip(mat[k], mat[col])]
    return det


def _inverse(ctx: FieldCtx, r: int, codes: Sequence[int]) -> List[int]:
    mat = [list(codes[i * r : (i + 1) * r]) for i in range(r)]
    aug = [[1 if i == j else 0 for j in range(r)] for i in range(r)]
    for col in range(r):
        piv = next((k for k in range(col, r) if mat[k][col] != 0), None)
        if piv is None:
            raise SingularError("matrix is singular")
        mat[col], mat[piv] = mat[piv], mat[col]
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = ctx.inv(mat[col][col])
        mat[col] = [ctx.mul(a, inv) for a in mat[col]]
        aug[col] = [ctx.mul(a, inv) for a in aug[col]]
        for k in range(r):
            if k != col and mat[k][col] != 0:
                f = mat[k][col]
                mat[k] = [ctx.sub(a, ctx.mul(f, b)) for a, b in zip(mat[k], mat[col])]
                aug[k] = [ctx.sub(a, ctx.mul(f, b)) for a, b in zip(aug[k], aug[col])]
    return [aug[i][j] for i in range(r) for j in range(r)]


def matrices_commute(g: GroupElement, h: GroupElement) -> bool:
    return g * h == h * g
