"""Exact dense linear algebra over F_q for the small spaces this package meets.

Vectors are tuples of field codes; matrices are lists of row tuples.
Dimensions never exceed r*r (r <= 5ish), so everything is plain Gaussian
elimination with context-provided scalar arithmetic.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from .field import FieldCtx

Vec = Tuple[int, ...]


def vec_add(u: Vec, v: Vec, ctx: FieldCtx) -> Vec:
    return tuple(ctx.add(a, b) for a, b in zip(u, v))

def vec_sub(u: Vec, v: Vec, ctx: FieldCtx) -> Vec:
    return tuple(ctx.sub(a, b) for a, b in zip(u, v))

def vec_scale(u: Vec, s: int, ctx: FieldCtx) -> Vec:
    return tuple(ctx.mul(a, s) for a in u)

def is_zero_vec(u: Vec) -> bool:
    return all(a == 0 for a in u)


def echelon(vectors: Sequence[Vec], ctx: FieldCtx) -> Tuple[List[Vec], List[int]]:
    """Reduced row echelon basis of the span, plus its pivot columns."""
    basis: List[Vec] = []
    pivots: List[int] = []
    for v in vectors:
        v = _reduce(v, basis, pivots, ctx)
        if is_zero_vec(v):
            continue
        col = next(i for i, a in enumerate(v) if a != 0)
        v = vec_scale(v, ctx.inv(v[col]), ctx)
        # back-substitute into the existing rows
        basis = [
            vec_sub(b, vec_scale(v, b[col], ctx), ctx) if b[col] != 0 else b
            for b in basis
        ]
        pos = next((k for k, c in enumerate(pivots) if c > col), len(pivots))
        basis.insert(pos, v)
        pivots.insert(pos, col)
    return basis, pivots


def _reduce(v: Vec, basis: Sequence[Vec], pivots: Sequence[int], ctx: FieldCtx) -> Vec:
    for b, col in zip(basis, pivots):
        if v[col] != 0:
            v = vec_sub(v, vec_scale(b, v[col], ctx), ctx)
    return v


def in_span(v: Vec, basis: Sequence[Vec], pivots: Sequence[int], ctx: FieldCtx) -> bool:
    return is_zero_vec(_reduce(v, basis, pivots, ctx))


def express(v: Vec, rows: Sequence[Vec], ctx: FieldCtx) -> Optional[Vec]:
    """Coefficients x with sum x_i rows_i == v, or None if v is outside the span."""
    if not rows:
        return () if is_zero_vec(v) else None
    n = len(rows[0])
    m = len(rows)
    # eliminate on the augmented system [rows^T | v]
    aug = [[rows[j][i] for j in range(m)] + [v[i]] for i in range(n)]
    piv_of_col: List[Optional[int]] = [None] * m
    row_i = 0
    for col in range(m):
        pr = next((r for r in range(row_i, n) if aug[r][col] != 0), None)
        if pr is None:
            continue
        aug[row_i], aug[pr] = aug[pr], aug[row_i]
        inv = ctx.inv(aug[row_i][col])
        aug[row_i] = [ctx.mul(a, inv) for a in aug[row_i]]
        for r in range(n):
            if r != row_i and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [ctx.sub(a, ctx.mul(f, b)) for a, b in zip(aug[r], aug[row_i])]
        piv_of_col[col] = row_i
        row_i += 1
    # inconsistent if a zero row has nonzero rhs
    for r in range(row_i, n):
        if aug[r][m] != 0:
            return None
    x = [0] * m
    for col in range(m):
        if piv_of_col[col] is not None:
            x[col] = aug[piv_of_col[col]][m]
    return tuple(x)


def kernel(rows: Sequence[Vec], ncols: int, ctx: FieldCtx) -> List[Vec]:
    """Basis of {x : M x = 0} for the matrix with the given rows."""
    mat = [list(r) for r in rows]
    nrows = len(mat)
    pivot_col_of_row: List[int] = []
    row_i = 0
    for col in range(ncols):
        pr = next((r for r in range(row_i, nrows) if mat[r][col] != 0), None)
        if pr is None:
            continue
        mat[row_i], mat[pr] = mat[pr], mat[row_i]
        inv = ctx.inv(mat[row_i][col])
        mat[row_i] = [ctx.mul(a, inv) for a in mat[row_i]]
        for r in range(nrows):
            if r != row_i and mat[r][col] != 0:
                f = mat[r][col]
                mat[r] = [ctx.sub(a, ctx.mul(f, b)) for a, b in zip(mat[r], mat[row_i])]
        pivot_col_of_row.append(col)
        row_i += 1
    pivot_cols = set(pivot_col_of_row)
    out: List[Vec] = []
    for free in range(ncols):
        if free in pivot_cols:
            continue
        x = [0] * ncols
        x[free] = 1
        for r, pc in enumerate(pivot_col_of_row):
            x[pc] = ctx.neg(mat[r][free])
        out.append(tuple(x))
    return out


def intersect_spans(
    abasis: Sequence[Vec], bbasis: Sequence[Vec], ctx: FieldCtx
) -> List[Vec]:
    """Echelon basis of span(abasis) intersected with span(bbasis)."""
    if not abasis or not bbasis:
        return []
    n = len(abasis[0])
    # solve sum x_i a_i - sum y_j b_j = 0; rows of the system are coordinates
    rows = []
    for i in range(n):
        rows.append(
            tuple(a[i] for a in abasis) + tuple(ctx.neg(b[i]) for b in bbasis)
        )
    ker = kernel(rows, len(abasis) + len(bbasis), ctx)
    vecs = []
    for k in ker:
        v = tuple(0 for _ in range(n))
        for coef, a in zip(k[: len(abasis)], abasis):
            v = vec_add(v, vec_scale(a, coef, ctx), ctx)
        if not is_zero_vec(v):
            vecs.append(v)
    basis, _ = echelon(vecs, ctx)
    return basis
