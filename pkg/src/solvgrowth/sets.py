"""Deduplicated matrix sets and the vectorized bulk kernel behind them.

Everything set-shaped in this package is an ``ElementSet``: an immutable
collection of invertible matrices over one context, identified by canonical
integer keys.  Bulk operations (closure, product sets, pairwise products)
run on numpy arrays of entry codes using the context's q x q lookup tables;
when q^(r*r) fits in int64 the keys are packed on the numpy side too.
"""

from __future__ import annotations

import os
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, ContextError
from .field import FieldCtx
from .matrix import GroupElement

DEFAULT_CAP = 1 << 22


def default_cap() -> int:
    env = os.environ.get("SOLVGROWTH_CAP")
    return int(env) if env else DEFAULT_CAP


def _fits_int64(ctx: FieldCtx, r: int) -> bool:
    return ctx.q ** (r * r) < (1 << 63)


def _qpowers(ctx: FieldCtx, r: int) -> np.ndarray:
    return (ctx.q ** np.arange(r * r, dtype=object)).astype(np.int64)


def array_to_keys(ctx: FieldCtx, r: int, arr: np.ndarray) -> List[int]:
    """Flat entry array (N, r, r) -> canonical integer keys."""
    flat = arr.reshape(-1, r * r)
    if _fits_int64(ctx, r):
        return (flat @ _qpowers(ctx, r)).tolist()
    out = []
    q = ctx.q
    for row in flat.tolist():
        k = 0
        for c in reversed(row):
            k = k * q + c
        out.append(k)
    return out


def keys_to_array(ctx: FieldCtx, r: int, keys: Sequence[int]) -> np.ndarray:
    """Canonical keys -> entry array (N, r, r)."""
    n = len(keys)
    if _fits_int64(ctx, r):
        ks = np.asarray(keys, dtype=np.int64)
        cols = [(ks // int(ctx.q**i)) % ctx.q for i in range(r * r)]
        return np.stack(cols, axis=1).reshape(n, r, r)
    out = np.empty((n, r * r), dtype=np.int64)
    q = ctx.q
    for i, k in enumerate(keys):
        for j in range(r * r):
            out[i, j] = k % q
            k //= q
    return out.reshape(n, r, r)


def mul_batch(ctx: FieldCtx, batch: np.ndarray, g: np.ndarray, left: bool = False) -> np.ndarray:
    """batch @ g (or g @ batch when left=True) over F_q, elementwise by tables."""
    add, mul = ctx.tables()
    r = g.shape[0]
    if left:
        # C[n,i,j] = sum_k g[i,k] * batch[n,k,j]
        acc = mul[g[:, 0][None, :, None], batch[:, 0, :][:, None, :]]
        for k in range(1, r):
            acc = add[acc, mul[g[:, k][None, :, None], batch[:, k, :][:, None, :]]]
        return acc
    acc = mul[batch[:, :, 0][:, :, None], g[0, :][None, None, :]]
    for k in range(1, r):
        acc = add[acc, mul[batch[:, :, k][:, :, None], g[k, :][None, None, :]]]
    return acc


def elem_to_array(g: GroupElement) -> np.ndarray:
    return np.asarray(g.codes, dtype=np.int64).reshape(g.r, g.r)


class ElementSet:
    """Immutable deduplicated set of matrices over one (ctx, r)."""

    __slots__ = ("ctx", "r", "keys", "_gens", "_sorted")

    def __init__(self, ctx: FieldCtx, r: int, keys: Iterable[int], gens: Optional[Sequence[GroupElement]] = None):
        self.ctx = ctx
        self.r = r
        self.keys = frozenset(keys)
        self._gens = tuple(gens) if gens is not None else None
        self._sorted: Optional[List[int]] = None

    # -- constructors --------------------------------------------------------
    @classmethod
    def from_elements(cls, elems: Iterable[GroupElement], gens=None) -> "ElementSet":
        elems = list(elems)
        if not elems:
            raise ContextError("cannot infer context from an empty collection")
        ctx, r = elems[0].ctx, elems[0].r
        for e in elems:
            if e.r != r:
                raise ContextError("mixed matrix dimensions in one set")
            ctx.check_same(e.ctx)
        return cls(ctx, r, (e.key() for e in elems), gens=gens)

    @classmethod
    def single(cls, g: GroupElement) -> "ElementSet":
        return cls(g.ctx, g.r, [g.key()], gens=[g])

    @classmethod
    def identity_set(cls, ctx: FieldCtx, r: int) -> "ElementSet":
        ident = GroupElement.identity(ctx, r)
        return cls(ctx, r, [ident.key()], gens=[ident])

    # -- basics ----------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, g) -> bool:
        if isinstance(g, GroupElement):
            return g.key() in self.keys
        return g in self.keys

    def sorted_keys(self) -> List[int]:
        if self._sorted is None:
            self._sorted = sorted(self.keys)
        return self._sorted

    def __iter__(self):
        ctx, r = self.ctx, self.r
        for k in self.sorted_keys():
            yield GroupElement.from_key(ctx, r, k)

    def elements(self) -> List[GroupElement]:
        return list(self)

    def min_element(self) -> GroupElement:
        return GroupElement.from_key(self.ctx, self.r, self.sorted_keys()[0])

    def to_entry_array(self) -> np.ndarray:
        return keys_to_array(self.ctx, self.r, self.sorted_keys())

    @property
    def gens(self) -> Optional[Tuple[GroupElement, ...]]:
        return self._gens

    def with_gens(self, gens: Sequence[GroupElement]) -> "ElementSet":
        return ElementSet(self.ctx, self.r, self.keys, gens=gens)

    def _check_peer(self, other: "ElementSet"):
        if self.r != other.r:
            raise ContextError("mixed matrix dimensions")
        self.ctx.check_same(other.ctx)

    # -- set algebra --------------------------------------------------------------
    def union(self, other: "ElementSet") -> "ElementSet":
        self._check_peer(other)
        return ElementSet(self.ctx, self.r, self.keys | other.keys)

    def intersect(self, other: "ElementSet") -> "ElementSet":
        self._check_peer(other)
        return ElementSet(self.ctx, self.r, self.keys & other.keys)

    def difference(self, other: "ElementSet") -> "ElementSet":
        self._check_peer(other)
        return ElementSet(self.ctx, self.r, self.keys - other.keys)

    def issubset(self, other: "ElementSet") -> bool:
        self._check_peer(other)
        return self.keys <= other.keys

    def equals(self, other: "ElementSet") -> bool:
        self._check_peer(other)
        return self.keys == other.keys

    def __eq__(self, other):
        return (
            isinstance(other, ElementSet)
            and self.r == other.r
            and self.ctx == other.ctx
            and self.keys == other.keys
        )

    def __hash__(self):
        return hash((self.r, self.keys))

    def __repr__(self):
        return f"ElementSet(|S|={len(self.keys)}, r={self.r}, F_{self.ctx.q})"

    # -- elementwise maps ------------------------------------------------------------
    def inverses(self) -> "ElementSet":
        return ElementSet(
            self.ctx, self.r, (g.inverse().key() for g in self)
        )

    def conjugate_by(self, g: GroupElement) -> "ElementSet":
        arr = self.to_entry_array()
        arr = mul_batch(self.ctx, arr, elem_to_array(g), left=True)
        arr = mul_batch(self.ctx, arr, elem_to_array(g.inverse()))
        return ElementSet(self.ctx, self.r, array_to_keys(self.ctx, self.r, arr))

    def translate(self, g: GroupElement, left: bool = True) -> "ElementSet":
        arr = mul_batch(self.ctx, self.to_entry_array(), elem_to_array(g), left=left)
        return ElementSet(self.ctx, self.r, array_to_keys(self.ctx, self.r, arr))


def pairwise_product(A: ElementSet, B: ElementSet) -> ElementSet:
    """Exact ordered product set A * B."""
    A._check_peer(B)
    ctx, r = A.ctx, A.r
    keys = set()
    if len(A) >= len(B):
        arr = A.to_entry_array()
        for b in B:
            keys.update(array_to_keys(ctx, r, mul_batch(ctx, arr, elem_to_array(b))))
    else:
        arr = B.to_entry_array()
        for a in A:
            keys.update(array_to_keys(ctx, r, mul_batch(ctx, arr, elem_to_array(a), left=True)))
    return ElementSet(ctx, r, keys)


def bfs_closure(
    ctx: FieldCtx,
    r: int,
    seeds: Sequence[GroupElement],
    steps: Sequence[GroupElement],
    cap: Optional[int] = None,
    max_depth: Optional[int] = None,
    conjugators: Sequence[GroupElement] = (),
) -> Dict[int, int]:
    """Breadth-first closure; returns {key: word length}.

    Seeds sit at depth 0.  Each level right-multiplies the frontier by every
    step element, and (when conjugators are given) also conjugates it by each
    of them; conjugation does not increase recorded depth, which is what
    normal-closure computations want.  Raises ``CapacityError`` past ``cap``.
    """
    cap = cap if cap is not None else default_cap()
    depths: Dict[int, int] = {}
    frontier_keys: List[int] = []
    for s in seeds:
        k = s.key()
        if k not in depths:
            depths[k] = 0
            frontier_keys.append(k)
    step_arrays = [elem_to_array(g) for g in steps]
    conj_pairs = [(elem_to_array(c), elem_to_array(c.inverse())) for c in conjugators]
    depth = 0
    while frontier_keys:
        # conjugation closure at the current depth (depth does not grow)
        if conj_pairs:
            pending = frontier_keys
            while pending:
                arr = keys_to_array(ctx, r, pending)
                new_keys: List[int] = []
                for cmat, cinv in conj_pairs:
                    out = mul_batch(ctx, mul_batch(ctx, arr, cmat, left=True), cinv)
                    for k in array_to_keys(ctx, r, out):
                        if k not in depths:
                            depths[k] = depth
                            new_keys.append(k)
                frontier_keys.extend(new_keys)
                pending = new_keys
                if len(depths) > cap:
                    raise CapacityError("closure exceeded cap", len(depths))
        if max_depth is not None and depth >= max_depth:
            break
        arr = keys_to_array(ctx, r, frontier_keys)
        next_keys: List[int] = []
        for gmat in step_arrays:
            out = mul_batch(ctx, arr, gmat)
            for k in array_to_keys(ctx, r, out):
                if k not in depths:
                    depths[k] = depth + 1
                    next_keys.append(k)
        if len(depths) > cap:
            raise CapacityError("closure exceeded cap", len(depths))
        frontier_keys = next_keys
        depth += 1
    return depths


def symmetrized(A: ElementSet, with_identity: bool = True) -> List[GroupElement]:
    """A cup A^-1 (cup {1}) as a deduplicated element list."""
    out = {}
    for g in A:
        out[g.key()] = g
        gi = g.inverse()
        out[gi.key()] = gi
    if with_identity:
        ident = GroupElement.identity(A.ctx, A.r)
        out[ident.key()] = ident
    return [out[k] for k in sorted(out)]


def product_set_depths(A: ElementSet, k: Optional[int] = None, cap: Optional[int] = None) -> Dict[int, int]:
    """Distances from the identity in the Cayley graph of A cup A^-1.

    The ball of radius k is exactly A_k (products of k factors drawn from
    A cup A^-1 cup {1}).  k=None runs to stabilization, i.e. <A>.
    """
    gens = [g for g in symmetrized(A, with_identity=False)]
    ident = GroupElement.identity(A.ctx, A.r)
    return bfs_closure(A.ctx, A.r, [ident], gens, cap=cap, max_depth=k)


def product_set(A: ElementSet, k: int, cap: Optional[int] = None) -> ElementSet:
    """A_k = {g_1 ... g_k : g_i in A cup A^-1 cup {1}}."""
    if k < 1:
        raise ContextError("k must be >= 1")
    depths = product_set_depths(A, k, cap=cap)
    return ElementSet(A.ctx, A.r, depths.keys())
