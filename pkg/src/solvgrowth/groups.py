"""Finite-group operations on matrix sets: closures, series, centralizers,
quotients, and the generic helpers quotient/synthetic groups share."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ClosureError, ContextError, NormalityError
from .field import FieldCtx
from .matrix import GroupElement
from .sets import (
    ElementSet,
    array_to_keys,
    bfs_closure,
    elem_to_array,
    keys_to_array,
    mul_batch,
    symmetrized,
)


def group_closure(generators, cap: Optional[int] = None) -> ElementSet:
    """<generators> as an explicit set, by breadth-first closure."""
    if isinstance(generators, ElementSet):
        gens = generators.elements()
        ctx, r = generators.ctx, generators.r
    else:
        gens = list(generators)
        if not gens:
            raise ClosureError("empty generator collection")
        ctx, r = gens[0].ctx, gens[0].r
    steps = symmetrized(ElementSet.from_elements(gens), with_identity=False)
    ident = GroupElement.identity(ctx, r)
    depths = bfs_closure(ctx, r, [ident], steps, cap=cap)
    return ElementSet(ctx, r, depths.keys(), gens=gens)


def greedy_generators(S: ElementSet, cap: Optional[int] = None) -> List[GroupElement]:
    """Small generating list for a subgroup, chosen in canonical order."""
    if S.gens is not None:
        return list(S.gens)
    gens: List[GroupElement] = []
    have = {GroupElement.identity(S.ctx, S.r).key()}
    for g in S:
        if g.key() not in have:
            gens.append(g)
            have = set(
                bfs_closure(
                    S.ctx,
                    S.r,
                    [GroupElement.identity(S.ctx, S.r)],
                    symmetrized(ElementSet.from_elements(gens), with_identity=False),
                    cap=cap,
                ).keys()
            )
    return gens


def as_group(S: ElementSet, cap: Optional[int] = None) -> ElementSet:
    """Verify S is a subgroup; returns S carrying a generating set."""
    gens = greedy_generators(S, cap=cap)
    if not gens:
        ident = ElementSet.identity_set(S.ctx, S.r)
        if not S.equals(ident):
            raise ClosureError("set without generators is not the trivial group")
        return ident.with_gens([])
    closed = group_closure(gens, cap=cap)
    if not closed.equals(S):
        raise ClosureError(
            f"set of size {len(S)} is not closed (closure has {len(closed)})"
        )
    return S.with_gens(gens)


def normal_closure(
    seeds: Sequence[GroupElement],
    conjugators: Sequence[GroupElement],
    cap: Optional[int] = None,
) -> ElementSet:
    """<seeds>^H where H = <conjugators>."""
    if not seeds:
        raise ClosureError("empty seed collection")
    ctx, r = seeds[0].ctx, seeds[0].r
    ident = GroupElement.identity(ctx, r)
    steps = symmetrized(ElementSet.from_elements(seeds), with_identity=False)
    conj = symmetrized(
        ElementSet.from_elements(list(conjugators) or [ident]), with_identity=False
    )
    depths = bfs_closure(ctx, r, [ident], steps, cap=cap, conjugators=conj)
    return ElementSet(ctx, r, depths.keys())


def lower_central_series(G: ElementSet, cap: Optional[int] = None) -> List[ElementSet]:
    """G = G^0 >= G^1 >= ... with G^(i+1) = [G, G^i], until stabilization.

    The last entry is repeated once when the series stabilizes at a
    nontrivial term; a trivial tail is listed exactly once.
    """
    gens_G = greedy_generators(G, cap=cap)
    series = [G.with_gens(gens_G)]
    # normal generators of the current term
    norm_gens = gens_G
    ident = GroupElement.identity(G.ctx, G.r)
    while True:
        comms = [g.comm(y) for g in gens_G for y in norm_gens]
        comms = [c for c in comms if not c.is_identity()] or [ident]
        term = normal_closure(comms, gens_G, cap=cap)
        prev = series[-1]
        if term.equals(prev):
            if len(prev) != 1:
                series.append(term)
            return series
        series.append(term)
        if len(term) == 1:
            return series
        norm_gens = comms


def derived_series(G: ElementSet, cap: Optional[int] = None) -> List[ElementSet]:
    """G >= [G,G] >= ... until trivial or stabilization."""
    gens = greedy_generators(G, cap=cap)
    series = [G.with_gens(gens)]
    while True:
        comms = [g.comm(h) for g in gens for h in gens]
        comms = [c for c in comms if not c.is_identity()]
        if not comms:
            term = ElementSet.identity_set(G.ctx, G.r)
        else:
            term = normal_closure(comms, gens, cap=cap)
        prev = series[-1]
        if term.equals(prev):
            series.append(term)
            return series
        series.append(term)
        if len(term) == 1:
            return series
        gens = greedy_generators(as_group(term, cap=cap), cap=cap)


def is_nilpotent(G: ElementSet, cap: Optional[int] = None) -> bool:
    return len(lower_central_series(G, cap=cap)[-1]) == 1


def is_solvable(G: ElementSet, cap: Optional[int] = None) -> bool:
    return len(derived_series(G, cap=cap)[-1]) == 1


def is_abelian(S: ElementSet) -> bool:
    gens = S.gens if S.gens is not None else list(S)
    return all(g * h == h * g for i, g in enumerate(gens) for h in gens[i:])


def centralizer(G: ElementSet, S: ElementSet) -> ElementSet:
    """{g in G : gs = sg for all s in S}, vectorized over G."""
    G._check_peer(S)
    targets = list(S.gens) if S.gens is not None else S.elements()
    arr = G.to_entry_array()
    keys = np.asarray(G.sorted_keys(), dtype=object)
    mask = np.ones(len(G), dtype=bool)
    for s in targets:
        smat = elem_to_array(s)
        left = mul_batch(G.ctx, arr, smat)          # g s
        right = mul_batch(G.ctx, arr, smat, left=True)  # s g
        mask &= (left == right).all(axis=(1, 2))
    kept = [k for k, m in zip(G.sorted_keys(), mask.tolist()) if m]
    return ElementSet(G.ctx, G.r, kept)


def conjugation_normalizes(gens: Sequence[GroupElement], N: ElementSet) -> bool:
    for g in gens:
        if not N.conjugate_by(g).equals(N):
            return False
    return True


def is_normal_under(N: ElementSet, overgens: Sequence[GroupElement]) -> bool:
    return conjugation_normalizes(overgens, N)


class QuotientGroup:
    """G/N as canonical coset representatives with a label table.

    Representatives are the key-minimal element of each coset; cosets are
    labeled in canonical order, identity coset first when sorted by rep key.
    """

    def __init__(self, G: ElementSet, N: ElementSet, check: bool = True):
        G._check_peer(N)
        if check:
            if not N.issubset(G):
                raise ClosureError("N is not contained in G")
            gens_G = greedy_generators(G)
            gens_N = greedy_generators(N)
            if not group_closure(gens_N).equals(N):
                raise ClosureError("N is not a subgroup")
            if not conjugation_normalizes(gens_G, N):
                raise NormalityError("N is not normal in G")
        self.G = G
        self.N = N
        ctx, r = G.ctx, G.r
        label: Dict[int, int] = {}
        reps: List[GroupElement] = []
        narr = N.to_entry_array()
        for k in G.sorted_keys():
            if k in label:
                continue
            rep = GroupElement.from_key(ctx, r, k)
            coset = array_to_keys(ctx, r, mul_batch(ctx, narr, elem_to_array(rep), left=True))
            cid = len(reps)
            for ck in coset:
                label[ck] = cid
            reps.append(rep)
        self.label = label
        self.reps = reps
        self.identity = label[GroupElement.identity(ctx, r).key()]

    @property
    def order(self) -> int:
        return len(self.reps)

    def project(self, g: GroupElement) -> int:
        k = g.key()
        if k not in self.label:
            raise ContextError("element outside the quotient's numerator")
        return self.label[k]

    def project_set(self, S: ElementSet) -> List[int]:
        return sorted({self.label[k] for k in S.keys})

    def mul(self, i: int, j: int) -> int:
        return self.label[(self.reps[i] * self.reps[j]).key()]

    def inv(self, i: int) -> int:
        return self.label[self.reps[i].inverse().key()]

    def elements(self) -> range:
        return range(len(self.reps))

    def generators(self) -> List[int]:
        gens = self.G.gens or greedy_generators(self.G)
        return sorted({self.project(g) for g in gens})

    def coset_set(self, i: int) -> ElementSet:
        rep = self.reps[i]
        return self.N.translate(rep, left=True)


def quotient_group(G: ElementSet, N: ElementSet) -> QuotientGroup:
    return QuotientGroup(G, N)


# -- generic machinery over an abstract multiplication --------------------------
# Works for QuotientGroup and any object exposing mul/inv/identity/elements/
# generators; used where the group is no longer a matrix set.


def abstract_closure(ops, gens: Sequence) -> set:
    seen = set(gens) | {ops.identity}
    frontier = list(seen)
    steps = list(gens) + [ops.inv(g) for g in gens]
    while frontier:
        new = []
        for x in frontier:
            for s in steps:
                y = ops.mul(x, s)
                if y not in seen:
                    seen.add(y)
                    new.append(y)
        frontier = new
    return seen


def abstract_comm(ops, a, b):
    return ops.mul(ops.mul(a, b), ops.mul(ops.inv(a), ops.inv(b)))


def abstract_normal_closure(ops, seeds: Sequence, conjugators: Sequence) -> set:
    seen = {ops.identity}
    frontier = [ops.identity]
    steps = list(seeds) + [ops.inv(s) for s in seeds]
    conj = list(conjugators) + [ops.inv(c) for c in conjugators]
    while frontier:
        new = []
        for x in frontier:
            for s in steps:
                y = ops.mul(x, s)
                if y not in seen:
                    seen.add(y)
                    new.append(y)
            for c in conj:
                y = ops.mul(ops.mul(c, x), ops.inv(c))
                if y not in seen:
                    seen.add(y)
                    new.append(y)
        frontier = new
    return seen


def abstract_lower_central_series(ops) -> List[set]:
    gens = list(ops.generators())
    series = [set(ops.elements())]
    norm_gens = gens
    while True:
        comms = [abstract_comm(ops, g, y) for g in gens for y in norm_gens]
        comms = [c for c in comms if c != ops.identity]
        term = (
            abstract_normal_closure(ops, comms, gens) if comms else {ops.identity}
        )
        prev = series[-1]
        if term == prev:
            if len(prev) != 1:
                series.append(term)
            return series
        series.append(term)
        if len(term) == 1:
            return series
        norm_gens = comms


def abstract_is_nilpotent(ops) -> bool:
    return len(abstract_lower_central_series(ops)[-1]) == 1


def subgroups_of(G: ElementSet, cap: Optional[int] = None) -> List[ElementSet]:
    """Every subgroup of a small group, by closure search."""
    trivial = ElementSet.identity_set(G.ctx, G.r)
    found: Dict[frozenset, ElementSet] = {trivial.keys: trivial.with_gens([])}
    work = [trivial.with_gens([])]
    while work:
        H = work.pop()
        hgens = list(H.gens or [])
        for g in G:
            if g in H:
                continue
            newH = group_closure(hgens + [g], cap=cap)
            if newH.keys not in found:
                found[newH.keys] = newH
                work.append(newH)
    return sorted(found.values(), key=lambda S: (len(S), S.sorted_keys()))


def abelian_dim(T: ElementSet) -> int:
    """Minimal generator count of a finite abelian group (max l-rank)."""
    n = len(T)
    if n == 1:
        return 0
    best = 0
    m = n
    ell = 2
    while ell * ell <= m:
        if m % ell == 0:
            best = max(best, _ell_rank(T, ell))
            while m % ell == 0:
                m //= ell
        ell += 1
    if m > 1:
        best = max(best, _ell_rank(T, m))
    return best


def _ell_rank(T: ElementSet, ell: int) -> int:
    powers = {g.pow(ell).key() for g in T}
    quotient = len(T) // len(powers)
    rank = 0
    while ell**rank < quotient:
        rank += 1
    return rank


def element_orders_all_p(G: ElementSet, p: int) -> bool:
    ident = GroupElement.identity(G.ctx, G.r)
    return all(g == ident or g.pow(p) == ident for g in G)
