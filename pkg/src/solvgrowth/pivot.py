"""The pivoting dichotomy for an abelian automorphism set acting on a group.

Works over an abstract finite group (matrix sets, quotient cosets, or
synthetic additive groups for tests), with automorphisms held as full map
tables.  ``run_pivot`` follows the constructive case analysis - pivot in W,
one-step translate/image of a non-pivot, or no pivot at all - and returns a
branch whose witness is recomputed on verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import DomainError, SearchCapError
from .groups import QuotientGroup
from .matrix import GroupElement
from .sets import ElementSet


@dataclass
class TableGroup:
    """A finite group as a canonical element list plus operations."""

    elems: List
    mul: Callable
    inv: Callable
    identity: object
    gens: Optional[List] = None

    def __post_init__(self):
        self.index = {e: i for i, e in enumerate(self.elems)}
        if self.identity not in self.index:
            raise DomainError("identity missing from the element list")

    @property
    def order(self) -> int:
        return len(self.elems)

    def generators(self) -> List:
        if self.gens is not None:
            return list(self.gens)
        return list(self.elems)

    @classmethod
    def from_element_set(cls, S: ElementSet) -> "TableGroup":
        elems = S.elements()
        return cls(
            elems=elems,
            mul=lambda a, b: a * b,
            inv=lambda a: a.inverse(),
            identity=GroupElement.identity(S.ctx, S.r),
            gens=list(S.gens) if S.gens is not None else None,
        )

    @classmethod
    def from_quotient(cls, Q: QuotientGroup) -> "TableGroup":
        return cls(
            elems=list(Q.elements()),
            mul=Q.mul,
            inv=Q.inv,
            identity=Q.identity,
            gens=Q.generators(),
        )

    @classmethod
    def additive(cls, mod: int, dims: int = 1) -> "TableGroup":
        """(Z/mod)^dims, elements as tuples, written additively."""
        elems = [()]
        for _ in range(dims):
            elems = [e + (x,) for e in elems for x in range(mod)]
        elems.sort()
        return cls(
            elems=elems,
            mul=lambda a, b: tuple((x + y) % mod for x, y in zip(a, b)),
            inv=lambda a: tuple((-x) % mod for x in a),
            identity=(0,) * dims,
        )


class Automorphism:
    """An automorphism held as a full map table over the group's elements."""

    __slots__ = ("group", "images", "key")

    def __init__(self, group: TableGroup, images: Sequence):
        self.group = group
        self.images = tuple(images)  # images[i] = image of elems[i]
        self.key = self.images

    @classmethod
    def from_callable(cls, group: TableGroup, fn: Callable) -> "Automorphism":
        return cls(group, [fn(e) for e in group.elems])

    @classmethod
    def identity(cls, group: TableGroup) -> "Automorphism":
        return cls(group, list(group.elems))

    def apply(self, x):
        return self.images[self.group.index[x]]

    def compose(self, other: "Automorphism") -> "Automorphism":
        # (self o other)(x) = self(other(x))
        return Automorphism(
            self.group, [self.apply(y) for y in other.images]
        )

    def inverse(self) -> "Automorphism":
        images = [None] * len(self.images)
        for i, y in enumerate(self.images):
            images[self.group.index[y]] = self.group.elems[i]
        return Automorphism(self.group, images)

    def is_valid(self) -> bool:
        if len(set(self.images)) != len(self.images):
            return False
        g = self.group
        if self.apply(g.identity) != g.identity:
            return False
        for a in g.generators():
            for y in g.elems:
                if self.apply(g.mul(a, y)) != g.mul(self.apply(a), self.apply(y)):
                    return False
        return True

    def nontrivial_fixed_points(self) -> bool:
        g = self.group
        return any(
            y == g.elems[i] and g.elems[i] != g.identity
            for i, y in enumerate(self.images)
        )

    def __eq__(self, other):
        return isinstance(other, Automorphism) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


def conjugation_auto(group: TableGroup, by, mul, inv) -> Automorphism:
    """x -> by x by^-1, where by may live outside the group itself."""
    byi = inv(by)
    return Automorphism.from_callable(group, lambda x: mul(mul(by, x), byi))


@dataclass
class ActionCtx:
    """A group plus a checked abelian set of automorphisms of it."""

    group: TableGroup
    autos: List[Automorphism]

    def __post_init__(self):
        dedup: Dict[tuple, Automorphism] = {}
        for a in self.autos:
            dedup[a.key] = a
        self.autos = [dedup[k] for k in sorted(dedup)]
        for a in self.autos:
            if not a.is_valid():
                raise DomainError("map table is not an automorphism")
        for i, a in enumerate(self.autos):
            for b in self.autos[i + 1 :]:
                if a.compose(b).key != b.compose(a).key:
                    raise DomainError("automorphism set is not abelian")


@dataclass
class PivotOutcome:
    branch: str                      # "growth" | "full_group"
    case: str                        # "0" | "1a" | "1b" | "2"
    x: int
    n_X: int
    n_W: int
    n_Y: int
    witness_size: int
    bound_num: int                   # growth: witness_size * x >= n_X * n_W
    witness: List = field(default_factory=list)
    generated: List = field(default_factory=list)  # full_group: the group

    def to_json(self) -> Dict[str, object]:
        return {
            "branch": self.branch,
            "case": self.case,
            "x": self.x,
            "|X|": self.n_X,
            "|W|": self.n_W,
            "|Y|": self.n_Y,
            "witness_size": self.witness_size,
            "generated_order": len(self.generated) if self.generated else None,
        }


def _dedupe_autos(autos: Sequence[Automorphism]) -> List[Automorphism]:
    seen: Dict[tuple, Automorphism] = {}
    for a in autos:
        seen.setdefault(a.key, a)
    return [seen[k] for k in sorted(seen)]


def fixed_point_count(X: Sequence[Automorphism]) -> int:
    """#{y in X^-1 X : y fixes some element other than the identity}."""
    X = _dedupe_autos(X)
    prods = _dedupe_autos([a.inverse().compose(b) for a in X for b in X])
    return sum(1 for y in prods if y.nontrivial_fixed_points())


def avoiding_automorphisms(X: Sequence[Automorphism]) -> List[Automorphism]:
    """Greedy maximal Y in X with Y^-1 Y fixed-point-free off the identity."""
    X = _dedupe_autos(X)
    picked: List[Automorphism] = []
    for a in X:
        ok = True
        for b in picked:
            d = b.inverse().compose(a)
            if d.key != Automorphism.identity(a.group).key and d.nontrivial_fixed_points():
                ok = False
                break
        if ok:
            picked.append(a)
    return picked


def _abstract_ball(group: TableGroup, base: Sequence, radius: int) -> set:
    """Products of <= radius factors from base u base^-1 (the set (base)_radius)."""
    steps = set(base) | {group.inv(b) for b in base}
    current = {group.identity}
    frontier = {group.identity}
    for _ in range(radius):
        new = set()
        for x in frontier:
            for s in steps:
                y = group.mul(x, s)
                if y not in current:
                    current.add(y)
                    new.add(y)
        if not new:
            break
        frontier = new
    return current


def _abstract_closure(group: TableGroup, base: Sequence) -> set:
    return _abstract_ball(group, base, radius=group.order + 1)


def _auto_ball(X: Sequence[Automorphism], radius: int) -> List[Automorphism]:
    """X_radius inside the automorphism group (products of <= radius factors)."""
    ident = Automorphism.identity(X[0].group)
    steps = _dedupe_autos(list(X) + [a.inverse() for a in X])
    current = {ident.key: ident}
    frontier = [ident]
    for _ in range(radius):
        new = []
        for f in frontier:
            for s in steps:
                g = f.compose(s)
                if g.key not in current:
                    current[g.key] = g
                    new.append(g)
        if not new:
            break
        frontier = new
    return [current[k] for k in sorted(current)]


def _fpf_pairs(X: Sequence[Automorphism]) -> List[Tuple[Automorphism, Automorphism]]:
    out = []
    for a in X:
        ai = a.inverse()
        for b in X:
            d = ai.compose(b)
            ident = Automorphism.identity(a.group)
            if d.key == ident.key:
                continue
            if not d.nontrivial_fixed_points():
                out.append((a, b))
    return out


def is_pivot(group: TableGroup, xi, fpf_pairs, wdiff: set) -> bool:
    for g1, g2 in fpf_pairs:
        if group.mul(g1.apply(xi), group.inv(g2.apply(xi))) in wdiff:
            return False
    return True


def run_pivot(ctx: ActionCtx, X: Sequence[Automorphism], W: Sequence) -> PivotOutcome:
    """Classify the instance and return a verified growth-or-full-group branch.

    Search order: pivots in W (case 0), then one-step candidates a.xi with
    a in W (case 1a) and y(xi) with y in X (case 1b) over all xi in the
    ambient group, then the no-pivot case 2.  A pivot that exists in the
    generated group but is invisible to all three patterns raises
    ``SearchCapError`` (it cannot occur when the case analysis is complete).
    """
    group = ctx.group
    X = _dedupe_autos(X)
    W = sorted(set(W), key=group.index.get)
    if not X or not W:
        raise DomainError("pivoting needs nonempty X and W")
    x = fixed_point_count(X)
    Y = avoiding_automorphisms(X)
    fpf = _fpf_pairs(X)
    wdiff = {group.mul(group.inv(a), b) for a in W for b in W}

    pivot_of: Dict[object, bool] = {
        e: is_pivot(group, e, fpf, wdiff) for e in group.elems
    }

    def growth_outcome(case: str) -> PivotOutcome:
        X2 = _auto_ball(X, 2)
        X2W = sorted({a.apply(w) for a in X2 for w in W}, key=group.index.get)
        S6 = _abstract_ball(group, X2W, 6)
        ok = len(S6) * x >= len(X) * len(W)
        if not ok:
            raise SearchCapError("growth witness failed its own bound (bug)")
        return PivotOutcome(
            branch="growth",
            case=case,
            x=x,
            n_X=len(X),
            n_W=len(W),
            n_Y=len(Y),
            witness_size=len(S6),
            bound_num=len(X) * len(W),
            witness=sorted(S6, key=group.index.get),
        )

    # case 0: a pivot inside W
    if any(pivot_of[w] for w in W):
        return growth_outcome("0")
    # case 1a / 1b: one-step reach from any non-pivot
    for xi in group.elems:
        if pivot_of[xi]:
            continue
        if any(pivot_of[group.mul(a, xi)] for a in W):
            return growth_outcome("1a")
        if any(pivot_of[y.apply(xi)] for y in X):
            return growth_outcome("1b")
    # case 2: no pivot in the generated group
    Wgen = _abstract_closure(group, W)
    Xgen = _auto_ball(X, group.order + 1)
    orbit = sorted({a.apply(w) for a in Xgen for w in Wgen}, key=group.index.get)
    omega = _abstract_closure(group, orbit)
    stray = [xi for xi in omega if pivot_of[xi]]
    if stray:
        raise SearchCapError(
            "pivot exists in the generated group but no one-step case fired"
        )
    if len(Y) * len(W) < len(omega):
        raise SearchCapError("counting bound |Y||W| >= |Omega| failed (bug)")
    XW = sorted({a.apply(w) for a in X for w in W}, key=group.index.get)
    S8 = _abstract_ball(group, XW, 8)
    if S8 != omega:
        raise SearchCapError("(X(W))_8 did not recover the generated group")
    return PivotOutcome(
        branch="full_group",
        case="2",
        x=x,
        n_X=len(X),
        n_W=len(W),
        n_Y=len(Y),
        witness_size=len(S8),
        bound_num=len(X) * len(W),
        witness=sorted(S8, key=group.index.get),
        generated=sorted(omega, key=group.index.get),
    )


def verify_outcome(ctx: ActionCtx, X: Sequence[Automorphism], W: Sequence, out: PivotOutcome) -> bool:
    """Recompute the returned branch's witness from scratch."""
    group = ctx.group
    X = _dedupe_autos(X)
    W = sorted(set(W), key=group.index.get)
    x = fixed_point_count(X)
    if x != out.x:
        return False
    if out.branch == "growth":
        X2 = _auto_ball(X, 2)
        X2W = {a.apply(w) for a in X2 for w in W}
        S6 = _abstract_ball(group, sorted(X2W, key=group.index.get), 6)
        return len(S6) == out.witness_size and len(S6) * x >= len(X) * len(W)
    Wgen = _abstract_closure(group, W)
    Xgen = _auto_ball(X, group.order + 1)
    orbit = {a.apply(w) for a in Xgen for w in Wgen}
    omega = _abstract_closure(group, sorted(orbit, key=group.index.get))
    XW = {a.apply(w) for a in X for w in W}
    S8 = _abstract_ball(group, sorted(XW, key=group.index.get), 8)
    return S8 == omega and set(out.generated) == omega


def injectivity_holds(ctx: ActionCtx, g1: Automorphism, g2: Automorphism) -> bool:
    """x -> g1(x) g2(x)^-1 is injective when g1^-1 g2 is fixed-point-free."""
    group = ctx.group
    d = g1.inverse().compose(g2)
    if d.nontrivial_fixed_points():
        return True  # nothing to check
    seen = set()
    for e in group.elems:
        v = group.mul(g1.apply(e), group.inv(g2.apply(e)))
        if v in seen:
            return False
        seen.add(v)
    return True
