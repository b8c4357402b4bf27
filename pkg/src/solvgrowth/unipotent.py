"""Exp/log structure of unipotent matrix groups in characteristic p > r.

Truncated exponential and logarithm between strictly-upper-triangular
matrices and unitriangular matrices, one-parameter subgroups, Lie-algebra
reconstruction from an abstract unitriangular p-group, commutators of
one-parameter subgroups, and the nilpotent-ideal adjustment that makes
exp(v + u1) factor as exp(v) exp(u1').
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .errors import (
    CentralityError,
    CharacteristicError,
    ClosureError,
    ContextError,
    DomainError,
)
from .field import FieldCtx
from .groups import group_closure
from .linalg import echelon, express, in_span
from .matrix import GroupElement
from .rng import SplitMix64
from .sets import ElementSet


class NilpotentElement:
    """Strictly upper-triangular matrix over F_{p^a} (so X^r = 0)."""

    __slots__ = ("ctx", "r", "codes")

    def __init__(self, ctx: FieldCtx, r: int, codes: Sequence[int]):
        self.ctx = ctx
        self.r = r
        self.codes = tuple(int(c) for c in codes)
        if len(self.codes) != r * r:
            raise ContextError("entry tuple has wrong length")
        if any(self.codes[i * r + j] != 0 for i in range(r) for j in range(i + 1)):
            raise DomainError("matrix is not strictly upper triangular")

    @classmethod
    def zero(cls, ctx: FieldCtx, r: int) -> "NilpotentElement":
        return cls(ctx, r, [0] * (r * r))

    @classmethod
    def unit(cls, ctx: FieldCtx, r: int, i: int, j: int, c: int = 1) -> "NilpotentElement":
        """c * E_ij for i < j."""
        if not i < j:
            raise DomainError("E_ij needs i < j")
        codes = [0] * (r * r)
        codes[i * r + j] = c % ctx.q if ctx.a == 1 else c
        return cls(ctx, r, codes)

    @classmethod
    def from_rows(cls, ctx: FieldCtx, rows: Sequence[Sequence[int]]) -> "NilpotentElement":
        r = len(rows)
        return cls(ctx, r, [e % ctx.p if isinstance(e, int) else ctx.code_of(e) for row in rows for e in row])

    @classmethod
    def from_vec(cls, ctx: FieldCtx, r: int, vec: Sequence[int]) -> "NilpotentElement":
        """Vector over the strict upper positions in row-major order."""
        codes = [0] * (r * r)
        pos = 0
        for i in range(r):
            for j in range(i + 1, r):
                codes[i * r + j] = vec[pos]
                pos += 1
        return cls(ctx, r, codes)

    def vec(self) -> Tuple[int, ...]:
        r = self.r
        return tuple(self.codes[i * r + j] for i in range(r) for j in range(i + 1, r))

    def entry(self, i: int, j: int) -> int:
        return self.codes[i * self.r + j]

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.codes)

    def key(self) -> int:
        out = 0
        for c in reversed(self.codes):
            out = out * self.ctx.q + c
        return out

    def __eq__(self, other):
        return (
            isinstance(other, NilpotentElement)
            and self.r == other.r
            and self.codes == other.codes
            and self.ctx == other.ctx
        )

    def __hash__(self):
        return hash(("nil", self.r, self.codes))

    def __repr__(self):
        rows = [
            "[" + ",".join(str(c) for c in self.codes[i * self.r : (i + 1) * self.r]) + "]"
            for i in range(self.r)
        ]
        return f"Nil({''.join(rows)} over F_{self.ctx.q})"

    # -- linear and multiplicative structure ------------------------------------
    def add(self, other: "NilpotentElement") -> "NilpotentElement":
        self._check(other)
        ctx = self.ctx
        return NilpotentElement(
            ctx, self.r, [ctx.add(a, b) for a, b in zip(self.codes, other.codes)]
        )

    def sub(self, other: "NilpotentElement") -> "NilpotentElement":
        self._check(other)
        ctx = self.ctx
        return NilpotentElement(
            ctx, self.r, [ctx.sub(a, b) for a, b in zip(self.codes, other.codes)]
        )

    def scale(self, s: int) -> "NilpotentElement":
        ctx = self.ctx
        return NilpotentElement(ctx, self.r, [ctx.mul(s, c) for c in self.codes])

    def matmul(self, other: "NilpotentElement") -> "NilpotentElement":
        self._check(other)
        ctx, r = self.ctx, self.r
        out = [0] * (r * r)
        for i in range(r):
            for j in range(i + 1, r):
                acc = 0
                for k in range(i + 1, j):
                    acc = ctx.add(acc, ctx.mul(self.codes[i * r + k], other.codes[k * r + j]))
                out[i * r + j] = acc
        return NilpotentElement(ctx, r, out)

    def bracket(self, other: "NilpotentElement") -> "NilpotentElement":
        """[X, Y] = XY - YX."""
        return self.matmul(other).sub(other.matmul(self))

    def level(self) -> int:
        """Smallest superdiagonal carrying a nonzero entry (r if zero)."""
        r = self.r
        for k in range(1, r):
            if any(self.codes[i * r + i + k] != 0 for i in range(r - k)):
                return k
        return r

    def _check(self, other: "NilpotentElement"):
        if self.r != other.r:
            raise ContextError("mixed matrix dimensions")
        self.ctx.check_same(other.ctx)


def _require_p_gt_r(ctx: FieldCtx, r: int):
    if ctx.p <= r:
        raise CharacteristicError(f"need p > r, got p = {ctx.p}, r = {r}")


def exp(X: NilpotentElement) -> GroupElement:
    """sum_(i<r) X^i / i!, exact in F_{p^a} for p > r."""
    ctx, r = X.ctx, X.r
    _require_p_gt_r(ctx, r)
    codes = list(GroupElement.identity(ctx, r).codes)
    power = X
    fact = 1
    for i in range(1, r):
        fact = (fact * i) % ctx.p
        coeff = ctx.inv(fact % ctx.p)
        for pos, c in enumerate(power.codes):
            codes[pos] = ctx.add(codes[pos], ctx.mul(coeff, c))
        power = power.matmul(X)
    return GroupElement(ctx, r, codes, check=False)


def log(u: GroupElement) -> NilpotentElement:
    """sum (-1)^(i+1) (u-1)^i / i, inverse of exp on unitriangular matrices."""
    ctx, r = u.ctx, u.r
    _require_p_gt_r(ctx, r)
    if not u.is_unitriangular():
        raise DomainError("log needs a unitriangular matrix")
    n_codes = list(u.codes)
    for i in range(r):
        n_codes[i * r + i] = 0
    N = NilpotentElement(ctx, r, n_codes)
    acc = NilpotentElement.zero(ctx, r)
    power = N
    for i in range(1, r):
        coeff = ctx.inv(i % ctx.p)
        if i % 2 == 0:
            coeff = ctx.neg(coeff)
        acc = acc.add(power.scale(coeff))
        power = power.matmul(N)
    return acc


def one_param(X: NilpotentElement, t: int) -> GroupElement:
    """exp(t X); additive in t."""
    return exp(X.scale(t))


@dataclass(frozen=True)
class OneParamSubgroup:
    """The image {exp(s v) : s in F_q} of a one-parameter map."""

    direction: NilpotentElement

    @property
    def ctx(self) -> FieldCtx:
        return self.direction.ctx

    def element(self, s: int) -> GroupElement:
        return one_param(self.direction, s)

    def elements(self) -> List[GroupElement]:
        return [self.element(s) for s in range(self.ctx.q)]

    def as_set(self) -> ElementSet:
        return ElementSet.from_elements(self.elements())

    def prime_field_points(self) -> List[GroupElement]:
        """Elements with all entries in the prime subfield."""
        p = self.ctx.p
        out = []
        for g in self.elements():
            if all(c < p for c in g.codes):
                out.append(g)
        return out


class NilpotentAlgebra:
    """Span of strictly-upper matrices, kept as an echelonized basis."""

    def __init__(self, ctx: FieldCtx, r: int, vectors: Sequence[NilpotentElement]):
        self.ctx = ctx
        self.r = r
        basis_vecs, pivots = echelon([v.vec() for v in vectors], ctx)
        self.basis = [NilpotentElement.from_vec(ctx, r, v) for v in basis_vecs]
        self._pivots = pivots

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, X: NilpotentElement) -> bool:
        return in_span(X.vec(), [b.vec() for b in self.basis], self._pivots, self.ctx)

    def coordinates(self, X: NilpotentElement) -> Optional[Tuple[int, ...]]:
        return express(X.vec(), [b.vec() for b in self.basis], self.ctx)

    def is_bracket_closed(self) -> bool:
        return all(
            self.contains(a.bracket(b)) for a in self.basis for b in self.basis
        )

    def points(self, subfield_only: bool = False) -> List[NilpotentElement]:
        """All F_q-combinations of the basis (F_p-combinations if requested)."""
        scalars = range(self.ctx.p if subfield_only else self.ctx.q)
        out: List[NilpotentElement] = []

        def rec(i: int, acc: NilpotentElement):
            if i == len(self.basis):
                out.append(acc)
                return
            for s in scalars:
                rec(i + 1, acc.add(self.basis[i].scale(s)))

        rec(0, NilpotentElement.zero(self.ctx, self.r))
        return out

    def exp_points(self, subfield_only: bool = False) -> ElementSet:
        return ElementSet.from_elements([exp(X) for X in self.points(subfield_only)])

    def lie_lower_central_series(self) -> List[List[NilpotentElement]]:
        """Subspace chain u >= [u,u] >= [u,[u,u]] >= ... as echelon bases."""
        series = [self.basis]
        while True:
            prev = series[-1]
            brackets = [a.bracket(b) for a in self.basis for b in prev]
            vecs, _ = echelon([x.vec() for x in brackets], self.ctx)
            term = [NilpotentElement.from_vec(self.ctx, self.r, v) for v in vecs]
            if len(term) == len(prev):
                series.append(term)
                return series
            series.append(term)
            if not term:
                return series


def polycyclic_chain(H: ElementSet) -> List[GroupElement]:
    """Generators g_1..g_c with |<g_1..g_e>| = p^e, each initial segment
    normal in the next.

    Elements are added deepest level first (level = first nonzero
    superdiagonal of g - 1), in canonical order within a level; commutators
    strictly increase level, which is what makes each step normal of index p.
    """
    ctx, r = H.ctx, H.r
    ident = GroupElement.identity(ctx, r)
    for h in H:
        if not h.is_unitriangular():
            raise DomainError("chain construction needs a unitriangular group")
    chain: List[GroupElement] = []
    current = ElementSet.single(ident)
    for lev in range(r - 1, 0, -1):
        level_elems = [
            h for h in H
            if h != ident and _group_level(h) >= lev
        ]
        for h in sorted(level_elems, key=lambda g: g.key()):
            if h in current:
                continue
            prev = len(current)
            chain.append(h)
            current = group_closure(chain)
            if len(current) != prev * ctx.p:
                raise ClosureError(
                    f"chain step grew order {prev} -> {len(current)}, not by p"
                )
    if not current.equals(H):
        raise ClosureError("chain closure does not recover H")
    return chain


def _group_level(g: GroupElement) -> int:
    r = g.r
    for k in range(1, r):
        if any(g.entry(i, i + k) != 0 for i in range(r - k)):
            return k
    return r


def algebra_from_group(H: ElementSet, verify_cap: int = 1 << 20) -> NilpotentAlgebra:
    """Lie algebra spanned by logs of a polycyclic chain of H, certified.

    H must be a unitriangular subgroup over a prime field (a = 1) with p > r.
    Certifies bracket closure and that exp maps the F_p-points of the span
    bijectively onto H.
    """
    ctx, r = H.ctx, H.r
    _require_p_gt_r(ctx, r)
    if ctx.a != 1:
        raise DomainError("group-to-algebra reconstruction is restricted to prime fields")
    chain = polycyclic_chain(H)
    if not chain:
        return NilpotentAlgebra(ctx, r, [])
    algebra = NilpotentAlgebra(ctx, r, [log(g) for g in chain])
    if not algebra.is_bracket_closed():
        raise ClosureError("span of chain logs is not bracket closed (bug)")
    if ctx.p**algebra.dim > verify_cap:
        raise ClosureError("algebra too large to certify exhaustively")
    image = algebra.exp_points(subfield_only=True)
    if not image.equals(H):
        raise ClosureError("exp(span) does not recover H (bug)")
    return algebra


def comm_one_param(
    A: OneParamSubgroup, B: OneParamSubgroup, G: ElementSet
) -> Tuple[OneParamSubgroup, ElementSet]:
    """One-parameter subgroup {1 + k [a,b]} equal to the set of commutators
    of A and B, for [A,B] central and nontrivial in G."""
    a, b = A.direction, B.direction
    h = a.bracket(b)
    if h.is_zero():
        raise CentralityError("[A, B] is trivial")
    ctx, r = h.ctx, h.r
    ident = GroupElement.identity(ctx, r)
    comm_set = set()
    for u in A.elements():
        for v in B.elements():
            comm_set.add(u.comm(v).key())
    line = []
    for k in range(ctx.q):
        m = list(ident.codes)
        for pos, c in enumerate(h.codes):
            m[pos] = ctx.add(m[pos], ctx.mul(k, c))
        line.append(GroupElement(ctx, r, m, check=False))
    line_set = ElementSet.from_elements(line)
    if set(line_set.keys) != comm_set:
        raise CentralityError("commutator set is not the line 1 + k[a,b]")
    gens = G.gens or list(G)
    for g in gens:
        for x in line:
            if g * x != x * g:
                raise CentralityError("[A, B] is not central in G")
    return OneParamSubgroup(h), line_set


def bch_adjust(
    u1: NilpotentElement, v: NilpotentElement, ideal: NilpotentAlgebra
) -> NilpotentElement:
    """u1' in the ideal with exp(v + u1) = exp(v) exp(u1').

    The truncated Baker-Campbell-Hausdorff series keeps the correction inside
    any ideal containing u1; here it is computed directly as
    log(exp(-v) exp(v + u1)) and certified against the ideal.
    """
    ctx, r = v.ctx, v.r
    _require_p_gt_r(ctx, r)
    if not ideal.contains(u1):
        raise DomainError("u1 must lie in the supplied ideal")
    for x in ideal.basis:
        for y in ideal.basis + [v]:
            if not ideal.contains(x.bracket(y)):
                raise DomainError("the supplied span is not an ideal for v")
    total = exp(v.add(u1))
    u1p = log(exp(v).inverse() * total)
    if not ideal.contains(u1p):
        raise ClosureError("correction left the ideal (bug)")
    if exp(v) * exp(u1p) != total:
        raise ClosureError("factorization identity failed (bug)")
    return u1p


# ---------------------------------------------------------------------------
# verification suites (used by tests, the CLI explog subcommand, acceptance)


def all_nilpotent(ctx: FieldCtx, r: int) -> List[NilpotentElement]:
    n = r * (r - 1) // 2
    out = []
    for code in range(ctx.q**n):
        vec = []
        c = code
        for _ in range(n):
            vec.append(c % ctx.q)
            c //= ctx.q
        out.append(NilpotentElement.from_vec(ctx, r, vec))
    return out


def random_nilpotent(ctx: FieldCtx, r: int, rng: SplitMix64) -> NilpotentElement:
    n = r * (r - 1) // 2
    return NilpotentElement.from_vec(ctx, r, [rng.below(ctx.q) for _ in range(n)])


def verify_explog_case(X: NilpotentElement, c1: int, c2: int) -> Optional[str]:
    """One bijection/homomorphism case; returns a failure description or None."""
    u = exp(X)
    if log(u) != X:
        return f"log(exp X) != X for {X!r}"
    if exp(X.scale(X.ctx.neg(1))) != u.inverse():
        return f"exp(-X) != exp(X)^-1 for {X!r}"
    lhs = one_param(X, X.ctx.add(c1, c2))
    rhs = one_param(X, c1) * one_param(X, c2)
    if lhs != rhs:
        return f"one-parameter additivity failed for {X!r}, {c1}, {c2}"
    return None


def explog_suite_exhaustive(ctx: FieldCtx, r: int) -> Tuple[int, Optional[str]]:
    """All strictly-upper X: round trips and scalings; all unitriangular u:
    exp(log u) = u.  Returns (cases, first failure or None)."""
    cases = 0
    for X in all_nilpotent(ctx, r):
        fail = verify_explog_case(X, 1 % ctx.q, (ctx.q - 1) % ctx.q)
        cases += 1
        if fail:
            return cases, fail
        u = exp(X)
        if exp(log(u)) != u:
            return cases, f"exp(log u) != u for {u!r}"
    return cases, None


def explog_suite_random(
    ctx: FieldCtx, r: int, n_cases: int, seed: int
) -> Tuple[int, Optional[str]]:
    rng = SplitMix64(seed)
    for i in range(n_cases):
        X = random_nilpotent(ctx, r, rng)
        fail = verify_explog_case(X, rng.below(ctx.q), rng.below(ctx.q))
        if fail:
            return i + 1, fail
        u = exp(X)
        if exp(log(u)) != u:
            return i + 1, f"exp(log u) != u for {u!r}"
    return n_cases, None
