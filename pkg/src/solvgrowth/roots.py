"""Weight and root structure of a unipotent group under a diagonal torus.

Splits the Lie algebra into simultaneous eigenspaces of the adjoint torus
action, picks weight-subgroup directions compatible with the lower central
series, and derives the root datum: characters, heights, U_R, U_Lambda,
Cartan subgroup, root kernels, and standard forms.

Torus input is restricted to subgroups of the diagonal torus (inputs are
expected pre-trigonalized); a non-diagonal torus generator is rejected with
guidance rather than diagonalized here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    ClosureError,
    DomainError,
    MembershipError,
    NormalityError,
)
from .field import FieldCtx
from .groups import (
    abelian_dim,
    as_group,
    centralizer,
    greedy_generators,
    group_closure,
    is_nilpotent,
    lower_central_series,
)
from .linalg import Vec, echelon, express, in_span, is_zero_vec, vec_scale, vec_sub
from .matrix import GroupElement
from .sets import ElementSet, pairwise_product
from .unipotent import (
    NilpotentAlgebra,
    NilpotentElement,
    OneParamSubgroup,
    algebra_from_group,
    exp,
    log,
)


@dataclass(frozen=True)
class Character:
    """Multiplicative character of the diagonal torus: t -> prod t_i^(e_i)."""

    exponents: Tuple[int, ...]

    def evaluate(self, t: GroupElement) -> int:
        ctx = t.ctx
        out = 1
        for i, e in enumerate(self.exponents):
            if e:
                out = ctx.mul(out, ctx.pow(t.entry(i, i), e))
        return out

    def is_trivial_on(self, torus: Sequence[GroupElement]) -> bool:
        return all(self.evaluate(t) == 1 for t in torus)

    def label(self) -> str:
        return "(" + ",".join(str(e) for e in self.exponents) + ")"


@dataclass(frozen=True)
class WeightSubgroup:
    """One-parameter subgroup normalized by the torus, with its character."""

    direction: NilpotentElement
    character: Character
    height: int

    def subgroup(self) -> OneParamSubgroup:
        return OneParamSubgroup(self.direction)

    def points(self) -> ElementSet:
        return self.subgroup().as_set()


@dataclass
class RootDatum:
    """Ordered weight subgroups R_1..R_d plus the derived structure."""

    U: ElementSet
    T: ElementSet
    G: ElementSet
    algebra: NilpotentAlgebra
    weight_subgroups: List[WeightSubgroup]
    root_indices: List[int]
    lambda_indices: List[int]
    U_R: ElementSet
    U_Lambda: ElementSet

    @property
    def d(self) -> int:
        return len(self.weight_subgroups)

    def roots(self) -> List[WeightSubgroup]:
        return [self.weight_subgroups[i] for i in self.root_indices]

    def lambdas(self) -> List[WeightSubgroup]:
        return [self.weight_subgroups[i] for i in self.lambda_indices]

    def heights(self) -> Tuple[int, ...]:
        return tuple(w.height for w in self.weight_subgroups)

    def root_layers(self) -> Dict[int, List[WeightSubgroup]]:
        """(Phi*)^j: root subgroups of height exactly j."""
        layers: Dict[int, List[WeightSubgroup]] = {}
        for i in self.root_indices:
            w = self.weight_subgroups[i]
            layers.setdefault(w.height, []).append(w)
        return layers

    def torus_gens(self) -> List[GroupElement]:
        return list(self.T.gens or greedy_generators(self.T))

    def tail_span(self, l: int) -> List[Vec]:
        """Echelon basis of span(v_l, ..., v_d), 0-indexed from l."""
        basis, _ = echelon(
            [w.direction.vec() for w in self.weight_subgroups[l:]], self.U.ctx
        )
        return basis

    def to_json(self) -> Dict[str, object]:
        return {
            "d": self.d,
            "weights": [
                {
                    "character": w.character.label(),
                    "height": w.height,
                    "direction": list(w.direction.vec()),
                    "is_root": i in self.root_indices,
                }
                for i, w in enumerate(self.weight_subgroups)
            ],
            "orders": {
                "U": len(self.U),
                "T": len(self.T),
                "G": len(self.G),
                "U_R": len(self.U_R),
                "U_Lambda": len(self.U_Lambda),
            },
        }


@dataclass(frozen=True)
class StandardForm:
    """g = x_(R_1)(s_1) ... x_(R_d)(s_d) t with a verified recomposition."""

    coeffs: Tuple[int, ...]
    torus_part: GroupElement

    def coeff(self, i: int) -> int:
        return self.coeffs[i]


def _upper_positions(r: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(r) for j in range(i + 1, r)]


def _adjoint_scale(ctx: FieldCtx, t: GroupElement, v: Vec, positions) -> Vec:
    """Ad(t) on a strict-upper vector for diagonal t: entry (i,j) scales by t_i/t_j."""
    out = []
    for (i, j), c in zip(positions, v):
        ratio = ctx.mul(t.entry(i, i), ctx.inv(t.entry(j, j)))
        out.append(ctx.mul(ratio, c))
    return tuple(out)


def _split_eigenspaces(
    ctx: FieldCtx, spaces: List[List[Vec]], t: GroupElement, positions
) -> List[List[Vec]]:
    r = t.r
    candidates = sorted(
        {ctx.mul(t.entry(i, i), ctx.inv(t.entry(j, j))) for i in range(r) for j in range(r)}
    )
    out: List[List[Vec]] = []
    for basis in spaces:
        m = len(basis)
        cols = []
        for b in basis:
            img = _adjoint_scale(ctx, t, b, positions)
            coords = express(img, basis, ctx)
            if coords is None:
                raise NormalityError("torus generator does not preserve the algebra")
            cols.append(coords)
        total = 0
        for lam in candidates:
            rows = []
            for i in range(m):
                row = [cols[j][i] for j in range(m)]
                row[i] = ctx.sub(row[i], lam)
                rows.append(tuple(row))
            ker = [k for k in _kernel_rows(rows, m, ctx)]
            if not ker:
                continue
            vecs = []
            for k in ker:
                v = tuple(0 for _ in basis[0])
                for coef, b in zip(k, basis):
                    v = tuple(ctx.add(a, ctx.mul(coef, c)) for a, c in zip(v, b))
                vecs.append(v)
            eb, _ = echelon(vecs, ctx)
            if eb:
                out.append(eb)
                total += len(eb)
        if total != m:
            raise DomainError(
                "torus action not diagonalizable over the context field; "
                "supply a larger extension degree a"
            )
    return out


def _kernel_rows(rows, ncols, ctx):
    from .linalg import kernel

    return kernel(rows, ncols, ctx)


def unipotent_algebra(U: ElementSet, cap: Optional[int] = None) -> NilpotentAlgebra:
    """Lie algebra of a unitriangular group set; chain-based on prime fields."""
    cap = cap if cap is not None else (1 << 20)
    if U.ctx.a == 1:
        return algebra_from_group(U, verify_cap=cap)
    logs = [log(u) for u in U]
    alg = NilpotentAlgebra(U.ctx, U.r, logs)
    if not alg.is_bracket_closed():
        raise ClosureError("log span is not bracket closed")
    if not alg.exp_points().equals(U):
        raise ClosureError("exp(span) does not recover U")
    return alg


def weight_decompose(
    U: ElementSet,
    torus_gens: Sequence[GroupElement],
    certify: bool = True,
    cap: Optional[int] = None,
) -> RootDatum:
    """Root datum of U under the torus generated by the given diagonals.

    Directions are chosen per weight space as echelon complements along the
    lower central series of the algebra, so tails R_l...R_d realize the
    series terms; subgroups are ordered by height with canonical tie-breaks.
    """
    ctx, r = U.ctx, U.r
    if ctx.p <= r:
        raise DomainError(f"need p > r, got p = {ctx.p}")
    for t in torus_gens:
        if not t.is_diagonal():
            raise DomainError(
                "torus generators must be diagonal: pre-trigonalize the input"
            )
    Ugrp = as_group(U, cap=cap)
    for t in torus_gens:
        if not U.conjugate_by(t).equals(U):
            raise NormalityError("torus does not normalize U")
    algebra = unipotent_algebra(Ugrp, cap=cap)
    positions = _upper_positions(r)

    spaces: List[List[Vec]] = [[b.vec() for b in algebra.basis]] if algebra.dim else []
    for t in torus_gens:
        spaces = _split_eigenspaces(ctx, spaces, t, positions)

    lie_series = algebra.lie_lower_central_series()
    series_bases = [[b.vec() for b in term] for term in lie_series]

    weights: List[WeightSubgroup] = []
    for basis in spaces:
        # character from the first supported entry of the first basis vector
        filtr: List[List[Vec]] = []
        for term in series_bases:
            from .linalg import intersect_spans

            filtr.append(intersect_spans(basis, term, ctx) if term else [])
        filtr.append([])
        for lvl in range(len(filtr) - 1):
            big, small = filtr[lvl], filtr[lvl + 1]
            if len(big) == len(small):
                continue
            combined, piv = echelon(small, ctx)
            for v in big:
                red = _reduce_vec(v, combined, piv, ctx)
                if is_zero_vec(red):
                    continue
                col = next(i for i, a in enumerate(red) if a != 0)
                red = vec_scale(red, ctx.inv(red[col]), ctx)
                combined, piv = echelon(combined + [red], ctx)
                direction = NilpotentElement.from_vec(ctx, r, red)
                char = _character_of(ctx, r, red, positions, torus_gens)
                weights.append(WeightSubgroup(direction, char, lvl + 1))

    weights.sort(key=lambda w: (w.height, w.direction.key()))
    if len(weights) != algebra.dim:
        raise ClosureError("weight subgroup count does not match dim U (bug)")

    root_idx = [
        i for i, w in enumerate(weights) if not w.character.is_trivial_on(torus_gens)
    ]
    lam_idx = [i for i in range(len(weights)) if i not in root_idx]

    T = group_closure(list(torus_gens), cap=cap) if torus_gens else ElementSet.identity_set(ctx, r)
    G = as_group(
        pairwise_product(Ugrp, T).with_gens(list(Ugrp.gens or []) + list(torus_gens)),
        cap=cap,
    )
    ident = GroupElement.identity(ctx, r)
    U_R = (
        group_closure(
            [g for i in root_idx for g in weights[i].points() if g != ident] or [ident],
            cap=cap,
        )
        if root_idx
        else ElementSet.identity_set(ctx, r)
    )
    U_Lam = (
        group_closure(
            [g for i in lam_idx for g in weights[i].points() if g != ident] or [ident],
            cap=cap,
        )
        if lam_idx
        else ElementSet.identity_set(ctx, r)
    )
    datum = RootDatum(
        U=Ugrp,
        T=T.with_gens(list(torus_gens)),
        G=G,
        algebra=algebra,
        weight_subgroups=weights,
        root_indices=root_idx,
        lambda_indices=lam_idx,
        U_R=U_R,
        U_Lambda=U_Lam,
    )
    if certify:
        _certify_datum(datum)
    return datum


def _reduce_vec(v, basis, pivots, ctx):
    for b, col in zip(basis, pivots):
        if v[col] != 0:
            v = vec_sub(v, vec_scale(b, v[col], ctx), ctx)
    return v


def _character_of(ctx, r, vec: Vec, positions, torus_gens) -> Character:
    support = [(i, j) for (i, j), c in zip(positions, vec) if c != 0]
    if not support:
        raise DomainError("zero direction vector")
    i, j = support[0]
    exps = [0] * r
    exps[i] += 1
    exps[j] -= 1
    char = Character(tuple(exps))
    for t in torus_gens:
        measured = ctx.mul(t.entry(i, i), ctx.inv(t.entry(j, j)))
        for (bi, bj) in support[1:]:
            other = ctx.mul(t.entry(bi, bi), ctx.inv(t.entry(bj, bj)))
            if other != measured:
                raise DomainError("weight vector mixes distinct torus characters (bug)")
        if char.evaluate(t) != measured:
            raise DomainError("character evaluation mismatch (bug)")
    return char


def ordered_product(sets: Sequence[ElementSet], ctx: FieldCtx, r: int) -> ElementSet:
    out = ElementSet.identity_set(ctx, r)
    for S in sets:
        out = pairwise_product(out, S)
    return out


def _certify_datum(datum: RootDatum):
    ctx, r = datum.U.ctx, datum.U.r
    weights = datum.weight_subgroups
    ggens = list(datum.G.gens or greedy_generators(datum.G))
    # tails are normal subgroups realizing the series
    for l in range(len(weights)):
        tail = ordered_product([w.points() for w in weights[l:]], ctx, r)
        expected = ctx.q ** (len(weights) - l)
        if len(tail) != expected:
            raise ClosureError(f"tail product R_{l+1}..R_d has size {len(tail)}, not {expected}")
        as_group(tail)
        for g in ggens:
            if not tail.conjugate_by(g).equals(tail):
                raise NormalityError(f"tail R_{l+1}..R_d is not normal in G")
    full = ordered_product([w.points() for w in weights], ctx, r)
    if not full.equals(datum.U):
        raise ClosureError("product of weight subgroups does not cover U")
    # property (2): R_j meets the later tail trivially
    for j in range(len(weights)):
        for l in range(j + 1, len(weights)):
            tail_basis = datum.tail_span(l)
            piv = echelon(tail_basis, ctx)[1]
            if in_span(weights[j].direction.vec(), tail_basis, piv, ctx):
                raise ClosureError("weight direction lies in a later tail")
    # series compatibility at prime-field points
    if ctx.a == 1:
        group_terms = lower_central_series(datum.U)
        lie_terms = datum.algebra.lie_lower_central_series()
        n = min(len(group_terms), len(lie_terms))
        for i in range(n):
            alg = NilpotentAlgebra(ctx, r, lie_terms[i])
            if not alg.exp_points(subfield_only=True).equals(group_terms[i]):
                raise ClosureError("algebraic and abstract central series disagree")


def standard_form(g: GroupElement, datum: RootDatum) -> StandardForm:
    """Unique coefficients of g along R_1..R_d plus its torus part."""
    ctx, r = datum.U.ctx, datum.U.r
    t = g.diag_part()
    if t not in datum.T:
        raise MembershipError("diagonal part lies outside the torus")
    u = g * t.inverse()
    if u not in datum.U:
        raise MembershipError("unipotent part lies outside U")
    coeffs: List[int] = []
    current = u
    basis = [w.direction for w in datum.weight_subgroups]
    for i, w in enumerate(basis):
        X = log(current)
        coords = express(X.vec(), [b.vec() for b in basis[i:]], ctx)
        if coords is None:
            raise MembershipError("log fell outside the expected tail span (bug)")
        s = coords[0]
        coeffs.append(s)
        current = exp(w.scale(s)).inverse() * current
    if not current.is_identity():
        raise MembershipError("factorization did not terminate at the identity (bug)")
    form = StandardForm(tuple(coeffs), t)
    recomposed = GroupElement.identity(ctx, r)
    for w, s in zip(datum.weight_subgroups, form.coeffs):
        recomposed = recomposed * exp(w.direction.scale(s))
    recomposed = recomposed * t
    if recomposed != g:
        raise MembershipError("standard-form recomposition failed (bug)")
    return form


def compute_cartan(datum: RootDatum, certify: bool = True) -> ElementSet:
    """Cartan subgroup E = T x U_Lambda, certified against the centralizer."""
    E = pairwise_product(datum.T, datum.U_Lambda)
    if certify:
        cu = centralizer(datum.U, datum.T)
        if not cu.equals(datum.U_Lambda):
            raise ClosureError("C_U(T) differs from U_Lambda")
        cg = centralizer(datum.G, datum.T)
        if not cg.equals(E):
            raise ClosureError("C_G(T) differs from T x U_Lambda")
    return E.with_gens(
        list(datum.T.gens or []) + list(datum.U_Lambda.gens or greedy_generators(datum.U_Lambda))
    )


def verify_ur_equals_ul(datum: RootDatum) -> Dict[str, object]:
    """U_R equals the last lower-central term of G, and G = U_R . E."""
    series = lower_central_series(datum.G)
    UL = series[-1]
    E = compute_cartan(datum, certify=False)
    product = pairwise_product(datum.U_R, E)
    holds = UL.equals(datum.U_R) and product.equals(datum.G)
    return {
        "holds": holds,
        "|U_L|": len(UL),
        "|U_R|": len(datum.U_R),
        "series_sizes": [len(s) for s in series],
        "G=U_R.E": product.equals(datum.G),
    }


def extended_root_kernel(datum: RootDatum, char: Character) -> ElementSet:
    """ker_G(alpha) for alpha extended to G by alpha(ut) = alpha(t)."""
    Tm = ElementSet.from_elements(
        [t for t in datum.T if char.evaluate(t) == 1]
    )
    return pairwise_product(datum.U, Tm)


def root_kernel(
    datum: RootDatum, subset: Sequence[int]
) -> Tuple[ElementSet, ElementSet, Dict[str, object]]:
    """T_m = intersection of torus kernels of the chosen roots, and G' = U T_m."""
    if not subset:
        raise DomainError("root subset must be nonempty")
    chars = [datum.weight_subgroups[i].character for i in subset]
    keep = [t for t in datum.T if all(c.evaluate(t) == 1 for c in chars)]
    Tm = as_group(ElementSet.from_elements(keep))
    Gp = as_group(
        pairwise_product(datum.U, Tm).with_gens(
            list(datum.U.gens or []) + list(Tm.gens or [])
        )
    )
    info: Dict[str, object] = {
        "dim_before": abelian_dim(datum.T),
        "dim_after": abelian_dim(Tm),
        "|T|": len(datum.T),
        "|T_m|": len(Tm),
    }
    if set(subset) >= set(datum.root_indices):
        info["nilpotent"] = is_nilpotent(Gp)
    return Tm, Gp, info


def pajama_check(w: WeightSubgroup, torus: ElementSet) -> Dict[str, object]:
    """|R(F_p)| <= p, and the conjugation character equals alpha(R)."""
    ctx = w.direction.ctx
    pts = w.subgroup().prime_field_points()
    size_ok = len(pts) <= ctx.p
    conj_ok = True
    x1 = exp(w.direction)
    for t in torus:
        conj = x1.conj(t)
        beta = express(log(conj).vec(), [w.direction.vec()], ctx)
        if beta is None or beta[0] != w.character.evaluate(t):
            conj_ok = False
            break
    return {
        "holds": size_ok and conj_ok,
        "|R(F_p)|": len(pts),
        "p": ctx.p,
        "conj_character_matches": conj_ok,
    }
