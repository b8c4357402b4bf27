"""Product-set calculus: growth measurements and the combinatorial set lemmas
as exact, witness-carrying checks.

Every checker returns a ``Verdict`` with the measured cardinalities it used,
so a failure (which would mean an implementation bug, the inequalities being
theorems) is debuggable from the report alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ClosureError, DomainError, IndexBoundError
from .groups import as_group, greedy_generators, group_closure, is_normal_under
from .matrix import GroupElement
from .sets import ElementSet, pairwise_product, product_set, product_set_depths

DEFAULT_INDEX_BOUND = 64


@dataclass
class Verdict:
    name: str
    holds: bool
    witness: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> Dict[str, object]:
        return {"name": self.name, "holds": self.holds, "witness": self.witness}


@dataclass
class GrowthReport:
    sizes: Dict[int, int]          # k -> |A_k|
    cube_size: int                 # |A*A*A| (ordered, no inverses)
    base_size: int                 # |A|
    ratios: Dict[int, str]         # k -> exact |A_k|/|A| as a fraction string
    verdicts: List[Verdict]

    def to_json(self) -> Dict[str, object]:
        return {
            "base_size": self.base_size,
            "cube_size": self.cube_size,
            "sizes": {str(k): v for k, v in sorted(self.sizes.items())},
            "ratios": {str(k): v for k, v in sorted(self.ratios.items())},
            "verdicts": [v.to_json() for v in self.verdicts],
        }


def triple_product(A: ElementSet) -> ElementSet:
    """A * A * A, ordered products without inverses or identity."""
    return pairwise_product(pairwise_product(A, A), A)


def growth_report(A: ElementSet, ks: Sequence[int], checks: Sequence[Verdict] = ()) -> GrowthReport:
    kmax = max(ks) if ks else 1
    depths = product_set_depths(A, kmax)
    sizes = {
        k: sum(1 for d in depths.values() if d <= k) for k in sorted(set(ks))
    }
    cube = len(triple_product(A))
    ratios = {k: str(Fraction(n, len(A))) for k, n in sizes.items()}
    return GrowthReport(
        sizes=sizes,
        cube_size=cube,
        base_size=len(A),
        ratios=ratios,
        verdicts=list(checks),
    )


# ---------------------------------------------------------------------------
# coset bookkeeping


def coset_key(x: GroupElement, H: ElementSet, left: bool = True) -> int:
    """Canonical key of the coset xH (left) or Hx."""
    coset = H.translate(x, left=left)
    return coset.sorted_keys()[0]


def cosets_met(A: ElementSet, H: ElementSet, left: bool = True) -> Dict[int, List[GroupElement]]:
    out: Dict[int, List[GroupElement]] = {}
    for a in A:
        out.setdefault(coset_key(a, H, left=left), []).append(a)
    return out


# ---------------------------------------------------------------------------
# individual lemma checks


def check_tripling(A: ElementSet, k: int) -> Verdict:
    """|A_3|/|A| <= (3|AAA|/|A|)^3 and |A_k|/|A| <= (|A_3|/|A|)^(k-2), exactly."""
    if k <= 2:
        raise DomainError("tripling check needs k > 2")
    depths = product_set_depths(A, k)
    nA = len(A)
    n3 = sum(1 for d in depths.values() if d <= 3)
    nk = len(depths)
    cube = len(triple_product(A))
    part1 = n3 * nA**2 <= 27 * cube**3
    part2 = nk * nA ** (k - 3) <= n3 ** (k - 2) if k >= 3 else True
    return Verdict(
        "tripling",
        part1 and part2,
        {"|A|": nA, "|AAA|": cube, "|A_3|": n3, "k": k, f"|A_k|": nk,
         "part1": part1, "part2": part2},
    )


def check_olson(A: ElementSet, B: ElementSet, G: ElementSet) -> Verdict:
    """|AB| >= min(|B| + |A|/2, |G|) for 1 in A, <A> = G, B nonempty."""
    ident = GroupElement.identity(A.ctx, A.r)
    if ident not in A:
        raise DomainError("Olson check requires the identity in A")
    if len(B) == 0:
        raise DomainError("Olson check requires nonempty B")
    gen = group_closure(A.elements())
    if not gen.equals(G):
        raise ClosureError("A does not generate the supplied G")
    nAB = len(pairwise_product(A, B))
    holds = 2 * nAB >= min(2 * len(B) + len(A), 2 * len(G))
    return Verdict(
        "olson", holds, {"|A|": len(A), "|B|": len(B), "|G|": len(G), "|AB|": nAB}
    )


def check_odt(A: ElementSet, B: ElementSet, H: ElementSet) -> Verdict:
    """|A.B| >= l |B cap H| where l = #left cosets of H meeting A."""
    l = len(cosets_met(A, H))
    nAB = len(pairwise_product(A, B))
    nBH = len(B.intersect(H))
    return Verdict("odt", nAB >= l * nBH, {"l": l, "|AB|": nAB, "|B cap H|": nBH})


def check_duffy(A: ElementSet, H: ElementSet) -> Verdict:
    """|A^-1 A cap H| >= |A| / l."""
    l = len(cosets_met(A, H))
    nE = len(pairwise_product(A.inverses(), A).intersect(H))
    return Verdict("duffy", nE * l >= len(A), {"l": l, "|A^-1A cap H|": nE, "|A|": len(A)})


def check_b1(A: ElementSet, H: ElementSet, k: int) -> Verdict:
    """|A_(k+1)| >= |A_k cap H| / |A^-1 A cap H| * |A| for k >= 2."""
    if k < 2:
        raise DomainError("the subgroup step bound needs k >= 2")
    depths = product_set_depths(A, k + 1)
    Ak = ElementSet(A.ctx, A.r, (ky for ky, d in depths.items() if d <= k))
    nAk1 = len(depths)
    nAkH = len(Ak.intersect(H))
    nE = len(pairwise_product(A.inverses(), A).intersect(H))
    return Verdict(
        "b1",
        nAk1 * nE >= nAkH * len(A),
        {"k": k, "|A_(k+1)|": nAk1, "|A_k cap H|": nAkH, "|A^-1A cap H|": nE, "|A|": len(A)},
    )


def check_b2(A1: ElementSet, A2: ElementSet, N: ElementSet) -> Verdict:
    """|(A1 u A2)_4| >= |pi(A1 A2)| / |pi(A1)| * |A1| for N normal."""
    union = A1.union(A2)
    n4 = len(product_set(union, 4))
    pA1 = {coset_key(a, N) for a in A1}
    pA12 = {coset_key(a, N) for a in pairwise_product(A1, A2)}
    holds = n4 * len(pA1) >= len(pA12) * len(A1)
    return Verdict(
        "b2", holds,
        {"|(A1uA2)_4|": n4, "|pi(A1A2)|": len(pA12), "|pi(A1)|": len(pA1), "|A1|": len(A1)},
    )


def check_b3(A: ElementSet, N: ElementSet, R: ElementSet, C: Fraction) -> Verdict:
    """Mass in RN/N at least 1/C forces |A_3 cap RN| >= |A|/C (R = R^-1)."""
    if not R.inverses().equals(R):
        raise DomainError("R must be symmetric")
    RN = pairwise_product(R, N)
    rn_keys = {coset_key(x, N) for x in R}
    a_keys = {coset_key(a, N) for a in A}
    lhs_mass = Fraction(len(a_keys & rn_keys), len(a_keys))
    premise = lhs_mass >= Fraction(1, 1) / C
    n3RN = len(product_set(A, 3).intersect(RN))
    conclusion = Fraction(n3RN) >= Fraction(len(A)) / C
    return Verdict(
        "b3",
        (not premise) or conclusion,
        {"premise_mass": str(lhs_mass), "C": str(C), "|A_3 cap RN|": n3RN, "|A|": len(A)},
    )


def check_b4(A: ElementSet, G: ElementSet) -> Verdict:
    """|A| > |G|/2 forces A.A = G."""
    premise = 2 * len(A) > len(G)
    conclusion = pairwise_product(A, A).equals(G) if premise else True
    return Verdict("b4", conclusion, {"|A|": len(A), "|G|": len(G), "premise": premise})


def build_avoiding_subset(A: ElementSet, R: ElementSet) -> Tuple[ElementSet, Verdict]:
    """Y subset of A, |Y| >= |A| / |A^-1 A cap (R u {1})|, with Y^-1 Y avoiding R.

    Greedy in canonical order; greedy maximality gives the pigeonhole bound.
    """
    if not R.inverses().equals(R):
        raise DomainError("R must be symmetric")
    ident = GroupElement.identity(A.ctx, A.r)
    picked: List[GroupElement] = []
    for a in A:
        ok = True
        for y in picked:
            d = y.inverse() * a
            if not d.is_identity() and d in R:
                ok = False
                break
        if ok:
            picked.append(a)
    Y = ElementSet.from_elements(picked)
    E = pairwise_product(A.inverses(), A).intersect(
        R.union(ElementSet.single(ident))
    )
    size_ok = len(Y) * max(len(E), 1) >= len(A)
    avoid_ok = True
    for y1 in Y:
        for y2 in Y:
            d = y1.inverse() * y2
            if not d.is_identity() and d in R:
                avoid_ok = False
    return Y, Verdict(
        "b5", size_ok and avoid_ok,
        {"|Y|": len(Y), "|A|": len(A), "|A^-1A cap R u 1|": len(E),
         "size_ok": size_ok, "avoid_ok": avoid_ok},
    )


def check_duffy2(A: ElementSet, H: ElementSet) -> Tuple[List[GroupElement], Verdict]:
    """For normal H: l translates a_i (A A^-1 cap H) covering A."""
    if not is_normal_under(H, greedy_generators(group_closure(A.elements()))):
        # normality is relative to <A> u H's ambient; check against A's closure
        pass
    met = cosets_met(A, H)
    reps = [min(v, key=lambda g: g.key()) for v in met.values()]
    reps.sort(key=lambda g: g.key())
    B = pairwise_product(A, A.inverses()).intersect(H)
    covered = set()
    for a in reps:
        covered.update(B.translate(a, left=True).keys)
    holds = A.keys <= covered and len(reps) == len(met)
    return reps, Verdict(
        "duffy2", holds, {"l": len(reps), "|B|": len(B), "|A|": len(A)}
    )


def check_ll(A: ElementSet, B: ElementSet, R: ElementSet, Rp: ElementSet) -> Verdict:
    """|AB| >= |A cap R| |B cap R'| / |A A^-1 cap R cap R'|."""
    nAB = len(pairwise_product(A, B))
    nAR = len(A.intersect(R))
    nBRp = len(B.intersect(Rp))
    nE = len(pairwise_product(A, A.inverses()).intersect(R).intersect(Rp))
    return Verdict(
        "ll", nAB * max(nE, 1) >= nAR * nBRp,
        {"|AB|": nAB, "|A cap R|": nAR, "|B cap R'|": nBRp, "|AA^-1 cap R cap R'|": nE},
    )


def check_lm(A: ElementSet, R: ElementSet, a: GroupElement) -> Verdict:
    """|A_4| >= |A cap R|^2 / |A A^-1 cap R cap aRa^-1|."""
    if a not in A:
        raise DomainError("a must be an element of A")
    n4 = len(product_set(A, 4))
    nAR = len(A.intersect(R))
    Ra = R.conjugate_by(a)
    nE = len(pairwise_product(A, A.inverses()).intersect(R).intersect(Ra))
    return Verdict(
        "lm", n4 * max(nE, 1) >= nAR**2,
        {"|A_4|": n4, "|A cap R|": nAR, "|AA^-1 cap R cap aRa^-1|": nE},
    )


# ---------------------------------------------------------------------------
# Schreier and bounded-index transfer


def schreier_generators(A: ElementSet, H: ElementSet, G: ElementSet) -> Tuple[ElementSet, Verdict]:
    """A_3 cap H, with the certified closure identity <A> = A . <A_3 cap H>."""
    Hgrp = as_group(H)
    if len(G) % len(H) != 0:
        raise ClosureError("H does not divide G")
    met_A = set(cosets_met(A, H))
    index = len(G) // len(H)
    if len(met_A) != index:
        raise DomainError(
            f"AH/H covers {len(met_A)} of {index} cosets; precondition AH/H = G/H fails"
        )
    A3H = product_set(A, 3).intersect(H)
    genA = group_closure(A.elements())
    inner = group_closure(A3H.elements()) if len(A3H) else ElementSet.identity_set(A.ctx, A.r)
    lifted = pairwise_product(A, inner)
    holds = lifted.equals(genA)
    return A3H, Verdict(
        "schreier", holds,
        {"|A_3 cap H|": len(A3H), "|<A>|": len(genA), "|A.<A_3 cap H>|": len(lifted)},
    )


def lift_index_k(A: ElementSet, H: ElementSet, index: int) -> Tuple[Dict[int, GroupElement], Dict[int, int]]:
    """Coset reps of <A>/H found inside A_k for k = index, canonical per coset."""
    depths = product_set_depths(A, index)
    reps: Dict[int, GroupElement] = {}
    for key in sorted(depths):
        g = GroupElement.from_key(A.ctx, A.r, key)
        ck = coset_key(g, H)
        if ck not in reps:
            reps[ck] = g
    return reps, depths


def bounded_index_transfer(
    A: ElementSet,
    H: ElementSet,
    index_bound: int = DEFAULT_INDEX_BOUND,
) -> Tuple[ElementSet, ElementSet, Verdict]:
    """(A_H, J) for a normal finite-index H: a symmetric transfer set J in A_k
    and A_H inside A_(5k+1) cap H with the four covering properties certified."""
    GA = group_closure(A.elements())
    if not H.issubset(GA):
        raise DomainError("H must sit inside <A>")
    gens = list(GA.gens or A.elements())
    if not is_normal_under(H, gens):
        raise DomainError("H must be normal in <A>")
    index = len(GA) // len(H)
    if index > index_bound:
        raise IndexBoundError(f"index {index} exceeds bound {index_bound}")
    k = max(index, 1)
    reps, depths = lift_index_k(A, H, index)
    if len(reps) != index:
        raise DomainError("coset representatives not reached at depth = index")
    ident = GroupElement.identity(A.ctx, A.r)
    jset: Dict[int, GroupElement] = {ident.key(): ident}
    for g in reps.values():
        jset[g.key()] = g
        gi = g.inverse()
        jset[gi.key()] = gi
    J = ElementSet(A.ctx, A.r, jset.keys())

    def bar(g: GroupElement) -> GroupElement:
        ck = coset_key(g, H)
        cands = [j for j in J if coset_key(j, H) == ck]
        if not cands:
            raise DomainError("bar() fell outside J's cosets")
        return min(cands, key=lambda x: x.key())

    # C_g = g^-1 (A cap gH)
    cg: Dict[int, ElementSet] = {}
    for g in J:
        hit = [g.inverse() * a for a in A if coset_key(a, H) == coset_key(g, H)]
        if hit:
            cg[g.key()] = ElementSet.from_elements(hit)
    J2 = pairwise_product(J, J)
    ah_keys = set()
    for g2 in J2:
        g2i = g2.inverse()
        for gk, cset in cg.items():
            both = cset.union(cset.inverses())
            ah_keys.update(both.conjugate_by(g2).keys)
        b = bar(g2i)
        ah_keys.add((b * g2).key())
        ah_keys.add((g2 * b).key())
    A_H = ElementSet(A.ctx, A.r, ah_keys).intersect(H)

    # certify the four contract properties
    depth_all = product_set_depths(A, 5 * k + 1)
    in_budget = all(key in depth_all for key in A_H.keys)
    covering = set()
    for g in J:
        covering.update(A_H.translate(g, left=True).keys)
    covers_A = A.keys <= covering
    HA = group_closure(A_H.elements()) if len(A_H) else ElementSet.identity_set(A.ctx, A.r)
    union_keys = set()
    for g in J:
        union_keys.update(HA.translate(g, left=True).keys)
    covers_group = union_keys == set(GA.keys)
    AH3 = product_set(A_H, 3) if len(A_H) else ElementSet.identity_set(A.ctx, A.r)
    conj_ok = all(A_H.conjugate_by(g).issubset(AH3) for g in J)
    verdict = Verdict(
        "bounded_index_transfer",
        in_budget and covers_A and covers_group and conj_ok,
        {"index": index, "k": k, "|J|": len(J), "|A_H|": len(A_H),
         "in_budget": in_budget, "covers_A": covers_A,
         "covers_group": covers_group, "conj_ok": conj_ok},
    )
    return A_H, J, verdict


def coset_cover_intersection(
    A: ElementSet, subgroups: Sequence[ElementSet]
) -> Verdict:
    """A meets at most prod(n_j) cosets of the intersection, n_j per subgroup."""
    counts = [len(cosets_met(A, N)) for N in subgroups]
    inter = subgroups[0]
    for N in subgroups[1:]:
        inter = inter.intersect(N)
    got = len(cosets_met(A, inter))
    bound = 1
    for c in counts:
        bound *= c
    return Verdict(
        "coset_cover", got <= bound, {"counts": counts, "intersection_cosets": got}
    )
