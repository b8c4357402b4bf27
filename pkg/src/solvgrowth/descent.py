"""Descent down the lower central series: capture U_R(K) inside a bounded
product set.

Starting from the trichotomy's captured subgroup modulo [U, U], the level
machinery re-covers the root-subgroup products at every height, repairs
containment with commutator maps by an element outside all root kernels,
and certifies U_R(K) elementwise inside A_k with the product length of every
stage recorded.  Prime fields only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import DomainError, HypothesisError, SearchCapError
from .groups import (
    as_group,
    greedy_generators,
    group_closure,
    lower_central_series,
)
from .matrix import GroupElement
from .roots import RootDatum, compute_cartan, extended_root_kernel, standard_form
from .sets import ElementSet, pairwise_product, product_set, product_set_depths

DEFAULT_KMAX = 4096


class DescentAbort(HypothesisError):
    """Descent hypotheses failed mid-run; carries the stage and evidence."""

    def __init__(self, stage: str, info: Dict[str, object]):
        super().__init__(f"descent aborted at {stage}: {info}")
        self.stage = stage
        self.info = info


@dataclass
class Tracked:
    """A set of captured elements with its product-length budget."""

    elems: ElementSet
    k: int


@dataclass
class DescentContext:
    """Everything the level machinery needs about G = U T and A."""

    datum: RootDatum
    A: ElementSet
    C: Fraction
    U_series: List[ElementSet] = field(default_factory=list)
    V_series: List[ElementSet] = field(default_factory=list)
    layers: Dict[int, List] = field(default_factory=dict)
    layer_products: Dict[int, ElementSet] = field(default_factory=dict)
    E: Optional[ElementSet] = None
    kmax: int = DEFAULT_KMAX
    trace: List[Dict[str, object]] = field(default_factory=list)

    @classmethod
    def build(cls, datum: RootDatum, A: ElementSet, C: Fraction, kmax: int = DEFAULT_KMAX) -> "DescentContext":
        if datum.U.ctx.a != 1:
            raise DomainError("descent applies over prime fields only")
        ctx, r = datum.U.ctx, datum.U.r
        useries = lower_central_series(datum.U)
        if len(useries[-1]) != 1:
            raise DomainError("U is not nilpotent (bug)")
        useries = _dedup_tail(useries)
        vseries = _dedup_tail(lower_central_series(datum.U_R))
        layers = datum.root_layers()
        layer_products: Dict[int, ElementSet] = {}
        for h, ws in layers.items():
            prod = ElementSet.identity_set(ctx, r)
            for w in ws:
                prod = pairwise_product(prod, w.points())
            layer_products[h] = prod
        E = compute_cartan(datum, certify=False)
        return cls(
            datum=datum,
            A=A,
            C=C,
            U_series=useries,
            V_series=vseries,
            layers=layers,
            layer_products=layer_products,
            E=E,
            kmax=kmax,
        )

    def u_term(self, j: int) -> ElementSet:
        """U^j(K); trivial past the end of the series."""
        if j < len(self.U_series):
            return self.U_series[j]
        return self.U_series[-1]

    def v_term(self, j: int) -> ElementSet:
        if j < len(self.V_series):
            return self.V_series[j]
        return self.V_series[-1]

    @property
    def top_level(self) -> int:
        return len(self.U_series) - 1

    def log(self, stage: str, **info):
        entry = {"stage": stage}
        entry.update(info)
        self.trace.append(entry)


def _dedup_tail(series: List[ElementSet]) -> List[ElementSet]:
    out = [series[0]]
    for term in series[1:]:
        if term.equals(out[-1]):
            continue
        out.append(term)
    if len(out[-1]) != 1:
        raise DomainError("series does not reach the trivial group")
    return out


def _coset_key(x: GroupElement, N: ElementSet) -> int:
    return N.translate(x, left=True).sorted_keys()[0]


def _covers_mod(
    elems: Sequence[GroupElement], targets: ElementSet, N: ElementSet
) -> bool:
    have = {_coset_key(e, N) for e in elems}
    need = {_coset_key(t, N) for t in targets}
    return need <= have


# ---------------------------------------------------------------------------
# hypotheses (kernel thinness and no-growth), per the descent section


def check_hypotheses(
    A: ElementSet, datum: RootDatum, C: Fraction, kdepth: int = 3
) -> Dict[str, object]:
    """Measure the two descent hypotheses up to product length kdepth.

    (1) |A_k cap ker_G(alpha(R))(K)| <= |A| / C for every root R;
    (2) |A_k| <= C |A|.
    Returns a verdict with the first failure identified, if any.
    """
    closure = group_closure(A.elements())
    if not datum.U.issubset(closure):
        return {"holds": False, "failure": "U(K) not inside <A>"}
    depths = product_set_depths(A, kdepth)
    nA = len(A)
    kernels = {}
    for i in datum.root_indices:
        c = datum.weight_subgroups[i].character
        if c.exponents not in kernels:
            kernels[c.exponents] = extended_root_kernel(datum, c)
    for k in range(1, kdepth + 1):
        Ak = ElementSet(A.ctx, A.r, (ky for ky, d in depths.items() if d <= k))
        if Fraction(len(Ak)) > C * nA:
            return {
                "holds": False,
                "failure": "growth",
                "k": k,
                "|A_k|": len(Ak),
                "|A|": nA,
            }
        for exps, ker in kernels.items():
            mass = len(Ak.intersect(ker))
            if Fraction(mass) > Fraction(nA) / C:
                return {
                    "holds": False,
                    "failure": "kernel_mass",
                    "k": k,
                    "char": list(exps),
                    "mass": mass,
                    "|A|": nA,
                }
    return {"holds": True, "kdepth": kdepth, "|A|": nA}


# ---------------------------------------------------------------------------
# level machinery


def ascend_products(dctx: DescentContext, captured: Tracked, j: int) -> Tracked:
    """From layer covers at heights <= j, build a full cover of U_R mod U^j.

    Climbs the derived-and-central structure of U_R: first covers
    U_R mod [U_R, U_R] U^j by composing layer representatives along the
    series of U, then climbs the lower central series of U_R with explicit
    commutator products, certifying coverage at every stage.
    """
    ctx, r = dctx.A.ctx, dctx.A.r
    Nj = dctx.u_term(j)
    UR = dctx.datum.U_R
    _check_capture_contract(dctx, captured, j)
    V1 = dctx.v_term(1)
    V1Nj = as_group(pairwise_product(V1, Nj))

    # stage A: cover U_R mod V1 U^i for i = 1..j by product extension
    cover: Dict[int, Tuple[GroupElement, int]] = {}
    base = [(e, captured.k) for e in captured.elems]
    for i in range(1, len(dctx.U_series)):
        Ni = as_group(pairwise_product(V1, dctx.u_term(min(i, j))))
        new_cover: Dict[int, Tuple[GroupElement, int]] = {}
        need = {_coset_key(u, Ni): u for u in UR}
        # seed with existing covers and raw captured elements
        candidates = list(cover.values()) + base
        for (w, kw) in candidates:
            ck = _coset_key(w, Ni)
            if ck in need and (ck not in new_cover or kw < new_cover[ck][1]):
                new_cover[ck] = (w, kw)
        missing = [ck for ck in need if ck not in new_cover]
        if missing:
            for ck in list(missing):
                u = need[ck]
                found = False
                for (w, kw) in candidates:
                    for (a, ka) in base:
                        cand = w * a
                        if _coset_key(cand, Ni) == ck:
                            new_cover[ck] = (cand, kw + ka)
                            found = True
                            break
                    if found:
                        break
                if not found:
                    raise DescentAbort(
                        "ascend/series-cover",
                        {"level": i, "missing_cosets": len(missing)},
                    )
        cover = new_cover
        if dctx.u_term(min(i, j)).equals(Nj):
            break

    # stage B: climb the lower central series of U_R with commutator products
    for i in range(2, len(dctx.V_series)):
        Vi = dctx.v_term(i)
        ViNj = as_group(pairwise_product(Vi, Nj))
        prevN = as_group(pairwise_product(dctx.v_term(i - 1), Nj))
        need = {_coset_key(u, ViNj): u for u in UR}
        have: Dict[int, Tuple[GroupElement, int]] = {}
        for ck, (w, kw) in cover.items():
            nk = _coset_key(w, ViNj)
            if nk not in have or kw < have[nk][1]:
                have[nk] = (w, kw)
        # commutator family f^i: pairs from the current cover
        deep = [
            (w, kw)
            for (w, kw) in cover.values()
            if _coset_key(w, as_group(pairwise_product(dctx.v_term(i - 2), Nj)))
            == _coset_key(GroupElement.identity(ctx, r), as_group(pairwise_product(dctx.v_term(i - 2), Nj)))
            or w in pairwise_product(dctx.v_term(i - 2), Nj)
        ]
        comms: List[Tuple[GroupElement, int]] = []
        for (h, kh) in cover.values():
            for (w, kw) in deep:
                c = h.comm(w)
                if not c.is_identity():
                    comms.append((c, 2 * (kh + kw)))
        # greedy product search over commutators to fill the missing cosets
        frontier = list(have.values())
        guard = 0
        while set(need) - set(have) and guard <= 4 * r * r:
            guard += 1
            progressed = False
            for (w, kw) in list(have.values()):
                for (c, kc) in comms:
                    cand = w * c
                    ck = _coset_key(cand, ViNj)
                    if ck in need and ck not in have:
                        have[ck] = (cand, kw + kc)
                        progressed = True
            if not progressed:
                break
        if set(need) - set(have):
            raise DescentAbort(
                "ascend/commutator-climb",
                {"series_index": i, "missing": len(set(need) - set(have))},
            )
        cover = have

    elems = ElementSet.from_elements([w for (w, _) in cover.values()])
    kmax = max(k for (_, k) in cover.values())
    if not _covers_mod(list(elems), UR, Nj):
        raise DescentAbort("ascend/final", {"j": j})
    URNj = pairwise_product(UR, Nj)
    for e in elems:
        if e not in URNj:
            raise DescentAbort("ascend/containment", {"j": j})
    dctx.log("ascend_products", j=j, k=kmax, cover=len(elems))
    return Tracked(elems, kmax)


def _check_capture_contract(dctx: DescentContext, captured: Tracked, j: int):
    ctx, r = dctx.A.ctx, dctx.A.r
    URNj = pairwise_product(dctx.datum.U_R, dctx.u_term(j))
    for e in captured.elems:
        if e not in URNj:
            raise DescentAbort("contract/containment", {"j": j})
    for i in range(1, j + 1):
        Pi = dctx.layer_products.get(i)
        if Pi is None or len(Pi) == 1:
            continue
        if not _covers_mod(list(captured.elems), Pi, dctx.u_term(i)):
            raise DescentAbort("contract/layer-cover", {"i": i, "j": j})


def normalize_element(dctx: DescentContext, working: Tracked, j: int) -> Tracked:
    """Zero the root coordinates of height < j on every element.

    Uses the captured cover of U_R to multiply away low-height root
    coordinates; the result represents the same U-cosets and lands in the
    Cartan-times-U^(j-1) subgroup.
    """
    if j <= 1:
        return working
    datum = dctx.datum
    cover_elems = list(working.elems)
    out: List[Tuple[GroupElement, int]] = []
    low_roots = [
        i
        for i in datum.root_indices
        if datum.weight_subgroups[i].height < j
    ]
    for g in dctx.A:
        cur, klen = g, 1
        ok = True
        for i in range(1, j):
            sf = standard_form(cur, datum)
            bad = [
                idx
                for idx in low_roots
                if datum.weight_subgroups[idx].height <= i and sf.coeffs[idx] != 0
            ]
            if not bad:
                continue
            fixed = False
            for h in cover_elems:
                cand = h * cur
                sfc = standard_form(cand, datum)
                if all(
                    sfc.coeffs[idx] == 0
                    for idx in low_roots
                    if datum.weight_subgroups[idx].height <= i
                ):
                    cur, klen = cand, klen + working.k
                    fixed = True
                    break
            if not fixed:
                ok = False
                break
        if not ok:
            raise DescentAbort("normalize/strip", {"j": j})
        sf = standard_form(cur, datum)
        if any(sf.coeffs[idx] != 0 for idx in low_roots):
            raise DescentAbort("normalize/residual", {"j": j})
        out.append((cur, klen))
    elems = ElementSet.from_elements([g for g, _ in out])
    kmax = max(k for _, k in out)
    dctx.log("normalize_element", j=j, k=kmax, size=len(elems))
    return Tracked(elems, kmax)


def _element_outside_kernels(dctx: DescentContext) -> GroupElement:
    datum = dctx.datum
    chars = {datum.weight_subgroups[i].character.exponents: datum.weight_subgroups[i].character
             for i in datum.root_indices}
    pool = list(dctx.A) + list(product_set(dctx.A, 2))
    for g in sorted(pool, key=lambda x: x.key()):
        t = g.diag_part()
        if all(c.evaluate(t) != 1 for c in chars.values()):
            return g
    raise HypothesisError("no element outside every root kernel (kernel mass)")


def capture_level(
    dctx: DescentContext, j: int, base: Optional[Tracked] = None
) -> Tracked:
    """A set inside A_k whose image mod U^j sits in U_R and covers every
    layer product (S_1^i ... S_(e_i)^i)(K) mod U^i for i <= j.

    ``base`` may carry a level-1 cover produced upstream (the driver's
    trichotomy); otherwise A itself is inspected for a direct witness before
    the trichotomy is invoked to manufacture one.
    """
    from .dichotomy import abelian_trichotomy

    ctx, r = dctx.A.ctx, dctx.A.r
    datum = dctx.datum
    if j == 1:
        N1 = dctx.u_term(1)
        if base is None:
            URN1 = pairwise_product(datum.U_R, N1)
            direct = [
                g
                for g in _symmetrized_ball(dctx.A)
                if g in URN1
            ]
            if direct and _covers_mod(direct, datum.U_R, N1):
                base = Tracked(ElementSet.from_elements(direct), 1)
        if base is None:
            res = abelian_trichotomy(datum, dctx.A, dctx.C)
            if res.branch != "normal_subgroup":
                raise DescentAbort(
                    "level1/trichotomy", {"branch": res.branch, **res.witness}
                )
            base = Tracked(res.captured, res.captured_k)
        if not _covers_mod(list(base.elems), datum.U_R, N1):
            raise DescentAbort("level1/cover", {})
        _check_capture_contract(dctx, base, 1)
        dctx.log("capture_level", j=1, k=base.k, size=len(base.elems))
        return base

    below = capture_level(dctx, j - 1, base)
    X = ascend_products(dctx, below, j - 1)
    g0 = _element_outside_kernels(dctx)

    # Cartan-side subgroup H = E U^(j-1), its scene, and the inner trichotomy
    Ujm1 = dctx.u_term(j - 1)
    H_set = as_group(pairwise_product(dctx.E, Ujm1))
    UH = as_group(
        pairwise_product(datum.U_Lambda, Ujm1).with_gens(
            list(datum.U_Lambda.gens or greedy_generators(datum.U_Lambda))
            + list(Ujm1.gens or greedy_generators(Ujm1))
        )
    )
    # Schreier: (A u X) H / H = G / H, then work with products inside H
    AX = dctx.A.union(X.elems)
    kAX = max(1, X.k)
    cosets_G = {_coset_key(g, H_set) for g in _coset_sample(datum.G, H_set)}
    cosets_AX = {_coset_key(g, H_set) for g in AX}
    if cosets_AX != cosets_G:
        raise DescentAbort("schreier/cosets", {"got": len(cosets_AX), "need": len(cosets_G)})
    depths4 = product_set_depths(AX, 4)
    A4H = ElementSet(
        ctx, r, (ky for ky in depths4 if GroupElement.from_key(ctx, r, ky) in H_set)
    )
    scene_A = Tracked(A4H, 4 * kAX)

    from .roots import weight_decompose

    datum_H = weight_decompose(UH, datum.torus_gens(), certify=False)
    resH = abelian_trichotomy(datum_H, scene_A.elems, dctx.C)
    if resH.branch != "normal_subgroup":
        raise DescentAbort("inner-trichotomy", {"branch": resH.branch, **resH.witness})
    inner = Tracked(resH.captured, resH.captured_k * scene_A.k)

    # cover the height-j layer product modulo U_Lambda
    Pj = dctx.layer_products.get(j, ElementSet.identity_set(ctx, r))
    pool = inner.elems.union(scene_A.elems)
    cover_j = _bfs_cover(
        dctx, pool, max(inner.k, scene_A.k), Pj, datum.U_Lambda, stage="layer-mod-lambda"
    )

    # iterate the commutator map to push the U_Lambda error into U^j
    Nj = dctx.u_term(j)
    kg = 2
    current = cover_j
    for m in range(1, r + 1):
        errN = as_group(pairwise_product(_lambda_depth(dctx, m), Nj))
        if _covers_mod([w for w, _ in current], Pj, Nj):
            break
        nxt = [(g0 * w * g0.inverse() * w.inverse(), 2 * (kg + kw)) for (w, kw) in current]
        current = nxt
        if not _covers_mod([w for w, _ in current], Pj, errN):
            raise DescentAbort("octopus/iteration", {"m": m, "j": j})
    if not _covers_mod([w for w, _ in current], Pj, Nj):
        raise DescentAbort("octopus/final", {"j": j})

    # repair heights < j: the commutator map sends U_R U^(j-1) into U_R U^j
    low = [(g0 * x * g0.inverse() * x.inverse(), 2 * (kg + X.k)) for x in X.elems]
    assembled = [w for w, _ in current] + [w for w, _ in low]
    kmax = max(
        [kw for _, kw in current] + [kw for _, kw in low]
    )
    out = Tracked(ElementSet.from_elements(assembled), kmax)
    _check_capture_contract(dctx, out, j)
    dctx.log("capture_level", j=j, k=out.k, size=len(out.elems))
    return out


def _symmetrized_ball(A: ElementSet) -> List[GroupElement]:
    from .sets import symmetrized

    return symmetrized(A, with_identity=True)


def _lambda_depth(dctx: DescentContext, m: int) -> ElementSet:
    inter = dctx.datum.U_Lambda.intersect(dctx.u_term(m))
    return as_group(inter) if len(inter) else inter


def _coset_sample(G: ElementSet, H: ElementSet) -> List[GroupElement]:
    # one representative per H-coset is enough to enumerate cosets of G/H
    seen: Dict[int, GroupElement] = {}
    for g in G:
        ck = _coset_key(g, H)
        if ck not in seen:
            seen[ck] = g
    return list(seen.values())


def _bfs_cover(
    dctx: DescentContext,
    pool: ElementSet,
    pool_k: int,
    targets: ElementSet,
    N: ElementSet,
    stage: str,
) -> List[Tuple[GroupElement, int]]:
    """Products of pool elements covering targets' N-cosets, lengths tracked."""
    Ngrp = as_group(N) if len(N) else N
    need = {_coset_key(t, Ngrp): t for t in targets}
    have: Dict[int, Tuple[GroupElement, int]] = {}
    ident = GroupElement.identity(pool.ctx, pool.r)
    frontier: List[Tuple[GroupElement, int]] = [(ident, 0)]
    ik = _coset_key(ident, Ngrp)
    if ik in need:
        have[ik] = (ident, 0)
    seen = {ident.key()}
    rounds = 0
    while set(need) - set(have) and rounds < 3 * len(targets) + 8:
        rounds += 1
        nxt: List[Tuple[GroupElement, int]] = []
        for (w, kw) in frontier:
            for a in pool:
                cand = w * a
                if cand.key() in seen:
                    continue
                seen.add(cand.key())
                kc = kw + pool_k
                nxt.append((cand, kc))
                ck = _coset_key(cand, Ngrp)
                if ck in need and ck not in have:
                    have[ck] = (cand, kc)
        if not nxt:
            break
        frontier = nxt
    if set(need) - set(have):
        raise DescentAbort(stage, {"missing": len(set(need) - set(have))})
    return list(have.values())


def capture_UR(
    dctx: DescentContext, base: Optional[Tracked] = None
) -> Tuple[ElementSet, int, Dict[str, object]]:
    """Certify U_R(K) inside A_k: every element reached by an explicit
    product of A-elements, with both the constructed budget and the measured
    minimal k reported."""
    datum = dctx.datum
    ctx, r = dctx.A.ctx, dctx.A.r
    if not datum.root_indices:
        return ElementSet.identity_set(ctx, r), 0, {"trivial": True, "k_budget": 0}
    top = dctx.top_level
    captured = capture_level(dctx, top, base)
    final = ascend_products(dctx, captured, top)
    if not final.elems.keys >= datum.U_R.keys:
        raise DescentAbort("capture/final", {"got": len(final.elems)})
    depths = product_set_depths(dctx.A, None)
    k_real = 0
    for u in datum.U_R:
        d = depths.get(u.key())
        if d is None:
            raise DescentAbort("capture/membership", {"element": repr(u)})
        k_real = max(k_real, d)
    k_budget = final.k
    if k_real > dctx.kmax:
        covered = sum(1 for u in datum.U_R if depths.get(u.key(), dctx.kmax + 1) <= dctx.kmax)
        raise SearchCapError(
            f"k exceeds cap: {k_real} > {dctx.kmax} "
            f"(coverage {covered}/{len(datum.U_R)})"
        )
    info = {
        "k_budget": k_budget,
        "k_realized": k_real,
        "|U_R|": len(datum.U_R),
        "trace": list(dctx.trace),
    }
    dctx.log("capture_UR", k_budget=k_budget, k_realized=k_real)
    return datum.U_R, k_real, info
