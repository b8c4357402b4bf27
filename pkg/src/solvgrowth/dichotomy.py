"""The growth-or-structure driver and its supporting reductions.

Pipeline for a subset A of an upper-triangular Borel over a prime field:
conjugate to split position (Schur-Zassenhaus), build the containing group
G = U T with U(K) inside <A>, iterate the kernel-mass reduction, run the
abelian trichotomy on G modulo the derived subgroup of U, descend to capture
U_R(K), and emit a certificate that ``verify_certificate`` re-derives from
scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    CharacteristicError,
    ClosureError,
    DomainError,
    HypothesisError,
    NormalityError,
    SearchCapError,
)
from .field import FieldCtx
from .groups import (
    QuotientGroup,
    as_group,
    greedy_generators,
    group_closure,
    is_normal_under,
    lower_central_series,
    abstract_is_nilpotent,
)
from .matrix import GroupElement
from .pivot import (
    ActionCtx,
    Automorphism,
    PivotOutcome,
    TableGroup,
    conjugation_auto,
    run_pivot,
)
from .roots import (
    Character,
    RootDatum,
    compute_cartan,
    extended_root_kernel,
    weight_decompose,
)
from .sets import ElementSet, pairwise_product, product_set, product_set_depths


# ---------------------------------------------------------------------------
# Schur-Zassenhaus splitting


def _diag_of(g: GroupElement) -> GroupElement:
    return g.diag_part()


def _level_positions(r: int, j: int) -> List[Tuple[int, int]]:
    return [(i, i + j) for i in range(r - j)]


def _unipotent_part_level(u: GroupElement) -> int:
    r = u.r
    for j in range(1, r):
        if any(u.entry(i, i + j) != 0 for i in range(r - j)):
            return j
    return r


def schur_zassenhaus_split(H: ElementSet) -> GroupElement:
    """Unipotent g with gHg^-1 = (gHg^-1 cap U_r) x| (gHg^-1 cap T_r).

    Two cocycle-averaging stages iterated along the level filtration of the
    unitriangular group: first the factor set of the canonical section is
    trivialized level by level (giving an abstract complement L of the
    p-part), then the complement's unipotent offsets are averaged away to
    conjugate L into the diagonal torus.  Returns the identity when H is
    already split.
    """
    ctx, r = H.ctx, H.r
    if ctx.p <= r:
        raise CharacteristicError("splitting requires p > r")
    for h in H:
        if not h.is_upper_triangular():
            raise DomainError("splitting expects an upper-triangular group")
    Hgrp = as_group(H)
    ident = GroupElement.identity(ctx, r)
    diags = sorted({_diag_of(h).key() for h in H})
    m = len(diags)
    if all(GroupElement.from_key(ctx, r, k) in H for k in diags):
        return ident
    if m % ctx.p == 0:
        raise DomainError("torus image has order divisible by p (not split-able here)")
    minv = pow(m, -1, ctx.p)

    # canonical section over the diagonal image, identity coset -> identity
    section: Dict[int, GroupElement] = {}
    for h in H:
        dk = _diag_of(h).key()
        cur = section.get(dk)
        if cur is None or h.key() < cur.key():
            section[dk] = h
    id_diag = ident.key()
    section[id_diag] = ident

    def dmul(a: int, b: int) -> int:
        return (GroupElement.from_key(ctx, r, a) * GroupElement.from_key(ctx, r, b)).key()

    # stage 1: trivialize the factor set level by level
    for level in range(1, r):
        f_vals: Dict[Tuple[int, int], GroupElement] = {}
        for s in diags:
            for t in diags:
                st = dmul(s, t)
                f = section[s] * section[t] * section[st].inverse()
                f_vals[(s, t)] = f
                if not f.is_unitriangular():
                    raise DomainError("factor set left the unipotent radical (bug)")
                if not f.is_identity() and _unipotent_part_level(f) < level:
                    raise DomainError("factor set below current level (bug)")
        if all(f.is_identity() for f in f_vals.values()):
            break
        new_section = dict(section)
        for s in diags:
            if s == id_diag:
                continue
            B = ident
            for u in diags:
                B = B * f_vals[(s, u)]
            k_s = B.pow((-minv) % ctx.p)
            new_section[s] = k_s * section[s]
        section = new_section
    # the corrected section must now be multiplicative
    L_elems = [section[s] for s in diags]
    L = ElementSet.from_elements(L_elems)
    for a in L_elems:
        for b in L_elems:
            if (a * b) not in L:
                raise DomainError("complement construction failed (bug)")

    # stage 2: conjugate the complement into the torus, level by level
    g_total = ident
    for level in range(1, r):
        offsets: Dict[int, GroupElement] = {}
        done = True
        for l_elem in L_elems:
            v = l_elem * _diag_of(l_elem).inverse()
            if not v.is_identity():
                done = False
                if _unipotent_part_level(v) < level:
                    raise DomainError("offset below current level (bug)")
            offsets[_diag_of(l_elem).key()] = v
        if done:
            break
        positions = _level_positions(r, level)
        acc = {pos: 0 for pos in positions}
        for s in diags:
            t_s = GroupElement.from_key(ctx, r, s)
            v = offsets[s]
            for (i, j) in positions:
                ratio_inv = ctx.mul(t_s.entry(j, j), ctx.inv(t_s.entry(i, i)))
                acc[(i, j)] = ctx.add(acc[(i, j)], ctx.mul(ratio_inv, v.entry(i, j)))
        codes = list(ident.codes)
        for (i, j), val in acc.items():
            codes[i * r + j] = ctx.mul(minv, val)
        u_lvl = GroupElement(ctx, r, codes, check=False)
        L_elems = [u_lvl * l_elem * u_lvl.inverse() for l_elem in L_elems]
        g_total = u_lvl * g_total

    for l_elem in L_elems:
        if not l_elem.is_diagonal():
            raise DomainError("complement did not land in the torus (bug)")
    conj = Hgrp.conjugate_by(g_total)
    if not _is_split(conj):
        raise DomainError("splitting certification failed (bug)")
    return g_total


def _is_split(H: ElementSet) -> bool:
    diags = {_diag_of(h).key() for h in H}
    return all(GroupElement.from_key(H.ctx, H.r, k) in H for k in diags)


# ---------------------------------------------------------------------------
# containment data (the ambient G = U T with U(K) inside <A>)


@dataclass
class Containment:
    """Closure data plus the root datum of the containing group G = U T."""

    A: ElementSet
    closure: ElementSet              # <A>
    depths: Dict[int, int]           # key -> Cayley distance from identity
    datum: RootDatum

    @property
    def U(self) -> ElementSet:
        return self.datum.U

    @property
    def T(self) -> ElementSet:
        return self.datum.T

    @property
    def G(self) -> ElementSet:
        return self.datum.G


def full_diagonal_torus(ctx: FieldCtx, r: int) -> List[GroupElement]:
    out = [GroupElement.identity(ctx, r)]
    for entries in _diag_tuples(ctx.q, r):
        out.append(GroupElement.diagonal(ctx, list(entries)))
    dedup = {g.key(): g for g in out}
    return [dedup[k] for k in sorted(dedup)]


def _diag_tuples(q: int, r: int):
    cur = [()]
    for _ in range(r):
        cur = [t + (x,) for t in cur for x in range(1, q)]
    return cur


def build_containment(A: ElementSet, cap: Optional[int] = None, depths=None, closure=None) -> Containment:
    """G = U T per the containment construction: U(K) = <A> cap U_r(K)
    certified through its Lie algebra, T the diagonal normalizer of U."""
    ctx, r = A.ctx, A.r
    if depths is None:
        depths = product_set_depths(A, None, cap=cap)
    if closure is None:
        closure = ElementSet(ctx, r, depths.keys(), gens=A.elements())
    uni_keys = [k for k in closure.keys if GroupElement.from_key(ctx, r, k).is_unitriangular()]
    U = as_group(ElementSet(ctx, r, uni_keys), cap=cap)
    from .roots import unipotent_algebra

    algebra = unipotent_algebra(U)
    torus_gens = []
    for t in full_diagonal_torus(ctx, r):
        if t.is_identity():
            continue
        ok = True
        for b in algebra.basis:
            conj = _adjoint(t, b)
            if not algebra.contains(conj):
                ok = False
                break
        if ok:
            torus_gens.append(t)
    datum = weight_decompose(U, torus_gens, certify=True, cap=cap)
    # <A> must embed in G = U T
    for g in A:
        t = g.diag_part()
        if t not in datum.T or (g * t.inverse()) not in datum.U:
            raise DomainError("A does not lie in the containing group U T (bug)")
    return Containment(A=A, closure=closure, depths=depths, datum=datum)


def _adjoint(t: GroupElement, X):
    from .unipotent import NilpotentElement

    ctx, r = X.ctx, X.r
    out = [0] * (r * r)
    for i in range(r):
        for j in range(i + 1, r):
            c = X.entry(i, j)
            if c:
                ratio = ctx.mul(t.entry(i, i), ctx.inv(t.entry(j, j)))
                out[i * r + j] = ctx.mul(ratio, c)
    return NilpotentElement(ctx, r, out)


# ---------------------------------------------------------------------------
# the abelian-radical scene (G mod [U, U]) and the trichotomy


@dataclass
class AbelianScene:
    """G = U T viewed modulo N = [U, U]: quotient root structure plus the
    coset machinery the trichotomy and pivoting need."""

    datum: RootDatum
    N: ElementSet                       # [U, U](K), trivial when U is abelian
    URbar_group: ElementSet             # U_R . N as a matrix group
    quotient: QuotientGroup             # (U_R N)/N
    height1_roots: List[Character]

    @classmethod
    def build(cls, datum: RootDatum) -> "AbelianScene":
        series = lower_central_series(datum.U)
        N = series[1] if len(series) > 1 else ElementSet.identity_set(datum.U.ctx, datum.U.r)
        URN = as_group(pairwise_product(datum.U_R, N))
        quotient = QuotientGroup(URN, N, check=False)
        chars = [
            w.character
            for w in datum.weight_subgroups
            if w.height == 1
            and not w.character.is_trivial_on(datum.torus_gens())
        ]
        dedup: Dict[Tuple[int, ...], Character] = {}
        for c in chars:
            dedup.setdefault(c.exponents, c)
        return cls(
            datum=datum,
            N=N,
            URbar_group=URN,
            quotient=quotient,
            height1_roots=[dedup[k] for k in sorted(dedup)],
        )

    def torus_action(self, t: GroupElement) -> Automorphism:
        group = TableGroup.from_quotient(self.quotient)
        ti = t.inverse()

        def act(i: int) -> int:
            rep = self.quotient.reps[i]
            return self.quotient.project(t * rep * ti)

        return Automorphism(group, [act(i) for i in group.elems])


@dataclass
class TrichotomyResult:
    branch: str                      # "kernel_mass" | "growth" | "normal_subgroup"
    witness: Dict[str, object]
    kernel_char: Optional[Character] = None
    kernel_set: Optional[ElementSet] = None      # A_3 cap ker_G(alpha)(K)
    captured: Optional[ElementSet] = None        # matrix-level W^1, inside A_k
    captured_k: int = 0
    pivot: Optional[PivotOutcome] = None


def commutator_seed(A: ElementSet, depth2: ElementSet) -> ElementSet:
    """[A, A_2] as an explicit matrix set."""
    elems = []
    for a in A:
        ai = a.inverse()
        for b in depth2:
            elems.append(a * b * ai * b.inverse())
    return ElementSet.from_elements(elems)


def abelian_trichotomy(
    datum: RootDatum,
    A: ElementSet,
    C: Fraction,
    scene: Optional[AbelianScene] = None,
) -> TrichotomyResult:
    """Kernel mass, growth, or a captured normal subgroup, on G mod [U, U].

    Follows the proof order: the kernel-mass split first, then pivoting with
    Gamma = G/U acting on U_R mod [U, U] and W = [A, A_2]; the pivot's growth
    branch is translated into measured product-set growth, its full-group
    branch into an explicitly captured subgroup.
    """
    if scene is None:
        scene = AbelianScene.build(datum)
    ctx, r = A.ctx, A.r
    qn = scene.quotient
    tgens = datum.torus_gens()

    # (a) kernel-mass test on torus parts (cosets of U correspond to them)
    torus_parts: Dict[int, List[GroupElement]] = {}
    for a in A:
        torus_parts.setdefault(a.diag_part().key(), []).append(a)
    n_cosets = len(torus_parts)
    in_kernel = 0
    hit_chars: List[Character] = []
    for tk in torus_parts:
        t = GroupElement.from_key(ctx, r, tk)
        inside = [c for c in scene.height1_roots if c.evaluate(t) == 1]
        if inside:
            in_kernel += 1
            hit_chars.extend(inside)
    if Fraction(in_kernel, n_cosets) >= 1 / C:
        # locate the heaviest single kernel in A_3, per the mass-lift lemma
        A3 = product_set(A, 3)
        best = None
        for c in scene.height1_roots:
            ker = extended_root_kernel(datum, c)
            mass = len(A3.intersect(ker))
            if best is None or mass > best[1]:
                best = (c, mass, ker)
        c, mass, ker = best
        return TrichotomyResult(
            branch="kernel_mass",
            witness={"coset_mass": f"{in_kernel}/{n_cosets}", "|A_3 cap ker|": mass,
                     "char": c.label()},
            kernel_char=c,
            kernel_set=A3.intersect(ker),
        )

    # pivoting: X = torus actions of A on U_R mod N, W = [A, A_2]
    group = TableGroup.from_quotient(qn)
    autos: Dict[tuple, Tuple[Automorphism, GroupElement]] = {}
    for tk in sorted(torus_parts):
        rep = min(torus_parts[tk], key=lambda g: g.key())
        auto = scene.torus_action(GroupElement.from_key(ctx, r, tk))
        autos.setdefault(auto.key, (auto, rep))
    X = [autos[k][0] for k in sorted(autos)]
    conj_rep = {k: autos[k][1] for k in autos}
    A2 = product_set(A, 2)
    W_mat = commutator_seed(A, A2)
    for w in W_mat:
        if w not in scene.URbar_group:
            raise HypothesisError("[A, A_2] left U_R . [U,U] (U not abelian mod N?)")
    W_bar = sorted({qn.project(w) for w in W_mat})
    ctx_pivot = ActionCtx(group, X)
    outcome = run_pivot(ctx_pivot, X, W_bar)

    if outcome.branch == "growth":
        # measured chain: conjugated commutators generate mass inside U
        base = _conjugated_commutators(A, conj_rep, W_mat)
        ball = product_set(base, 6) if len(base) else ElementSet.identity_set(ctx, r)
        return TrichotomyResult(
            branch="growth",
            witness={
                "pivot_case": outcome.case,
                "|X|": outcome.n_X,
                "x": outcome.x,
                "|W|": outcome.n_W,
                "quotient_witness": outcome.witness_size,
                "|matrix ball|": len(ball),
            },
            pivot=outcome,
        )

    # full_group: capture the matrix-level subgroup over the quotient witness
    base = _conjugated_commutators(A, conj_rep, W_mat)
    V_mat = product_set(base, 8) if len(base) else ElementSet.identity_set(ctx, r)
    got = {qn.project(v) for v in V_mat if v in scene.URbar_group}
    need = set(outcome.generated)
    if not need <= got:
        raise HypothesisError("matrix lift failed to cover the captured quotient group")
    keep = [v for v in V_mat if v in scene.URbar_group and qn.project(v) in need]
    captured = ElementSet.from_elements(keep)
    # commutator length 6, conjugation adds 2, radius 8
    captured_k = 8 * (6 + 2)
    return TrichotomyResult(
        branch="normal_subgroup",
        witness={
            "pivot_case": outcome.case,
            "quotient_order": len(need),
            "|captured|": len(captured),
            "k_bound": captured_k,
        },
        captured=captured,
        captured_k=captured_k,
        pivot=outcome,
    )


def _conjugated_commutators(A: ElementSet, conj_rep, W_mat: ElementSet) -> ElementSet:
    elems = []
    for rep in conj_rep.values():
        ri = rep.inverse()
        for w in W_mat:
            elems.append(rep * w * ri)
    for w in W_mat:
        elems.append(w)
    return ElementSet.from_elements(elems)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    """Machine-checkable outcome: growth of A_3, or captured structure."""

    kind: str                        # "growth" | "structure"
    C: Fraction
    base_size: int
    # growth
    a3_size: int = 0
    # structure
    U_R: Optional[ElementSet] = None
    S: Optional[ElementSet] = None
    S_gens: Optional[List[GroupElement]] = None
    k: int = 0
    k_budget: int = 0
    coset_count: int = 0
    ak_cap_s: int = 0                # measured |A_k cap S|
    exponent: float = 0.0            # e with |A_k cap S| >= C^-e |A|
    normal_in_closure: bool = False  # U_R normal in <A> (after upgrade)
    trace: List[Dict[str, object]] = field(default_factory=list)

    def to_json(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "kind": self.kind,
            "C": str(self.C),
            "base_size": self.base_size,
        }
        if self.kind == "growth":
            out["a3_size"] = self.a3_size
            out["ratio"] = str(Fraction(self.a3_size, self.base_size))
        else:
            out.update(
                {
                    "k": self.k,
                    "k_budget": self.k_budget,
                    "coset_count": self.coset_count,
                    "ak_cap_s": self.ak_cap_s,
                    "exponent": self.exponent,
                    "normal_in_closure": self.normal_in_closure,
                    "U_R": _set_json(self.U_R),
                    "S": _set_json(self.S),
                }
            )
        out["trace"] = self.trace
        return out


def _set_json(S: Optional[ElementSet], threshold: int = 64) -> Dict[str, object]:
    if S is None:
        return {}
    if len(S) <= threshold:
        return {
            "order": len(S),
            "elements": [g.encode().hex() for g in S],
        }
    from .groups import greedy_generators

    gens = S.gens or greedy_generators(S)
    return {"order": len(S), "gens": [g.encode().hex() for g in gens]}


# ---------------------------------------------------------------------------
# the driver


def _closure_with_depths(A: ElementSet, cap=None):
    depths = product_set_depths(A, None, cap=cap)
    closure = ElementSet(A.ctx, A.r, depths.keys(), gens=A.elements())
    return closure, depths


def _ball(A: ElementSet, depths: Dict[int, int], k: int) -> ElementSet:
    return ElementSet(A.ctx, A.r, (ky for ky, d in depths.items() if d <= k))


def _check_driver_preconditions(A: ElementSet):
    ctx, r = A.ctx, A.r
    if ctx.p <= r:
        raise CharacteristicError(f"driver needs p > r, got p = {ctx.p}, r = {r}")
    for g in A:
        if not g.is_upper_triangular():
            raise DomainError(
                "input must lie in the upper-triangular Borel "
                "(the general reduction to this form is out of scope)"
            )


def run_dichotomy(
    A: ElementSet,
    C,
    delta: float = 1.0,
    cap: Optional[int] = None,
    kdepth: int = 3,
    kmax: int = 4096,
) -> Certificate:
    """Growth certificate or structure certificate for A, per the main loop.

    Measures |A_3| first; otherwise conjugates to split position, builds the
    containing G = U T, runs the kernel-mass reduction loop with threshold
    1/D (D = C^(1/delta)), applies the abelian trichotomy modulo [U, U], and
    on the captured branch descends to pin U_R inside an explicit A_k.
    Growth signals on inner branches escalate D (recorded in the trace)
    rather than emitting an unverified growth claim.
    """
    C = Fraction(C) if not isinstance(C, Fraction) else C
    if C < 1:
        raise DomainError("C must be >= 1")
    _check_driver_preconditions(A)
    ctx, r = A.ctx, A.r
    trace: List[Dict[str, object]] = []
    closure, depths = _closure_with_depths(A, cap=cap)
    a3 = sum(1 for d in depths.values() if d <= 3)
    if Fraction(a3) >= C * len(A):
        return Certificate(
            kind="growth", C=C, base_size=len(A), a3_size=a3,
            trace=[{"stage": "direct", "a3": a3}],
        )

    g_conj = schur_zassenhaus_split(closure)
    A_s = A.conjugate_by(g_conj) if not g_conj.is_identity() else A
    closure_s = closure.conjugate_by(g_conj) if not g_conj.is_identity() else closure
    closure_s = closure_s.with_gens(A_s.elements())
    trace.append({"stage": "split", "conjugator": g_conj.encode().hex()})

    D = C ** max(1, round(1 / delta)) if delta <= 1 else C
    if D < 2:
        D = Fraction(2)
    A_cur = A_s
    budget = 1
    iterations = 0
    escalations = 0
    max_iter = r**3 + 8
    base_for_descent = None

    while True:
        iterations += 1
        if iterations > max_iter:
            raise SearchCapError("kernel-reduction loop exceeded its iteration bound")
        cont = build_containment(A_cur, cap=cap)
        datum = cont.datum
        trace.append(
            {
                "stage": "containment",
                "iter": iterations,
                "|A_cur|": len(A_cur),
                "|U|": len(datum.U),
                "|T|": len(datum.T),
                "roots": len(datum.root_indices),
            }
        )
        if not datum.root_indices:
            # G nilpotent: structure with trivial U_R
            return _finish_structure(
                A, closure, depths, g_conj, closure_s, datum,
                U_R_split=ElementSet.identity_set(ctx, r),
                C=C, trace=trace, budget=0, kmax=kmax,
            )
        # kernel-mass test at product length 2
        depths2 = product_set_depths(A_cur, 2)
        A2 = ElementSet(ctx, r, depths2.keys())
        hit = None
        for i in datum.root_indices:
            char = datum.weight_subgroups[i].character
            ker = extended_root_kernel(datum, char)
            mass = len(A2.intersect(ker))
            if Fraction(mass) >= Fraction(len(A_cur)) / D:
                hit = (char, A2.intersect(ker), mass)
                break
        if hit is not None:
            char, newA, mass = hit
            trace.append(
                {"stage": "kernel-reduce", "char": char.label(), "mass": mass}
            )
            A_cur = newA.with_gens(newA.elements())
            budget *= 2
            continue
        trich = abelian_trichotomy(datum, A_cur, D)
        trace.append({"stage": "trichotomy", "branch": trich.branch, **{
            k: v for k, v in trich.witness.items() if isinstance(v, (int, str))
        }})
        if trich.branch == "kernel_mass":
            A_cur = trich.kernel_set.with_gens(trich.kernel_set.elements())
            budget *= 3
            continue
        if trich.branch == "growth":
            escalations += 1
            if escalations > 8:
                raise SearchCapError("trichotomy growth kept firing at maximal D")
            D = D * D
            trace.append({"stage": "escalate", "D": str(D)})
            continue
        # captured branch: descend
        from .descent import DescentAbort, DescentContext, Tracked, capture_UR

        hyp = None
        try:
            dctx = DescentContext.build(datum, A_cur, D, kmax=kmax)
            base = Tracked(trich.captured, trich.captured_k)
            UR_split, k_cur, info = capture_UR(dctx, base)
            trace.append(
                {"stage": "descent", "k_realized": info["k_realized"],
                 "k_budget": info["k_budget"], "|U_R|": len(UR_split)}
            )
            return _finish_structure(
                A, closure, depths, g_conj, closure_s, datum,
                U_R_split=UR_split, C=C, trace=trace,
                budget=info["k_budget"] * budget, kmax=kmax,
            )
        except DescentAbort as abort:
            trace.append({"stage": "descent-abort", "at": abort.stage})
            if abort.stage.endswith("trichotomy") and "branch" in abort.info:
                if abort.info["branch"] == "kernel_mass":
                    # fall back to the loop with a fresh kernel reduction
                    escalations += 1
                    D = D * D
                    if escalations > 8:
                        raise
                    continue
            escalations += 1
            D = D * D
            if escalations > 8:
                raise
            continue


def _finish_structure(
    A: ElementSet,
    closure: ElementSet,
    depths: Dict[int, int],
    g_conj: GroupElement,
    closure_s: ElementSet,
    datum: RootDatum,
    U_R_split: ElementSet,
    C: Fraction,
    trace: List[Dict[str, object]],
    budget: int,
    kmax: int,
) -> Certificate:
    """Assemble S = <A> cap G(K) on the split side, conjugate back, measure."""
    ctx, r = A.ctx, A.r
    ident = GroupElement.identity(ctx, r)
    # S on the split side: U(K) . (closure cap T(K)); splitness makes this exact
    t_parts = ElementSet(
        ctx, r, (k for k in closure_s.keys if GroupElement.from_key(ctx, r, k).is_diagonal() and k in datum.T.keys)
    )
    if len(t_parts) == 0:
        t_parts = ElementSet.identity_set(ctx, r)
    t_grp = as_group(t_parts)
    S_split = pairwise_product(datum.U, t_grp)
    S_gens_split = list(datum.U.gens or greedy_generators(datum.U)) + list(
        t_grp.gens or []
    )
    S_split = S_split.with_gens([g for g in S_gens_split if not g.is_identity()] or [ident])
    if not S_split.issubset(closure_s):
        # the containing group may exceed <A>; S is the intersection
        S_split = S_split.intersect(closure_s)
        S_split = as_group(S_split)
    # conjugate everything back to the original A
    gi = g_conj.inverse()
    if g_conj.is_identity():
        U_R, S = U_R_split, S_split
    else:
        U_R = U_R_split.conjugate_by(gi)
        S = S_split.conjugate_by(gi).with_gens(
            [gi * g * g_conj for g in (S_split.gens or [])] or None
        )
    # measured k: minimal radius with U_R inside A_k, from the closure BFS
    k_real = 0
    for u in U_R:
        d = depths.get(u.key())
        if d is None:
            raise DomainError("captured U_R left <A> (bug)")
        k_real = max(k_real, d)
    if k_real > kmax:
        raise SearchCapError(f"certificate k {k_real} exceeds kmax {kmax}")
    Ak = _ball(A, depths, max(k_real, 1))
    ak_cap_s = len(Ak.intersect(S))
    # measured exponent e: |A_k cap S| >= C^-e |A|
    if C > 1 and ak_cap_s < len(A):
        import math

        e = math.log(len(A) / ak_cap_s) / math.log(float(C))
    else:
        e = 0.0
    # cosets of S met by A
    coset_keys = set()
    for a in A:
        coset_keys.add(S.translate(a, left=True).sorted_keys()[0])
    cert = Certificate(
        kind="structure",
        C=C,
        base_size=len(A),
        U_R=U_R,
        S=S,
        S_gens=list(S.gens) if S.gens else None,
        k=k_real,
        k_budget=max(budget, k_real),
        coset_count=len(coset_keys),
        ak_cap_s=ak_cap_s,
        exponent=round(e, 6),
        trace=trace,
    )
    return cert


# ---------------------------------------------------------------------------
# verification and the normality upgrade


def verify_certificate(cert: Certificate, A: ElementSet, C=None) -> Dict[str, object]:
    """Re-derive every certificate clause from scratch; pinpoint failures."""
    C = cert.C if C is None else (Fraction(C) if not isinstance(C, Fraction) else C)
    clauses: Dict[str, bool] = {}
    closure, depths = _closure_with_depths(A)
    if cert.kind == "growth":
        a3 = sum(1 for d in depths.values() if d <= 3)
        clauses["a3_measured"] = a3 == cert.a3_size
        clauses["growth"] = Fraction(a3) >= C * len(A)
        return {"holds": all(clauses.values()), "clauses": clauses}

    U_R, S = cert.U_R, cert.S
    clauses["U_R_subgroup"] = _is_subgroup_quiet(U_R)
    clauses["U_R_unipotent"] = all(_is_unipotent(g) for g in U_R)
    clauses["S_contains_U_R"] = U_R.issubset(S)
    clauses["S_inside_closure"] = S.issubset(closure)
    gens_S = cert.S_gens or greedy_generators(S)
    clauses["S_gens_generate"] = group_closure(gens_S).equals(S)
    clauses["U_R_normal_in_S"] = all(
        U_R.conjugate_by(g).equals(U_R) for g in gens_S
    )
    clauses["S_normal_in_closure"] = all(
        S.conjugate_by(g).equals(S) for g in A
    )
    if cert.normal_in_closure:
        clauses["U_R_normal_in_closure"] = all(
            U_R.conjugate_by(g).equals(U_R) for g in A
        )
    # nilpotency of S / U_R through the quotient's lower central series
    if clauses["U_R_normal_in_S"] and clauses["S_gens_generate"]:
        Q = QuotientGroup(S.with_gens(gens_S), U_R, check=False)
        from .pivot import TableGroup

        clauses["S_mod_UR_nilpotent"] = abstract_is_nilpotent(
            _QuotientOps(Q)
        )
    else:
        clauses["S_mod_UR_nilpotent"] = False
    # membership U_R inside A_k
    clauses["U_R_in_A_k"] = all(
        depths.get(u.key(), cert.k + 1) <= max(cert.k, 1) for u in U_R
    )
    # cardinality clause
    Ak = _ball(A, depths, max(cert.k, 1))
    ak_cap_s = len(Ak.intersect(S))
    clauses["ak_cap_s_measured"] = ak_cap_s == cert.ak_cap_s
    if C > 1:
        bound = float(len(A)) * float(C) ** (-cert.exponent)
        clauses["cardinality"] = ak_cap_s + 1e-9 >= bound
    else:
        clauses["cardinality"] = ak_cap_s >= len(A)
    # coset count of A over S
    coset_keys = set()
    for a in A:
        coset_keys.add(S.translate(a, left=True).sorted_keys()[0])
    clauses["coset_count"] = len(coset_keys) == cert.coset_count
    return {"holds": all(clauses.values()), "clauses": clauses}


class _QuotientOps:
    def __init__(self, Q: QuotientGroup):
        self.Q = Q
        self.identity = Q.identity

    def mul(self, a, b):
        return self.Q.mul(a, b)

    def inv(self, a):
        return self.Q.inv(a)

    def elements(self):
        return self.Q.elements()

    def generators(self):
        return self.Q.generators()


def _is_subgroup_quiet(S: ElementSet) -> bool:
    try:
        as_group(S)
        return True
    except Exception:
        return False


def _is_unipotent(g: GroupElement) -> bool:
    # (g - 1)^r = 0; for triangular matrices this is a unit diagonal
    ctx, r = g.ctx, g.r
    if g.is_upper_triangular():
        return all(g.entry(i, i) == 1 for i in range(r))
    codes = list(g.codes)
    for i in range(r):
        codes[i * r + i] = ctx.sub(codes[i * r + i], 1)
    import numpy as np

    from .sets import elem_to_array, mul_batch

    m = elem_to_array(GroupElement(ctx, r, codes, check=False))[None]
    acc = m
    for _ in range(r - 1):
        acc = mul_batch(ctx, acc, m[0])
    return not acc.any()


def upgrade_normal_UR(cert: Certificate, A: ElementSet) -> Certificate:
    """Strengthen a structure certificate so U_R is normal in <A>.

    Repeatedly replaces U_R by U_R . U_R^a while some a in A moves it,
    doubling-plus-two the product length each time; the unipotent subgroup
    chain bound keeps this under r^2 rounds.
    """
    if cert.kind != "structure":
        raise DomainError("only structure certificates can be upgraded")
    if A.ctx.a != 1:
        raise DomainError("the normality upgrade applies over prime fields")
    closure, depths = _closure_with_depths(A)
    gens = [g for g in A] + [g.inverse() for g in A]
    U_R = cert.U_R
    k = max(cert.k, 1)
    r = A.r
    rounds = 0
    while True:
        mover = next(
            (g for g in gens if not U_R.conjugate_by(g).equals(U_R)), None
        )
        if mover is None:
            break
        rounds += 1
        if rounds > r * r:
            raise SearchCapError("normality upgrade exceeded the r^2 chain bound")
        bigger = pairwise_product(U_R, U_R.conjugate_by(mover))
        U_R = as_group(bigger)
        k = 2 * k + 2
    k_real = max(depths[u.key()] for u in U_R) if len(U_R) > 1 else 0
    k_final = min(k, max(k_real, 0)) if k_real else 0
    k_final = k_real  # the measured radius is exact and <= the budget
    if k_real > k:
        raise SearchCapError("upgrade budget accounting violated (bug)")
    S = cert.S
    if not U_R.issubset(S):
        S = as_group(pairwise_product(S, U_R))
    Ak = _ball(A, depths, max(k_final, 1))
    coset_keys = set()
    for a in A:
        coset_keys.add(S.translate(a, left=True).sorted_keys()[0])
    new = Certificate(
        kind="structure",
        C=cert.C,
        base_size=cert.base_size,
        U_R=U_R,
        S=S,
        S_gens=list(S.gens) if S.gens else cert.S_gens,
        k=k_final,
        k_budget=max(cert.k_budget, k),
        coset_count=len(coset_keys),
        ak_cap_s=len(Ak.intersect(S)),
        exponent=cert.exponent,
        normal_in_closure=True,
        trace=cert.trace + [{"stage": "normal-upgrade", "rounds": rounds, "k": k}],
    )
    return new
