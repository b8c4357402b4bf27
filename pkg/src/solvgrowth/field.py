"""Arithmetic in F_{p^a} with an explicit monic irreducible modulus.

Elements are coefficient vectors over F_p, stored either as tuples
(``FieldElement.coeffs``) or as integer codes in [0, p^a): the code of
(c_0, ..., c_{a-1}) is sum(c_i * p^i).  Codes are what every other module
works with; ``FieldElement`` is the friendly wrapper.

For a == 1 the modulus is the polynomial x and a code is just a residue
mod p.  For a > 1 the context can materialize q x q add/mul lookup tables
(q = p^a) so matrix kernels can run vectorized; q is capped to keep the
tables small.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, ContextError, DivisionError, DomainError

_TABLE_Q_CAP = 4096


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


# ---------------------------------------------------------------------------
# polynomials over F_p as int tuples, low degree first, no trailing zeros


def _poly_trim(c: Sequence[int]) -> Tuple[int, ...]:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_mul(f, g, p):
    if not f or not g:
        return ()
    out = [0] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                out[i + j] = (out[i + j] + a * b) % p
    return _poly_trim(out)


def _poly_mod(f, m, p):
    # m monic
    f = list(f)
    dm = len(m) - 1
    while len(f) - 1 >= dm and f:
        lead = f[-1] % p
        if lead:
            shift = len(f) - 1 - dm
            for i, c in enumerate(m):
                f[shift + i] = (f[shift + i] - lead * c) % p
        f.pop()
    return _poly_trim(f)


def _poly_powmod(f, e, m, p):
    result = (1,)
    base = _poly_mod(f, m, p)
    while e:
        if e & 1:
            result = _poly_mod(_poly_mul(result, base, p), m, p)
        base = _poly_mod(_poly_mul(base, base, p), m, p)
        e >>= 1
    return result


def _poly_gcd(f, g, p):
    while g:
        lead = pow(g[-1], -1, p)
        gm = tuple((c * lead) % p for c in g)
        f, g = g, _poly_mod(f, gm, p)
    return f


def is_irreducible(modulus: Sequence[int], p: int) -> bool:
    """Deterministic irreducibility test for a monic polynomial over F_p.

    f of degree a is irreducible iff x^(p^a) == x (mod f) and, for every
    prime divisor l of a, gcd(x^(p^(a/l)) - x, f) == 1.
    """
    m = _poly_trim(modulus)
    a = len(m) - 1
    if a < 1 or m[-1] != 1:
        return False
    if a == 1:
        return True
    x = (0, 1)
    xq = _poly_powmod(x, p**a, m, p)
    if _poly_trim(tuple((u - v) % p for u, v in _pad(xq, x))) != ():
        return False
    for ell in _prime_divisors(a):
        xql = _poly_powmod(x, p ** (a // ell), m, p)
        diff = _poly_trim(tuple((u - v) % p for u, v in _pad(xql, x)))
        g = _poly_gcd(m, diff, p)
        if len(g) - 1 > 0:
            return False
    return True


def _pad(f, g):
    n = max(len(f), len(g))
    return zip(tuple(f) + (0,) * (n - len(f)), tuple(g) + (0,) * (n - len(g)))


def _prime_divisors(n):
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def default_modulus(p: int, a: int) -> Tuple[int, ...]:
    """Smallest monic irreducible of degree a over F_p, by coefficient order.

    a == 1 returns the polynomial x.  Degrees up to 4 are what the package
    ships; larger degrees work but take longer to search.
    """
    if a == 1:
        return (0, 1)
    for code in range(p**a):
        coeffs = []
        c = code
        for _ in range(a):
            coeffs.append(c % p)
            c //= p
        cand = tuple(coeffs) + (1,)
        if is_irreducible(cand, p):
            return cand
    raise DomainError(f"no irreducible of degree {a} over F_{p}")  # unreachable


# ---------------------------------------------------------------------------


class FieldCtx:
    """Context for F_{p^a}: prime, extension degree, monic modulus.

    Instances are immutable and hash by (p, a, modulus); every element and
    matrix carries a reference to its context, and mixing contexts raises
    ``ContextError``.
    """

    __slots__ = ("p", "a", "q", "modulus", "_add", "_mul", "_neg", "_inv")

    def __init__(self, p: int, a: int = 1, modulus: Optional[Sequence[int]] = None):
        if not is_prime(p):
            raise DomainError(f"p = {p} is not prime")
        if p >= 256:
            raise DomainError("p must be < 256 (one byte per base-p digit)")
        if a < 1:
            raise DomainError("extension degree must be >= 1")
        if modulus is None:
            modulus = default_modulus(p, a)
        modulus = tuple(int(c) % p for c in modulus)
        if len(modulus) != a + 1 or modulus[-1] != 1:
            raise DomainError("modulus must be monic of degree a")
        if a == 1 and modulus != (0, 1):
            raise DomainError("for a = 1 the modulus is the polynomial x")
        if a > 1 and not is_irreducible(modulus, p):
            raise DomainError(f"modulus {modulus} is reducible over F_{p}")
        self.p = p
        self.a = a
        self.q = p**a
        self.modulus = modulus
        self._add = None
        self._mul = None
        self._neg = None
        self._inv = None

    # -- identity ----------------------------------------------------------
    def __eq__(self, other):
        return (
            isinstance(other, FieldCtx)
            and (self.p, self.a, self.modulus) == (other.p, other.a, other.modulus)
        )

    def __hash__(self):
        return hash((self.p, self.a, self.modulus))

    def __repr__(self):
        if self.a == 1:
            return f"FieldCtx(p={self.p})"
        return f"FieldCtx(p={self.p}, a={self.a}, modulus={self.modulus})"

    # -- code <-> coefficients ----------------------------------------------
    def coeffs_of(self, code: int) -> Tuple[int, ...]:
        out = []
        for _ in range(self.a):
            out.append(code % self.p)
            code //= self.p
        return tuple(out)

    def code_of(self, coeffs: Sequence[int]) -> int:
        code = 0
        for c in reversed(tuple(coeffs)):
            code = code * self.p + (c % self.p)
        return code

    # -- scalar arithmetic on codes ------------------------------------------
    def add(self, x: int, y: int) -> int:
        if self.a == 1:
            return (x + y) % self.p
        p = self.p
        out, mult = 0, 1
        for _ in range(self.a):
            out += ((x % p + y % p) % p) * mult
            x //= p
            y //= p
            mult *= p
        return out

    def neg(self, x: int) -> int:
        if self.a == 1:
            return (-x) % self.p
        p = self.p
        out, mult = 0, 1
        for _ in range(self.a):
            out += ((-x) % p) * mult
            x //= p
            mult *= p
        return out

    def sub(self, x: int, y: int) -> int:
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        if self.a == 1:
            return (x * y) % self.p
        f = _poly_mul(self.coeffs_of(x), self.coeffs_of(y), self.p)
        return self.code_of(_poly_mod(f, self.modulus, self.p) + (0,) * self.a)

    def inv(self, x: int) -> int:
        if x == 0:
            raise DivisionError("inverse of zero")
        if self.a == 1:
            return pow(x, -1, self.p)
        # x^(q-2) = x^(-1) in F_q
        return self.pow(x, self.q - 2)

    def pow(self, x: int, e: int) -> int:
        if x == 0:
            if e == 0:
                return 1
            if e < 0:
                raise DivisionError("negative power of zero")
            return 0
        e %= self.q - 1
        result, base = 1, x
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def units(self):
        return range(1, self.q)

    # -- lookup tables for vectorized kernels ---------------------------------
    def tables(self):
        """(ADD, MUL) as q x q int64 arrays; built once, cached."""
        if self._add is None:
            if self.q > _TABLE_Q_CAP:
                raise CapacityError(
                    f"q = {self.q} too large for lookup tables", self.q
                )
            q = self.q
            if self.a == 1:
                rng = np.arange(q, dtype=np.int64)
                self._add = (rng[:, None] + rng[None, :]) % q
                self._mul = (rng[:, None] * rng[None, :]) % q
            else:
                add = np.empty((q, q), dtype=np.int64)
                mul = np.empty((q, q), dtype=np.int64)
                for x in range(q):
                    for y in range(x, q):
                        s = self.add(x, y)
                        m = self.mul(x, y)
                        add[x, y] = add[y, x] = s
                        mul[x, y] = mul[y, x] = m
                self._add = add
                self._mul = mul
        return self._add, self._mul

    def check_same(self, other: "FieldCtx"):
        if self != other:
            raise ContextError(f"mixed field contexts: {self} vs {other}")


@dataclass(frozen=True)
class FieldElement:
    """One element of F_{p^a}: a coefficient tuple plus its context."""

    ctx: FieldCtx
    coeffs: Tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.ctx.a:
            raise ContextError("coefficient vector has wrong length")
        object.__setattr__(
            self, "coeffs", tuple(c % self.ctx.p for c in self.coeffs)
        )

    @classmethod
    def from_code(cls, ctx: FieldCtx, code: int) -> "FieldElement":
        return cls(ctx, ctx.coeffs_of(code))

    @classmethod
    def from_int(cls, ctx: FieldCtx, n: int) -> "FieldElement":
        return cls(ctx, (n % ctx.p,) + (0,) * (ctx.a - 1))

    @property
    def code(self) -> int:
        return self.ctx.code_of(self.coeffs)

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self.ctx.check_same(other.ctx)
        return FieldElement.from_code(self.ctx, self.ctx.add(self.code, other.code))

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self.ctx.check_same(other.ctx)
        return FieldElement.from_code(self.ctx, self.ctx.sub(self.code, other.code))

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self.ctx.check_same(other.ctx)
        return FieldElement.from_code(self.ctx, self.ctx.mul(self.code, other.code))

    def __neg__(self) -> "FieldElement":
        return FieldElement.from_code(self.ctx, self.ctx.neg(self.code))

    def inverse(self) -> "FieldElement":
        return FieldElement.from_code(self.ctx, self.ctx.inv(self.code))

    def is_zero(self) -> bool:
        return self.code == 0
