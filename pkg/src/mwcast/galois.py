"""GF(2^q) arithmetic underpinning all coding operations.

Addition is XOR (characteristic 2), multiplication is polynomial
multiplication modulo an irreducible reduction polynomial.  For q <= 8 the
context precomputes log/antilog tables; per-slot elimination dominates the
simulator's runtime, so multiplies there are two lookups and an add.  For
q = 16 a carry-less shift-and-reduce multiply is used instead of 128 KiB of
tables.
"""

from __future__ import annotations

import numpy as np

DEFAULT_POLYNOMIALS = {
    4: 0x13,       # x^4 + x + 1
    8: 0x11B,      # x^8 + x^4 + x^3 + x + 1
    16: 0x1100B,   # x^16 + x^12 + x^3 + x + 1
}


def _clmul_reduce(a: int, b: int, poly: int, q: int) -> int:
    """Shift-and-reduce product of a and b modulo poly (degree q)."""
    high = 1 << q
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & high:
            a ^= poly
        b >>= 1
    return r


def _poly_mod(a: int, b: int) -> int:
    """Remainder of GF(2)[x] division of a by b."""
    db = b.bit_length() - 1
    while a.bit_length() - 1 >= db and a:
        a ^= b << (a.bit_length() - 1 - db)
    return a


def is_irreducible(poly: int, q: int) -> bool:
    """Trial division by every GF(2) polynomial of degree 1..q//2."""
    if poly.bit_length() - 1 != q:
        return False
    for d in range(1, q // 2 + 1):
        for low in range(1 << d):
            candidate = (1 << d) | low
            if _poly_mod(poly, candidate) == 0:
                return False
    return True


class FieldContext:
    """Immutable GF(2^q) context; safe for shared concurrent reads.

    Attributes
    ----------
    q : field exponent (4, 8 or 16)
    poly : reduction polynomial including the x^q term
    exp, log : antilog/log tables (q <= 8), mutually inverse on nonzeros
    """

    def __init__(self, q: int = 8, poly: int | None = None):
        if q not in DEFAULT_POLYNOMIALS:
            raise ValueError(f"field exponent must be one of 4, 8, 16, got {q}")
        if poly is None:
            poly = DEFAULT_POLYNOMIALS[q]
        if not is_irreducible(poly, q):
            raise ValueError(f"0x{poly:X} is not irreducible of degree {q}")
        self.q = q
        self.poly = poly
        self.order = 1 << q
        self.dtype = np.uint8 if q <= 8 else np.uint16
        self.use_tables = q <= 8
        if self.use_tables:
            self._build_tables()
        else:
            # dummy single-entry tables keep the compiled kernels monomorphic
            self.exp = np.zeros(1, dtype=np.uint32)
            self.log = np.zeros(1, dtype=np.int32)
            self.generator = 0

    def _build_tables(self) -> None:
        size = self.order - 1
        for g in range(2, self.order):
            exp = np.zeros(2 * size, dtype=np.uint32)
            log = np.full(self.order, -1, dtype=np.int32)
            x = 1
            ok = True
            for i in range(size):
                if log[x] >= 0:        # cycle shorter than the full group
                    ok = False
                    break
                exp[i] = x
                log[x] = i
                x = _clmul_reduce(x, g, self.poly, self.q)
            if ok and x == 1:
                exp[size:] = exp[:size]
                self.exp = exp
                self.log = log
                self.generator = g
                return
        raise ValueError(f"no generator found for 0x{self.poly:X}")

    # -- scalar ops ---------------------------------------------------------

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.use_tables:
            return int(self.exp[self.log[a] + self.log[b]])
        return _clmul_reduce(a, b, self.poly, self.q)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        if self.use_tables:
            return int(self.exp[self.order - 1 - self.log[a]])
        # a^(2^q - 2) by square-and-multiply
        result, base, e = 1, a, self.order - 2
        while e:
            if e & 1:
                result = _clmul_reduce(result, base, self.poly, self.q)
            base = _clmul_reduce(base, base, self.poly, self.q)
            e >>= 1
        return result

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero field element")
        if a == 0:
            return 0
        return self.mul(a, self.inv(b))

    # -- vector ops over payload symbol arrays ------------------------------

    def scale(self, c: int, arr: np.ndarray) -> np.ndarray:
        """c * arr elementwise."""
        if c == 0:
            return np.zeros_like(arr)
        if self.use_tables:
            out = np.zeros_like(arr)
            nz = arr != 0
            out[nz] = self.exp[self.log[c] + self.log[arr[nz]]].astype(arr.dtype)
            return out
        out = np.zeros_like(arr)
        for i, v in enumerate(arr):
            out[i] = _clmul_reduce(c, int(v), self.poly, self.q)
        return out

    def addmul(self, acc: np.ndarray, c: int, arr: np.ndarray) -> None:
        """acc ^= c * arr in place."""
        acc ^= self.scale(c, arr)


def field_arith(ctx: FieldContext, a: int, b: int, kind: str) -> int:
    """Dispatching wrapper over the four field operations."""
    if kind == "add":
        return ctx.add(a, b)
    if kind == "mul":
        return ctx.mul(a, b)
    if kind == "inv":
        return ctx.inv(a)
    if kind == "div":
        return ctx.div(a, b)
    raise ValueError(f"unknown field operation {kind!r}")
