"""
Exact arithmetic in the ring of Eisenstein integers Z[w], w = exp(2*pi*i/3).

An element a + b*w is stored as the integer pair (a, b), so ring operations never touch floating
point. Coefficients are checked against a declared bit-width (``LATTICENC_BIT_WIDTH``, default 64)
and an overflow raises instead of wrapping.

The module also provides the nearest-point quantizer of the hexagonal lattice, Euclidean division,
gcd and factorization into Eisenstein primes.
"""

import logging
import math
import re
from enum import Enum
from functools import total_ordering
from typing import NamedTuple

import numpy as np

from latticenc.exceptions import EisensteinOverflowError
from latticenc.utils.settings import get_bit_width

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
OMEGA = complex(-0.5, SQRT3 / 2.0)

# Trial division is only meant for desk-scale moduli.
FACTOR_NORM_BOUND = 10**6

_BIT_WIDTH = get_bit_width()
_LIMIT = 1 << (_BIT_WIDTH - 1)


def _checked(value) -> int:
    value = int(value)
    if not -_LIMIT <= value < _LIMIT:
        raise EisensteinOverflowError(f"coefficient {value} does not fit in {_BIT_WIDTH} bits")
    return value


@total_ordering
class EisensteinInt:
    """An element a + b*w of Z[w]. Instances are immutable and hashable.

    Ordering is lexicographic on (a, b); it is only used for deterministic tie-breaks.
    """

    __slots__ = ("a", "b")

    def __init__(self, a: int = 0, b: int = 0):
        object.__setattr__(self, "a", _checked(a))
        object.__setattr__(self, "b", _checked(b))

    def __setattr__(self, key, value):
        raise AttributeError("EisensteinInt is immutable")

    @classmethod
    def coerce(cls, value: "EisensteinInt | int") -> "EisensteinInt":
        if isinstance(value, EisensteinInt):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value), 0)
        raise TypeError(f"cannot interpret {value!r} as an Eisenstein integer")

    # ------------------------------------------------------------------
    # Ring operations
    # ------------------------------------------------------------------

    def __add__(self, other):
        try:
            other = EisensteinInt.coerce(other)
        except TypeError:
            return NotImplemented
        return EisensteinInt(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            other = EisensteinInt.coerce(other)
        except TypeError:
            return NotImplemented
        return EisensteinInt(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        try:
            other = EisensteinInt.coerce(other)
        except TypeError:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        try:
            other = EisensteinInt.coerce(other)
        except TypeError:
            return NotImplemented
        # w^2 = -1 - w
        a, b, c, d = self.a, self.b, other.a, other.b
        return EisensteinInt(a * c - b * d, a * d + b * c - b * d)

    __rmul__ = __mul__

    def __neg__(self):
        return EisensteinInt(-self.a, -self.b)

    def __pow__(self, exponent: int):
        if exponent < 0:
            raise ValueError("negative powers are not defined in Z[w]")
        result, base = ONE, self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __divmod__(self, other):
        other = EisensteinInt.coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("Eisenstein division by zero")
        # x / y = x * conj(y) / norm(y), rounded exactly in integers
        num = self * other.conjugate()
        qa, qb = _nearest_point(num.a, num.b, other.norm())
        quotient = EisensteinInt(qa, qb)
        return quotient, self - quotient * other

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    # ------------------------------------------------------------------
    # Comparison, hashing, display
    # ------------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, np.integer)):
            return self.b == 0 and self.a == int(other)
        if not isinstance(other, EisensteinInt):
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __lt__(self, other):
        other = EisensteinInt.coerce(other)
        return (self.a, self.b) < (other.a, other.b)

    def __hash__(self):
        # rational integers hash like the int they compare equal to
        return hash(self.a) if self.b == 0 else hash((self.a, self.b))

    def __bool__(self):
        return not self.is_zero()

    def __repr__(self):
        return f"EisensteinInt({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}w"
        return f"{self.a}{self.b:+d}w"

    def __reduce__(self):
        return (EisensteinInt, (self.a, self.b))

    # ------------------------------------------------------------------
    # Number-theoretic helpers
    # ------------------------------------------------------------------

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def norm(self) -> int:
        return self.a * self.a - self.a * self.b + self.b * self.b

    def conjugate(self) -> "EisensteinInt":
        # conj(w) = w^2 = -1 - w
        return EisensteinInt(self.a - self.b, -self.b)

    def to_complex(self) -> complex:
        return complex(self.a - 0.5 * self.b, SQRT3 / 2.0 * self.b)

    def is_unit(self) -> bool:
        return self.norm() == 1

    def associates(self) -> tuple["EisensteinInt", ...]:
        return tuple(u * self for u in UNITS)

    def canonical(self) -> "EisensteinInt":
        """The associate with a > 0 and the smallest non-negative b."""
        if self.is_zero():
            return self
        candidates = [z for z in self.associates() if z.a > 0 and z.b >= 0]
        return min(candidates, key=lambda z: z.b)

    def divides(self, other: "EisensteinInt | int") -> bool:
        if self.is_zero():
            return EisensteinInt.coerce(other).is_zero()
        return divmod(EisensteinInt.coerce(other), self)[1].is_zero()

    def exact_div(self, other: "EisensteinInt | int") -> "EisensteinInt":
        quotient, remainder = divmod(self, other)
        if not remainder.is_zero():
            raise ValueError(f"{other} does not divide {self}")
        return quotient


ZERO = EisensteinInt(0, 0)
ONE = EisensteinInt(1, 0)
W = EisensteinInt(0, 1)
UNITS = (ONE, -ONE, W, -W, EisensteinInt(1, 1), EisensteinInt(-1, -1))


def _nearest_point(p: int, q: int, n: int) -> tuple[int, int]:
    """Nearest point of Z[w] to (p + q*w) / n, ties broken lexicographically."""
    fa, fb = p // n, q // n
    best = None
    for da in (0, 1):
        for db in (0, 1):
            ca, cb = fa + da, fb + db
            u, v = p - n * ca, q - n * cb
            dist = u * u - u * v + v * v
            if best is None or dist < best[0]:
                best = (dist, ca, cb)
    return best[1], best[2]


def units() -> tuple[EisensteinInt, ...]:
    return UNITS


def norm(x: EisensteinInt | int) -> int:
    return EisensteinInt.coerce(x).norm()


def to_complex(x: EisensteinInt | int) -> complex:
    return EisensteinInt.coerce(x).to_complex()


def quantize(c: complex) -> EisensteinInt:
    """Closest point of Z[w] to ``c``; ties resolve to the lexicographically smallest (a, b)."""
    c = complex(c)
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise ValueError(f"cannot quantize non-finite value {c}")
    b = 2.0 * c.imag / SQRT3
    a = c.real + b / 2.0
    fa, fb = math.floor(a), math.floor(b)
    best = None
    for da in (0, 1):
        for db in (0, 1):
            ca, cb = fa + da, fb + db
            dist = abs(c - complex(ca - 0.5 * cb, SQRT3 / 2.0 * cb)) ** 2
            if best is None or dist < best[0]:
                best = (dist, ca, cb)
    return EisensteinInt(best[1], best[2])


def quantize_array(z) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`quantize`, returning the (a, b) coordinate arrays."""
    z = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot quantize non-finite values")
    bb = 2.0 * z.imag / SQRT3
    aa = z.real + bb / 2.0
    fa = np.floor(aa).astype(np.int64)
    fb = np.floor(bb).astype(np.int64)
    best_d = np.full(z.shape, np.inf)
    best_a = fa.copy()
    best_b = fb.copy()
    for da in (0, 1):
        for db in (0, 1):
            ca, cb = fa + da, fb + db
            dist = np.abs(z - (ca + cb * OMEGA)) ** 2
            better = dist < best_d
            best_d = np.where(better, dist, best_d)
            best_a = np.where(better, ca, best_a)
            best_b = np.where(better, cb, best_b)
    return best_a, best_b


def to_complex_array(a, b) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) + np.asarray(b, dtype=np.float64) * OMEGA


def gcd(x: EisensteinInt | int, y: EisensteinInt | int) -> EisensteinInt:
    x, y = EisensteinInt.coerce(x), EisensteinInt.coerce(y)
    if x.is_zero() and y.is_zero():
        raise ValueError("gcd(0, 0) is undefined")
    while not y.is_zero():
        x, y = y, x % y
    return x.canonical()


def xgcd(x: EisensteinInt | int, y: EisensteinInt | int) -> tuple[EisensteinInt, EisensteinInt, EisensteinInt]:
    """Return (g, s, t) with s*x + t*y = g and g the canonical gcd."""
    x, y = EisensteinInt.coerce(x), EisensteinInt.coerce(y)
    if x.is_zero() and y.is_zero():
        raise ValueError("gcd(0, 0) is undefined")
    old_r, r = x, y
    old_s, s = ONE, ZERO
    old_t, t = ZERO, ONE
    while not r.is_zero():
        q, rem = divmod(old_r, r)
        old_r, r = r, rem
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    g = old_r.canonical()
    unit = next(u for u in UNITS if u * old_r == g)
    return g, unit * old_s, unit * old_t


_TERM = re.compile(r"[+-]?[^+-]+")


def parse(text: str) -> EisensteinInt:
    """Parse the textual form "a+bw" ("2+4w", "-1-1w", "3", "w", "- 2w")."""
    cleaned = str(text).replace(" ", "").replace("ω", "w").replace("*", "")
    if not cleaned:
        raise ValueError("empty Eisenstein literal")
    if _TERM.sub("", cleaned):
        raise ValueError(f"invalid Eisenstein literal {text!r}")
    a = b = 0
    for term in _TERM.findall(cleaned):
        if term.endswith("w"):
            coef = term[:-1]
            if coef in ("", "+"):
                b += 1
            elif coef == "-":
                b -= 1
            else:
                try:
                    b += int(coef)
                except ValueError as e:
                    raise ValueError(f"invalid Eisenstein literal {text!r}") from e
        else:
            try:
                a += int(term)
            except ValueError as e:
                raise ValueError(f"invalid Eisenstein literal {text!r}") from e
    return EisensteinInt(a, b)


# ---------------------------------------------------------------------------
# Factorization
# ---------------------------------------------------------------------------


class PrimeType(str, Enum):
    TYPE1 = "Type1"  # rational primes 2 and 6j+5
    TYPE2 = "Type2"  # norm is a rational prime 6j+1
    TYPE3 = "Type3"  # associates of 1+2w


# Type-3 primes are always reported as this representative.
RAMIFIED_PRIME = EisensteinInt(1, 2)


class PrimeFactor(NamedTuple):
    prime: EisensteinInt
    exponent: int
    kind: PrimeType


class EisensteinFactorization(NamedTuple):
    unit: EisensteinInt
    factors: tuple[PrimeFactor, ...]

    def reconstruct(self) -> EisensteinInt:
        value = self.unit
        for factor_ in self.factors:
            value = value * factor_.prime**factor_.exponent
        return value

    def __str__(self):
        parts = [f"unit={self.unit}"]
        parts.extend(f"({f.prime})^{f.exponent} [{f.kind.value}]" for f in self.factors)
        return ", ".join(parts)


def _rational_prime_factors(n: int) -> list[int]:
    primes = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            primes.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        primes.append(n)
    return primes


def _split_prime(p: int) -> EisensteinInt:
    """An element of norm ``p`` for a rational prime p = 1 mod 3."""
    for b in range(math.isqrt(4 * p // 3) + 2):
        disc = 4 * p - 3 * b * b
        if disc < 0:
            break
        root = math.isqrt(disc)
        if root * root != disc:
            continue
        for twice_a in (b + root, b - root):
            if twice_a % 2 == 0:
                candidate = EisensteinInt(twice_a // 2, b)
                if candidate.norm() == p:
                    return candidate
    raise ArithmeticError(f"no Eisenstein element of norm {p}")


def classify_prime(prime: EisensteinInt) -> PrimeType | None:
    """Return the prime type of ``prime`` or None when it is not an Eisenstein prime."""
    n = prime.norm()
    if n == 3:
        return PrimeType.TYPE3
    if n > 3 and _rational_prime_factors(n) == [n] and n % 3 == 1:
        return PrimeType.TYPE2
    if prime.b == 0 or prime.canonical().b == 0:
        p = prime.canonical().a
        if _rational_prime_factors(p) == [p] and p % 3 == 2:
            return PrimeType.TYPE1
    return None


def factor(x: EisensteinInt | int) -> EisensteinFactorization:
    """Factor ``x`` into a unit times powers of pairwise non-associate primes."""
    x = EisensteinInt.coerce(x)
    if x.is_zero():
        raise ValueError("cannot factor zero")
    n = x.norm()
    if n > FACTOR_NORM_BOUND:
        raise ValueError(f"norm {n} exceeds the trial-division bound {FACTOR_NORM_BOUND}")

    factors: list[PrimeFactor] = []
    remaining = x
    for p in _rational_prime_factors(n):
        if p == 3:
            candidates = [(RAMIFIED_PRIME, PrimeType.TYPE3)]
        elif p % 3 == 2:
            candidates = [(EisensteinInt(p, 0), PrimeType.TYPE1)]
        else:
            pi = _split_prime(p).canonical()
            candidates = [(z, PrimeType.TYPE2) for z in sorted({pi, pi.conjugate().canonical()})]
        for prime, kind in candidates:
            exponent = 0
            while True:
                quotient, remainder = divmod(remaining, prime)
                if not remainder.is_zero():
                    break
                remaining = quotient
                exponent += 1
            if exponent:
                factors.append(PrimeFactor(prime, exponent, kind))

    if not remaining.is_unit():
        raise ArithmeticError(f"factorization of {x} left a non-unit remainder {remaining}")
    result = EisensteinFactorization(remaining, tuple(factors))
    logger.debug("factor(%s) = %s", x, result)
    return result
