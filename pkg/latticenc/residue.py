"""
Residue rings S/<m> of the Eisenstein integers.

Every residue class is represented by its minimum-norm coset leader (ties resolved by the quantizer
tie-break) and addressed by a small integer symbol index. Index 0 is always the zero class and the
remaining leaders are ordered by norm, then lexicographically. Finite fields S/<p>, chain rings
S/<p^gamma> and the composite ring S/<varpi> all share :class:`ResidueRing`; :class:`CrtSystem`
splits S/<varpi> into its prime-power layers.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np

from latticenc.eisenstein import ONE, ZERO, EisensteinInt, PrimeType, classify_prime, factor, gcd, xgcd
from latticenc.exceptions import EnumerationBoundError, InvalidModulusError

logger = logging.getLogger(__name__)

ENUMERATION_BOUND = 4096
TABLE_BOUND = 256


class Modulus:
    """A prime power p^gamma of S, the modulus of one layer."""

    __slots__ = ("prime", "exponent", "value", "cardinality", "kind")

    def __init__(self, prime: EisensteinInt | int, exponent: int = 1):
        prime = EisensteinInt.coerce(prime)
        kind = classify_prime(prime)
        if kind is None:
            raise InvalidModulusError(f"{prime} is not an Eisenstein prime")
        if exponent < 1:
            raise InvalidModulusError(f"exponent must be positive, got {exponent}")
        self.prime = prime
        self.exponent = int(exponent)
        self.value = prime**exponent
        self.cardinality = self.value.norm()
        self.kind: PrimeType = kind

    @property
    def is_field(self) -> bool:
        return self.exponent == 1

    @property
    def residue_field_size(self) -> int:
        return self.prime.norm()

    def ring(self) -> "ResidueRing":
        return residue_ring(self.value)

    def field(self) -> "ResidueRing":
        """The residue field S/<p>."""
        return residue_ring(self.prime)

    def __eq__(self, other):
        if not isinstance(other, Modulus):
            return NotImplemented
        return self.prime == other.prime and self.exponent == other.exponent

    def __hash__(self):
        return hash((self.prime, self.exponent))

    def __repr__(self):
        return f"Modulus({self.prime!s}, {self.exponent})"

    def __str__(self):
        if self.exponent == 1:
            return f"<{self.prime}>"
        return f"<{self.prime}>^{self.exponent}"


class ResidueRing:
    """The ring S/<modulus> with symbol-indexed coset leaders.

    Addition and multiplication tables are precomputed when the ring has at most
    ``TABLE_BOUND`` elements; larger rings reduce on the fly.
    """

    def __init__(self, modulus: EisensteinInt | int, *, bound: int = ENUMERATION_BOUND):
        modulus = EisensteinInt.coerce(modulus)
        if modulus.is_zero():
            raise InvalidModulusError("the zero ideal has no finite residue ring")
        self.modulus = modulus
        self.order = modulus.norm()
        if self.order > bound:
            raise EnumerationBoundError(
                f"ring S/<{modulus}> has {self.order} elements, over the bound {bound}",
                size=self.order,
                bound=bound,
            )

        radius = math.isqrt(self.order) + 2
        span = np.arange(-radius, radius + 1, dtype=np.int64)
        box_a, box_b = (arr.ravel() for arr in np.meshgrid(span, span, indexing="ij"))
        rem_a, rem_b = self._remainder_coords(box_a, box_b)
        leaders = sorted(
            {(int(a), int(b)) for a, b in zip(rem_a, rem_b)},
            key=lambda ab: (ab[0] * ab[0] - ab[0] * ab[1] + ab[1] * ab[1], ab),
        )
        if len(leaders) != self.order:
            raise ArithmeticError(f"enumerated {len(leaders)} cosets for S/<{modulus}>, expected {self.order}")

        self.leader_a = np.array([a for a, _ in leaders], dtype=np.int64)
        self.leader_b = np.array([b for _, b in leaders], dtype=np.int64)
        self.leaders: tuple[EisensteinInt, ...] = tuple(EisensteinInt(a, b) for a, b in leaders)
        self.leader_norms = self.leader_a**2 - self.leader_a * self.leader_b + self.leader_b**2
        self._index = {z: i for i, z in enumerate(self.leaders)}

        self._grid_radius = int(max(np.abs(self.leader_a).max(), np.abs(self.leader_b).max()))
        side = 2 * self._grid_radius + 1
        self._grid = np.full((side, side), -1, dtype=np.int64)
        self._grid[self.leader_a + self._grid_radius, self.leader_b + self._grid_radius] = np.arange(self.order)

        # multiplicity of the minimum norm inside each coset
        box_idx = self._grid[rem_a + self._grid_radius, rem_b + self._grid_radius]
        box_norm = box_a**2 - box_a * box_b + box_b**2
        hits = box_norm == self.leader_norms[box_idx]
        self.leader_multiplicity = np.bincount(box_idx[hits], minlength=self.order)

        self._add = self._mul = None
        if self.order <= TABLE_BOUND:
            i, j = np.meshgrid(np.arange(self.order), np.arange(self.order), indexing="ij")
            self._add = self._sum_indices(i, j)
            self._mul = self._product_indices(i, j)
        self.zero = 0
        self.one = self.reduce(ONE)
        logger.debug("built residue ring S/<%s> with %d elements", modulus, self.order)

    # ------------------------------------------------------------------
    # Reduction
    # ------------------------------------------------------------------

    def _remainder_coords(self, a, b) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        ma, mb = self.modulus.a, self.modulus.b
        ca, cb = ma - mb, -mb
        p = a * ca - b * cb
        q = a * cb + b * ca - b * cb
        n = self.order
        fa = np.floor_divide(p, n)
        fb = np.floor_divide(q, n)
        best_d = best_qa = best_qb = None
        for da in (0, 1):
            for db in (0, 1):
                qa, qb = fa + da, fb + db
                u, v = p - n * qa, q - n * qb
                dist = u * u - u * v + v * v
                if best_d is None:
                    best_d, best_qa, best_qb = dist, qa, qb
                    continue
                better = dist < best_d
                best_d = np.where(better, dist, best_d)
                best_qa = np.where(better, qa, best_qa)
                best_qb = np.where(better, qb, best_qb)
        ra = a - (best_qa * ma - best_qb * mb)
        rb = b - (best_qa * mb + best_qb * ma - best_qb * mb)
        return ra, rb

    def reduce_array(self, a, b) -> np.ndarray:
        """Symbol indices of the elements with coordinate arrays (a, b)."""
        ra, rb = self._remainder_coords(a, b)
        return self._grid[ra + self._grid_radius, rb + self._grid_radius]

    def reduce(self, x: EisensteinInt | int) -> int:
        x = EisensteinInt.coerce(x)
        return self._index[x % self.modulus]

    def leader(self, index: int) -> EisensteinInt:
        return self.leaders[int(index)]

    def index_of(self, leader: EisensteinInt) -> int:
        """Index of an exact coset leader; use :meth:`reduce` for arbitrary elements."""
        return self._index[leader]

    @cached_property
    def leader_complex(self) -> np.ndarray:
        return self.leader_a - 0.5 * self.leader_b + 1j * (math.sqrt(3.0) / 2.0) * self.leader_b

    # ------------------------------------------------------------------
    # Arithmetic on symbol indices (scalars or arrays)
    # ------------------------------------------------------------------

    def _sum_indices(self, x, y):
        return self.reduce_array(self.leader_a[x] + self.leader_a[y], self.leader_b[x] + self.leader_b[y])

    def _product_indices(self, x, y):
        a, b = self.leader_a[x], self.leader_b[x]
        c, d = self.leader_a[y], self.leader_b[y]
        return self.reduce_array(a * c - b * d, a * d + b * c - b * d)

    def add(self, x, y):
        if self._add is not None:
            return self._add[x, y]
        return self._sum_indices(np.asarray(x), np.asarray(y))

    def mul(self, x, y):
        if self._mul is not None:
            return self._mul[x, y]
        return self._product_indices(np.asarray(x), np.asarray(y))

    def neg(self, x):
        x = np.asarray(x)
        return self.reduce_array(-self.leader_a[x], -self.leader_b[x])

    def sub(self, x, y):
        return self.add(x, self.neg(y))

    def scale(self, s: EisensteinInt | int, x):
        """Multiply symbols ``x`` by a ring scalar ``s``."""
        s = EisensteinInt.coerce(s)
        x = np.asarray(x)
        a, b = self.leader_a[x], self.leader_b[x]
        return self.reduce_array(s.a * a - s.b * b, s.a * b + s.b * a - s.b * b)

    @property
    def add_table(self) -> np.ndarray | None:
        return self._add

    @property
    def mul_table(self) -> np.ndarray | None:
        return self._mul

    @property
    def is_field(self) -> bool:
        return classify_prime(self.modulus) is not None

    @cached_property
    def inverse_table(self) -> np.ndarray:
        """inverse_table[x] is the multiplicative inverse of x; entry 0 is -1."""
        if not self.is_field:
            raise InvalidModulusError(f"S/<{self.modulus}> is not a field")
        inv = np.full(self.order, -1, dtype=np.int64)
        symbols = np.arange(self.order)
        for x in range(1, self.order):
            products = self.mul(np.full(self.order, x), symbols)
            inv[x] = int(np.flatnonzero(products == self.one)[0])
        return inv

    def element(self, x: EisensteinInt | int) -> "ResidueElement":
        return ResidueElement(self.leader(self.reduce(x)), self)

    def __len__(self):
        return self.order

    def __repr__(self):
        return f"ResidueRing({self.modulus!s})"


@lru_cache(maxsize=64)
def residue_ring(modulus: EisensteinInt) -> ResidueRing:
    """Shared, lazily built ring for ``modulus``."""
    return ResidueRing(modulus)


@dataclass(frozen=True)
class ResidueElement:
    """A residue class held by its coset leader."""

    representative: EisensteinInt
    ring: ResidueRing

    @property
    def index(self) -> int:
        return self.ring.index_of(self.representative)

    def _same_ring(self, other: "ResidueElement") -> None:
        if self.ring.modulus != other.ring.modulus:
            raise InvalidModulusError(f"cannot combine residues mod {self.ring.modulus} and {other.ring.modulus}")

    def __add__(self, other: "ResidueElement") -> "ResidueElement":
        self._same_ring(other)
        return self.ring.element(self.representative + other.representative)

    def __sub__(self, other: "ResidueElement") -> "ResidueElement":
        self._same_ring(other)
        return self.ring.element(self.representative - other.representative)

    def __mul__(self, other: "ResidueElement") -> "ResidueElement":
        self._same_ring(other)
        return self.ring.element(self.representative * other.representative)

    def __neg__(self) -> "ResidueElement":
        return self.ring.element(-self.representative)

    def is_zero(self) -> bool:
        return self.representative.is_zero()

    def __str__(self):
        return f"{self.representative} (mod {self.ring.modulus})"


def coset_leaders(m: Modulus | EisensteinInt) -> tuple[EisensteinInt, ...]:
    value = m.value if isinstance(m, Modulus) else EisensteinInt.coerce(m)
    return residue_ring(value).leaders


def project(x: EisensteinInt | int, m: Modulus | EisensteinInt) -> ResidueElement:
    value = m.value if isinstance(m, Modulus) else EisensteinInt.coerce(m)
    return residue_ring(value).element(x)


class FieldTables(NamedTuple):
    leaders: tuple[EisensteinInt, ...]
    add: np.ndarray
    mul: np.ndarray
    inverse: np.ndarray


def field_table(m: Modulus) -> FieldTables:
    if not m.is_field:
        raise InvalidModulusError(f"{m} is a chain ring with zero divisors; no inverse table exists")
    ring = m.ring()
    if ring.add_table is None:
        raise EnumerationBoundError(f"field {m} is too large for tables", size=ring.order, bound=TABLE_BOUND)
    return FieldTables(ring.leaders, ring.add_table, ring.mul_table, ring.inverse_table)


def q_adic_decompose(x: EisensteinInt | int, m: Modulus) -> tuple[int, ...]:
    """Residue-field digits (as indices of S/<p>) of x mod p^gamma, least significant first."""
    field = m.field()
    current = m.ring().element(x).representative
    digits = []
    for _ in range(m.exponent):
        digit = field.reduce(current)
        digits.append(digit)
        current = (current - field.leader(digit)).exact_div(m.prime)
    return tuple(digits)


def q_adic_recompose(digits, m: Modulus) -> EisensteinInt:
    field = m.field()
    total = ZERO
    for t, digit in enumerate(digits):
        total = total + field.leader(digit) * m.prime**t
    return m.ring().element(total).representative


class CrtSystem:
    """The CRT isomorphism S/<varpi> -> prod_i S/<p_i^gamma_i>.

    Layers are ordered by cardinality, then lexicographically by prime.
    """

    def __init__(self, varpi: EisensteinInt | int, layers: list[Modulus] | None = None):
        varpi = EisensteinInt.coerce(varpi)
        if varpi.is_zero() or varpi.is_unit():
            raise InvalidModulusError(f"varpi must be a non-zero non-unit, got {varpi}")
        if layers is None:
            layers = [Modulus(f.prime, f.exponent) for f in factor(varpi).factors]
        layers = sorted(layers, key=lambda m: (m.cardinality, m.prime))
        for i, mi in enumerate(layers):
            for mj in layers[i + 1 :]:
                if gcd(mi.value, mj.value) != ONE:
                    raise InvalidModulusError(f"layer moduli {mi} and {mj} are not coprime")
        product = ONE
        for m in layers:
            product = product * m.value
        if product.canonical() != varpi.canonical():
            raise InvalidModulusError(f"layer moduli multiply to {product}, not {varpi} up to a unit")

        self.varpi = varpi
        self.layers: tuple[Modulus, ...] = tuple(layers)
        self.ring = residue_ring(varpi)
        self.layer_rings = tuple(m.ring() for m in self.layers)
        self.cofactors = tuple(varpi.exact_div(m.value) for m in self.layers)

        g, coeffs = self.cofactors[0], [ONE]
        for cofactor in self.cofactors[1:]:
            g, s, t = xgcd(g, cofactor)
            coeffs = [c * s for c in coeffs] + [t]
        if g != ONE:
            raise InvalidModulusError(f"cofactors of {varpi} are not coprime")
        self.bezout = tuple(coeffs)
        self.idempotents = tuple(
            self.ring.leader(self.ring.reduce(s * a)) for s, a in zip(self.bezout, self.cofactors)
        )

        # components[r, i] is the layer-i symbol of residue r
        symbols = np.arange(self.ring.order)
        self.components = np.stack(
            [r.reduce_array(self.ring.leader_a[symbols], self.ring.leader_b[symbols]) for r in self.layer_rings],
            axis=1,
        )
        self.assemble = np.full(tuple(r.order for r in self.layer_rings), -1, dtype=np.int64)
        self.assemble[tuple(self.components.T)] = symbols
        if np.any(self.assemble < 0):
            raise InvalidModulusError(f"CRT map for {varpi} is not bijective")
        logger.debug("CRT system for %s: layers %s", varpi, [str(m) for m in self.layers])

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def forward(self, x) -> np.ndarray:
        """Layer symbols of residues ``x`` (indices of S/<varpi>), along a new last axis."""
        return self.components[np.asarray(x)]

    def inverse(self, parts) -> np.ndarray:
        """Residue index of S/<varpi> from per-layer symbols stacked on the last axis."""
        parts = np.asarray(parts)
        if parts.shape[-1] != self.num_layers:
            raise InvalidModulusError(f"expected {self.num_layers} layer parts, got {parts.shape[-1]}")
        return self.assemble[tuple(np.moveaxis(parts, -1, 0))]

    def inverse_by_idempotents(self, parts) -> EisensteinInt:
        """Bezout reconstruction sum_i part_i * e_i, reduced mod varpi."""
        if len(parts) != self.num_layers:
            raise InvalidModulusError(f"expected {self.num_layers} layer parts, got {len(parts)}")
        total = ZERO
        for ring, part, e in zip(self.layer_rings, parts, self.idempotents):
            total = total + ring.leader(part) * e
        return self.ring.leader(self.ring.reduce(total))


def crt_forward(x: EisensteinInt | int, system: CrtSystem) -> tuple[ResidueElement, ...]:
    x = EisensteinInt.coerce(x)
    return tuple(ring.element(x) for ring in system.layer_rings)


def crt_inverse(parts: tuple[ResidueElement, ...], system: CrtSystem) -> ResidueElement:
    if len(parts) != system.num_layers:
        raise InvalidModulusError(f"expected {system.num_layers} layer parts, got {len(parts)}")
    indices = [ring.reduce(p.representative) for ring, p in zip(system.layer_rings, parts)]
    return system.ring.element(system.inverse_by_idempotents(indices))
