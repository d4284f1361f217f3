"""
Elementary divisor construction (EDC) lattices over S = Z[w].

Given varpi with prime-power factors p_i^gamma_i and one linear code C^i per factor, the lattice is

    Lambda = { lambda in S^n : sigma_i(lambda) in C^i for every layer i }

with Lambda' = varpi S^n as coarse lattice. This module builds generator sets for Lambda, the primary
sublattices Lambda_{p_i} and the layer kernels Lambda_i', maps messages to lattice points and back,
and evaluates nominal coding gains and kissing numbers, both by closed form and by brute force.
"""

import itertools
import logging
import math
from collections.abc import Sequence
from functools import cached_property
from typing import NamedTuple

import numpy as np

from latticenc.codes import BlockCode, LinearCode, NestedBlockCode
from latticenc.eisenstein import SQRT3, UNITS, ZERO, EisensteinInt, quantize
from latticenc.exceptions import EnumerationBoundError, InvalidModulusError, NotACodewordError, NotInLatticeError
from latticenc.residue import CrtSystem, Modulus

logger = logging.getLogger(__name__)

THETA = SQRT3 / 2.0
COSET_BOUND = 20736

Vector = tuple[EisensteinInt, ...]


def as_vector(values: Sequence) -> Vector:
    return tuple(EisensteinInt.coerce(v) for v in values)


# ---------------------------------------------------------------------------
# Generator sets and Hermite normal form
# ---------------------------------------------------------------------------


class GeneratorSet:
    """Rows generating an S-submodule of S^n."""

    def __init__(self, rows: Sequence[Sequence], n: int | None = None, canonical: bool = False):
        self.rows: tuple[Vector, ...] = tuple(as_vector(r) for r in rows)
        if n is None:
            if not self.rows:
                raise ValueError("cannot infer the dimension of an empty generator set")
            n = len(self.rows[0])
        if any(len(r) != n for r in self.rows):
            raise ValueError("all generator rows must have the same length")
        self.n = n
        self.canonical = canonical

    @classmethod
    def scaled_identity(cls, scale: EisensteinInt | int, n: int) -> "GeneratorSet":
        scale = EisensteinInt.coerce(scale)
        return cls([[scale if i == j else ZERO for j in range(n)] for i in range(n)], n)

    def __add__(self, other: "GeneratorSet") -> "GeneratorSet":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return GeneratorSet(self.rows + other.rows, self.n)

    def hermite(self) -> "GeneratorSet":
        """Row-style Hermite normal form: canonical pivots, entries above pivots reduced."""
        if self.canonical:
            return self
        rows = [list(r) for r in self.rows]
        pivot_row = 0
        for col in range(self.n):
            while True:
                live = [i for i in range(pivot_row, len(rows)) if not rows[i][col].is_zero()]
                if not live:
                    break
                best = min(live, key=lambda i: (rows[i][col].norm(), i))
                rows[pivot_row], rows[best] = rows[best], rows[pivot_row]
                pivot = rows[pivot_row][col]
                settled = True
                for i in range(pivot_row + 1, len(rows)):
                    if rows[i][col].is_zero():
                        continue
                    q, _ = divmod(rows[i][col], pivot)
                    rows[i] = [x - q * y for x, y in zip(rows[i], rows[pivot_row])]
                    settled = settled and rows[i][col].is_zero()
                if settled:
                    break
            if pivot_row >= len(rows) or rows[pivot_row][col].is_zero():
                continue
            pivot = rows[pivot_row][col]
            unit = next(u for u in UNITS if u * pivot == pivot.canonical())
            rows[pivot_row] = [unit * x for x in rows[pivot_row]]
            pivot = rows[pivot_row][col]
            for i in range(pivot_row):
                q, _ = divmod(rows[i][col], pivot)
                if not q.is_zero():
                    rows[i] = [x - q * y for x, y in zip(rows[i], rows[pivot_row])]
            pivot_row += 1
        reduced = [r for r in rows[:pivot_row] if any(not x.is_zero() for x in r)]
        return GeneratorSet(reduced, self.n, canonical=True)

    @cached_property
    def _hnf(self) -> "GeneratorSet":
        return self.hermite()

    @property
    def rank(self) -> int:
        return len(self._hnf.rows)

    def pivots(self) -> list[tuple[int, EisensteinInt]]:
        out = []
        for row in self._hnf.rows:
            col = next(j for j, x in enumerate(row) if not x.is_zero())
            out.append((col, row[col]))
        return out

    def contains(self, vector: Sequence) -> bool:
        """Membership by back-substitution against the Hermite basis."""
        v = list(as_vector(vector))
        if len(v) != self.n:
            raise ValueError(f"expected a vector of length {self.n}")
        for row, (col, pivot) in zip(self._hnf.rows, self.pivots()):
            if any(not x.is_zero() for x in v[:col]):
                return False
            q, r = divmod(v[col], pivot)
            if not r.is_zero():
                return False
            if not q.is_zero():
                v = [x - q * y for x, y in zip(v, row)]
        return all(x.is_zero() for x in v)

    def contains_set(self, other: "GeneratorSet") -> bool:
        return all(self.contains(r) for r in other.rows)

    def volume(self) -> float:
        """Fundamental volume of a full-rank lattice (real 2n-dimensional)."""
        if self.rank != self.n:
            raise ValueError("volume is only defined for full-rank lattices")
        return THETA**self.n * math.prod(p.norm() for _, p in self.pivots())

    def separable_scale(self) -> EisensteinInt | None:
        """s when the lattice equals s S^n, otherwise None."""
        hnf = self._hnf
        if self.rank != self.n:
            return None
        scale = hnf.rows[0][0]
        for i, row in enumerate(hnf.rows):
            for j, x in enumerate(row):
                if (i == j and x != scale) or (i != j and not x.is_zero()):
                    return None
        return scale

    def __eq__(self, other):
        if not isinstance(other, GeneratorSet):
            return NotImplemented
        return self.n == other.n and self._hnf.rows == other._hnf.rows

    def __hash__(self):
        return hash(self._hnf.rows)

    def __repr__(self):
        body = "; ".join(" ".join(str(x) for x in row) for row in self.rows)
        return f"GeneratorSet([{body}], canonical={self.canonical})"


# ---------------------------------------------------------------------------
# Lattice parameters
# ---------------------------------------------------------------------------


class LayerSpec:
    """One layer: modulus p^gamma, cofactor delta = varpi / p^gamma and the layer code."""

    def __init__(self, modulus: Modulus, cofactor: EisensteinInt, code: LinearCode):
        if code.ring.modulus != modulus.value:
            raise InvalidModulusError(f"code over S/<{code.ring.modulus}> given for layer {modulus}")
        self.modulus = modulus
        self.cofactor = cofactor
        self.code = code

    @property
    def message_len(self) -> int:
        return self.code.k

    @property
    def digit_dimensions(self) -> dict[int, int]:
        """k'_t per digit level; a field or plain chain-ring code puts all of k at t = 0."""
        if isinstance(self.code, NestedBlockCode):
            return self.code.digit_dimensions
        dims = {t: 0 for t in range(self.modulus.exponent)}
        dims[0] = self.code.k
        return dims

    def __repr__(self):
        return f"LayerSpec({self.modulus}, delta={self.cofactor}, {self.code!r})"


class LatticeSpec:
    """An EDC lattice: varpi, length n and one code per prime-power layer (in CRT layer order)."""

    def __init__(self, varpi: EisensteinInt | int, codes: Sequence[LinearCode], crt: CrtSystem | None = None):
        self.crt = crt or CrtSystem(varpi)
        self.varpi = self.crt.varpi
        if len(codes) != self.crt.num_layers:
            raise InvalidModulusError(f"{varpi} has {self.crt.num_layers} layers but {len(codes)} codes were given")
        lengths = {code.n for code in codes}
        if len(lengths) != 1:
            raise ValueError(f"layer codes have different lengths {sorted(lengths)}")
        self.n = lengths.pop()
        self.layers = tuple(
            LayerSpec(m, cofactor, code) for m, cofactor, code in zip(self.crt.layers, self.crt.cofactors, codes)
        )
        self.ring = self.crt.ring

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def quotient_order(self) -> int:
        """|Lambda / Lambda'| = prod_i |C^i|."""
        return math.prod(layer.code.size for layer in self.layers)

    def message_rate(self) -> float:
        """Overall message rate sum_i log2 |C^i| / n in bits per complex dimension."""
        return sum(layer.code.log2_size for layer in self.layers) / self.n

    def check_layer(self, i: int) -> LayerSpec:
        if not 0 <= i < self.num_layers:
            raise IndexError(f"layer index {i} outside 0..{self.num_layers - 1}")
        return self.layers[i]

    # -- vectorised residue maps used by the transceivers ---------------------

    def encode_residues(self, messages: Sequence[np.ndarray]) -> np.ndarray:
        """Residues mod varpi (indices, shape (n,)) of phi_tilde(messages)."""
        if len(messages) != self.num_layers:
            raise ValueError(f"expected {self.num_layers} layer messages, got {len(messages)}")
        parts = np.stack([layer.code.encode(w) for layer, w in zip(self.layers, messages)], axis=-1)
        return self.crt.inverse(parts)

    def layer_words(self, residues: np.ndarray) -> np.ndarray:
        """Layer symbols (..., n, m) of residue vectors mod varpi."""
        return self.crt.forward(residues)

    def residues_of(self, point: Sequence) -> np.ndarray:
        point = as_vector(point)
        if len(point) != self.n:
            raise ValueError(f"expected a vector of length {self.n}")
        return np.array([self.ring.reduce(x) for x in point], dtype=np.int64)

    def contains(self, point: Sequence) -> bool:
        """Codeword criterion: sigma_i(point) in C^i for all layers."""
        words = self.layer_words(self.residues_of(point))
        return all(layer.code.contains(words[:, i]) for i, layer in enumerate(self.layers))

    def lift_rows(self, i: int) -> list[Vector]:
        """Rows e_i * lift(g) for the generator rows g of layer i, reduced mod varpi."""
        layer = self.check_layer(i)
        e = self.crt.idempotents[i]
        rows = []
        for g in layer.code.generator_rows():
            rows.append(tuple(self.ring.leader(self.ring.reduce(e * layer.modulus.ring().leader(s))) for s in g))
        return rows

    def __repr__(self):
        return f"LatticeSpec(varpi={self.varpi}, n={self.n}, layers={list(self.layers)})"


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def build_coarse_generator(spec: LatticeSpec) -> GeneratorSet:
    return GeneratorSet.scaled_identity(spec.varpi, spec.n).hermite()


def _with_coarse(spec: LatticeSpec, rows: list[Vector]) -> GeneratorSet:
    return (GeneratorSet(rows, spec.n) + GeneratorSet.scaled_identity(spec.varpi, spec.n)).hermite()


def build_fine_generator(spec: LatticeSpec) -> GeneratorSet:
    rows = [row for i in range(spec.num_layers) for row in spec.lift_rows(i)]
    return _with_coarse(spec, rows)


def build_primary_generator(spec: LatticeSpec, i: int) -> GeneratorSet:
    return _with_coarse(spec, spec.lift_rows(i))


def build_lif_generator(spec: LatticeSpec, i: int) -> GeneratorSet:
    spec.check_layer(i)
    rows = [row for j in range(spec.num_layers) if j != i for row in spec.lift_rows(j)]
    return _with_coarse(spec, rows)


# ---------------------------------------------------------------------------
# Message maps
# ---------------------------------------------------------------------------


def phi_tilde(messages: Sequence[Sequence[int]], spec: LatticeSpec) -> Vector:
    """Embed per-layer messages as the minimum-norm representative of their coset of Lambda'."""
    residues = spec.encode_residues([np.asarray(w, dtype=np.int64) for w in messages])
    return tuple(spec.ring.leader(r) for r in residues)


def phi(point: Sequence, spec: LatticeSpec) -> list[np.ndarray]:
    words = spec.layer_words(spec.residues_of(point))
    try:
        return [layer.code.unencode(words[:, i]) for i, layer in enumerate(spec.layers)]
    except NotACodewordError as e:
        raise NotInLatticeError(f"vector is not in the lattice: {e}") from e


def varphi(point: Sequence, spec: LatticeSpec, i: int) -> np.ndarray:
    """Layer-i message of a lattice point; the kernel is Lambda_i'."""
    layer = spec.check_layer(i)
    if not spec.contains(point):
        raise NotInLatticeError("vector is not in the lattice")
    words = spec.layer_words(spec.residues_of(point))
    return layer.code.unencode(words[:, i])


def coarse_quantize(x: Sequence[complex] | np.ndarray, sublattice: GeneratorSet) -> Vector:
    """Nearest point of a separable sublattice s S^n."""
    scale = sublattice.separable_scale()
    if scale is None:
        raise ValueError("coarse_quantize only handles separable sublattices s*S^n")
    s = scale.to_complex()
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (sublattice.n,):
        raise ValueError(f"expected a vector of length {sublattice.n}")
    return tuple(scale * quantize(v / s) for v in x)


# ---------------------------------------------------------------------------
# Figures of merit
# ---------------------------------------------------------------------------


class Scope(NamedTuple):
    kind: str  # "primary" | "lif" | "full"
    layer: int | None = None

    @classmethod
    def parse(cls, text: str) -> "Scope":
        if text == "full":
            return cls("full")
        kind, _, layer = text.partition(":")
        if kind not in ("primary", "lif") or not layer.isdigit():
            raise ValueError(f"scope must be 'full', 'primary:<i>' or 'lif:<i>', got {text!r}")
        return cls(kind, int(layer))

    def __str__(self):
        return self.kind if self.layer is None else f"{self.kind}:{self.layer}"


class FigureOfMerit(NamedTuple):
    scope: Scope
    d2: float
    kissing: float
    volume: float
    gain: float
    exact: bool

    @property
    def gain_db(self) -> float:
        return 10.0 * math.log10(self.gain)


def min_euclidean_weight(
    code: LinearCode, scale: EisensteinInt | int = 1, bound: int | None = None
) -> tuple[float, int]:
    """Minimum over nonzero codewords of sum_j |delta|^2 norm(leader(c_j)), with its multiplicity."""
    _, words = code.codewords() if bound is None else code.codewords(bound)
    nonzero = np.any(words != 0, axis=1)
    if not np.any(nonzero):
        raise ValueError("code has no nonzero codeword")
    weights = code.ring.leader_norms[words[nonzero]].sum(axis=1)
    best = int(weights.min())
    return float(best * EisensteinInt.coerce(scale).norm()), int(np.count_nonzero(weights == best))


def _composite_words(spec: LatticeSpec, bound: int = COSET_BOUND) -> tuple[np.ndarray, np.ndarray]:
    """All residue vectors of Lambda/Lambda' and their layer codewords (cosets, n, m)."""
    if spec.quotient_order > bound:
        raise EnumerationBoundError(
            f"|Lambda/Lambda'| = {spec.quotient_order} exceeds the bound {bound}",
            size=spec.quotient_order,
            bound=bound,
        )
    per_layer = [layer.code.codewords()[1] for layer in spec.layers]
    combos = np.indices([len(w) for w in per_layer]).reshape(spec.num_layers, -1).T
    parts = np.stack([per_layer[i][combos[:, i]] for i in range(spec.num_layers)], axis=-1)
    return spec.crt.inverse(parts), parts


def coset_figures(spec: LatticeSpec, scope: Scope) -> tuple[float, float]:
    """Brute-force (d^2, kissing) over the cosets of Lambda/Lambda' selected by ``scope``.

    * full: every nonzero coset (vectors of Lambda outside Lambda')
    * primary:i: nonzero cosets with all other layers zero (Lambda_{p_i} outside Lambda')
    * lif:i: cosets with a nonzero layer-i word (Lambda outside Lambda_i')
    """
    residues, parts = _composite_words(spec)
    nonzero = np.any(parts != 0, axis=1)  # (cosets, m)
    if scope.kind == "full":
        mask = np.any(nonzero, axis=1)
    elif scope.kind == "primary":
        others = np.delete(nonzero, scope.layer, axis=1)
        mask = nonzero[:, scope.layer] & ~np.any(others, axis=1)
    else:
        mask = nonzero[:, scope.layer]
    if not np.any(mask):
        raise ValueError(f"no nonzero coset in scope {scope}")
    ring = spec.ring
    norms = ring.leader_norms[residues[mask]].sum(axis=1)
    mult = ring.leader_multiplicity[residues[mask]].prod(axis=1)
    d2 = int(norms.min())
    return float(d2), float(mult[norms == d2].sum())


def _scope_volume(spec: LatticeSpec, scope: Scope) -> float:
    coarse = (THETA * spec.varpi.norm()) ** spec.n
    if scope.kind == "primary":
        return coarse / spec.layers[scope.layer].code.size
    return coarse / spec.quotient_order


def _prop_primary_field(spec: LatticeSpec, i: int) -> FigureOfMerit:
    layer = spec.layers[i]
    p2 = layer.modulus.prime.norm()
    delta2 = layer.cofactor.norm()
    k, n = layer.code.k, spec.n
    weight, count = min_euclidean_weight(layer.code, layer.cofactor)
    gain = weight / (THETA * p2 ** (1.0 - k / n) * delta2)
    q = layer.modulus.cardinality
    kissing = count * (6.0 / (q - 1)) ** (weight / delta2) if q - 1 <= 6 else float(count)
    scope = Scope("primary", i)
    return FigureOfMerit(scope, weight, kissing, _scope_volume(spec, scope), gain, True)


def _digit_codes(layer: LayerSpec) -> dict[int, BlockCode]:
    """Residue-field codes C^(t) of the digit levels that carry codewords."""
    code, modulus = layer.code, layer.modulus
    if isinstance(code, NestedBlockCode):
        return {t: code.digit_code(t) for t in range(modulus.exponent) if any(s <= t for s in code.shifts)}
    if isinstance(code, BlockCode):
        if code.k == 0:
            return {}
        field = modulus.field()
        parity = field.reduce_array(code.ring.leader_a[code.parity], code.ring.leader_b[code.parity])
        reduced = BlockCode(field, parity)
        return {t: reduced for t in range(modulus.exponent)}
    raise ValueError(f"no digit decomposition for {type(code).__name__} over a chain ring")


def _prop_primary_chain(spec: LatticeSpec, i: int) -> FigureOfMerit:
    layer = spec.layers[i]
    p2 = layer.modulus.prime.norm()
    delta2 = layer.cofactor.norm()
    gamma, n = layer.modulus.exponent, spec.n
    dims = layer.digit_dimensions
    q = layer.modulus.residue_field_size
    exponent = sum((gamma - t) * kt for t, kt in dims.items())

    candidates, kissing = [], 0.0
    for t, digit in _digit_codes(layer).items():
        weight_t, count_t = min_euclidean_weight(digit, layer.cofactor)
        candidates.append(p2**t * weight_t)
        kissing += count_t * ((6.0 / (q - 1)) ** (weight_t / delta2) if q - 1 <= 6 else 1.0)
    if not candidates:
        raise ValueError(f"layer {i} code has no nonzero digit code")
    bound = p2 ** (exponent / n) * min(candidates) / (THETA * spec.varpi.norm())
    scope = Scope("primary", i)
    volume = _scope_volume(spec, scope)
    return FigureOfMerit(scope, min(candidates), kissing, volume, bound, False)


def _prop_full_fields(spec: LatticeSpec) -> float:
    """Gain of Lambda/Lambda' when every layer is a field, laid out around the first layer.

    omega_min(C~) is the minimum weight of the composite code, which is by definition the d^2 of the
    full coset enumeration.
    """
    first, rest = spec.layers[0], spec.layers[1:]
    weight = coset_figures(spec, Scope("full"))[0]
    n = spec.n
    numerator = weight * math.prod(layer.modulus.prime.norm() ** (layer.code.k / n) for layer in rest)
    p2 = first.modulus.prime.norm()
    return numerator / (THETA * p2 ** (1.0 - first.code.k / n) * first.cofactor.norm())


def _prop_full_general(spec: LatticeSpec) -> float:
    """omega_min(C~) prod_i |p_i|^(2 sum_t (gamma_i - t) k'_it / n) / (theta |varpi|^2)."""
    weight = coset_figures(spec, Scope("full"))[0]
    growth = 1.0
    for layer in spec.layers:
        gamma = layer.modulus.exponent
        exponent = sum((gamma - t) * kt for t, kt in layer.digit_dimensions.items())
        growth *= layer.modulus.prime.norm() ** (exponent / spec.n)
    return weight * growth / (THETA * spec.varpi.norm())


def coding_gain(spec: LatticeSpec, scope: Scope | str) -> FigureOfMerit:
    """Nominal coding gain d^2 / Vol^(1/n) by closed form.

    Primary scopes over fields and the full scope are exact; a primary scope over a chain ring
    returns a lower bound on the gain (and an upper bound on the kissing number).
    """
    scope = Scope.parse(scope) if isinstance(scope, str) else scope
    if scope.kind == "lif":
        raise ValueError("closed forms cover primary and full scopes; use brute_force_figures for lif")
    if scope.kind == "primary":
        layer = spec.check_layer(scope.layer)
        if layer.modulus.is_field:
            return _prop_primary_field(spec, scope.layer)
        return _prop_primary_chain(spec, scope.layer)

    if all(layer.modulus.is_field for layer in spec.layers):
        gain = _prop_full_fields(spec)
    else:
        gain = _prop_full_general(spec)
    d2, kissing = coset_figures(spec, scope)
    return FigureOfMerit(scope, d2, kissing, _scope_volume(spec, scope), gain, True)


def kissing_number(spec: LatticeSpec, scope: Scope | str) -> tuple[float, bool]:
    """Kissing number and whether it is exact (False means an upper bound)."""
    figure = coding_gain(spec, scope)
    return figure.kissing, figure.exact


def brute_force_figures(spec: LatticeSpec, scope: Scope | str) -> FigureOfMerit:
    """Coset-enumeration oracle for d^2, kissing number and gain of any scope."""
    scope = Scope.parse(scope) if isinstance(scope, str) else scope
    if scope.layer is not None:
        spec.check_layer(scope.layer)
    d2, kissing = coset_figures(spec, scope)
    volume = _scope_volume(spec, scope)
    return FigureOfMerit(scope, d2, kissing, volume, d2 / volume ** (1.0 / spec.n), True)


def shortest_vectors(
    lattice: GeneratorSet, excluded: GeneratorSet, max_coordinate_norm: int
) -> tuple[int, int]:
    """Independent oracle: (d^2, count) of the shortest vectors of ``lattice`` outside ``excluded``.

    Enumerates every vector whose coordinates have norm at most ``max_coordinate_norm`` and tests
    membership against the Hermite bases.
    """
    radius = math.isqrt(max_coordinate_norm) + 2
    coords = [
        EisensteinInt(a, b)
        for a in range(-radius, radius + 1)
        for b in range(-radius, radius + 1)
        if a * a - a * b + b * b <= max_coordinate_norm
    ]
    best, count = None, 0
    for vector in itertools.product(coords, repeat=lattice.n):
        weight = sum(x.norm() for x in vector)
        if weight == 0 or (best is not None and weight > best):
            continue
        if not lattice.contains(vector) or excluded.contains(vector):
            continue
        if best is None or weight < best:
            best, count = weight, 1
        else:
            count += 1
    if best is None:
        raise ValueError("no vector found in the enumeration radius")
    return best, count
