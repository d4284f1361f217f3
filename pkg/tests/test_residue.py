"""
Tests for residue rings, coset leaders, q-adic digits and the CRT layer split.
"""

import numpy as np
import pytest

from latticenc.eisenstein import ONE, EisensteinInt
from latticenc.exceptions import EnumerationBoundError, InvalidModulusError
from latticenc.residue import (
    CrtSystem,
    Modulus,
    ResidueRing,
    crt_forward,
    crt_inverse,
    field_table,
    project,
    q_adic_decompose,
    q_adic_recompose,
)


class TestModulus:
    def test_field_sizes(self, f3, f4):
        assert (f3.cardinality, f4.cardinality) == (3, 4)
        assert f3.is_field and f4.is_field

    def test_chain_ring(self):
        m = Modulus(2, 2)
        assert m.value == EisensteinInt(4)
        assert m.cardinality == 16
        assert m.residue_field_size == 4
        assert not m.is_field

    @pytest.mark.parametrize("value", [3, 4, 7, EisensteinInt(2, 4), 1])
    def test_rejects_non_primes(self, value):
        with pytest.raises(InvalidModulusError):
            Modulus(value)

    def test_rejects_zero_exponent(self):
        with pytest.raises(InvalidModulusError):
            Modulus(2, 0)


class TestResidueRing:
    @pytest.mark.parametrize("modulus,order", [(EisensteinInt(1, 2), 3), (2, 4), (EisensteinInt(2, 4), 12), (4, 16)])
    def test_leaders_are_a_transversal(self, modulus, order):
        ring = ResidueRing(modulus)
        assert ring.order == order == len(ring.leaders)
        assert ring.leaders[0] == 0
        assert np.all(np.diff(ring.leader_norms) >= 0)
        for i, leader in enumerate(ring.leaders):
            assert ring.reduce(leader) == i
            assert ring.reduce(leader + ring.modulus * EisensteinInt(3, -5)) == i

    def test_leaders_have_minimum_norm(self):
        ring = ResidueRing(EisensteinInt(2, 4))
        for a in range(-6, 7):
            for b in range(-6, 7):
                x = EisensteinInt(a, b)
                assert ring.leader(ring.reduce(x)).norm() <= x.norm()

    @pytest.mark.parametrize("modulus,expected", [(EisensteinInt(1, 2), [1, 3, 3]), (2, [1, 2, 2, 2])])
    def test_multiplicity(self, modulus, expected):
        assert list(ResidueRing(modulus).leader_multiplicity) == expected

    def test_table_arithmetic_is_a_homomorphism(self, rng):
        ring = ResidueRing(EisensteinInt(2, 4))
        assert ring.add_table is not None
        for x, y in rng.integers(0, ring.order, size=(50, 2)):
            lx, ly = ring.leader(x), ring.leader(y)
            assert ring.add(x, y) == ring.reduce(lx + ly)
            assert ring.mul(x, y) == ring.reduce(lx * ly)
            assert ring.sub(x, y) == ring.reduce(lx - ly)
            assert ring.scale(EisensteinInt(1, 1), x) == ring.reduce(lx * EisensteinInt(1, 1))

    def test_vectorised_reduction(self):
        ring = ResidueRing(2)
        a = np.array([0, 1, 2, 3, -1])
        b = np.array([0, 0, 2, 1, 1])
        expected = [ring.reduce(EisensteinInt(int(x), int(y))) for x, y in zip(a, b)]
        assert list(ring.reduce_array(a, b)) == expected

    def test_inverse_table(self, f4):
        ring = f4.ring()
        inverse = ring.inverse_table
        assert inverse[0] == -1
        for x in range(1, ring.order):
            assert ring.mul(x, inverse[x]) == ring.one

    def test_chain_ring_has_no_inverse_table(self):
        with pytest.raises(InvalidModulusError):
            field_table(Modulus(2, 2))
        with pytest.raises(InvalidModulusError):
            ResidueRing(4).inverse_table

    def test_field_table(self, f3):
        tables = field_table(f3)
        assert tables.add.shape == tables.mul.shape == (3, 3)
        assert len(tables.leaders) == 3

    def test_enumeration_bound(self):
        with pytest.raises(EnumerationBoundError) as info:
            ResidueRing(100, bound=100)
        assert info.value.size == 10000
        assert info.value.bound == 100

    def test_elements_from_different_rings(self):
        with pytest.raises(InvalidModulusError):
            project(1, 2) + project(1, EisensteinInt(1, 2))

    def test_project(self, f4):
        assert project(5, f4) == project(1, f4)
        assert (project(3, f4) * project(3, f4)).representative == project(1, f4).representative


class TestQAdic:
    def test_round_trip(self):
        m = Modulus(2, 2)
        ring = m.ring()
        for x in ring.leaders:
            digits = q_adic_decompose(x, m)
            assert len(digits) == 2
            assert all(0 <= d < 4 for d in digits)
            assert q_adic_recompose(digits, m) == x

    def test_digits_are_distinct_per_residue(self):
        m = Modulus(EisensteinInt(1, 2), 2)
        seen = {q_adic_decompose(x, m) for x in m.ring().leaders}
        assert len(seen) == 9


class TestCrt:
    def test_layer_order(self, crt):
        assert crt.layers == (Modulus(EisensteinInt(1, 2)), Modulus(2))
        assert crt.num_layers == 2

    def test_bijection(self, crt):
        symbols = np.arange(crt.ring.order)
        assert np.array_equal(crt.inverse(crt.forward(symbols)), symbols)
        assert crt.components.shape == (12, 2)

    def test_homomorphism(self, crt, rng):
        for x, y in rng.integers(0, 12, size=(40, 2)):
            fx, fy = crt.forward(x), crt.forward(y)
            add = [r.add(i, j) for r, i, j in zip(crt.layer_rings, fx, fy)]
            mul = [r.mul(i, j) for r, i, j in zip(crt.layer_rings, fx, fy)]
            assert list(crt.forward(crt.ring.add(x, y))) == add
            assert list(crt.forward(crt.ring.mul(x, y))) == mul

    def test_idempotents(self, crt):
        for i, e in enumerate(crt.idempotents):
            for j, ring in enumerate(crt.layer_rings):
                assert ring.reduce(e) == (ring.one if i == j else 0)
        bezout = sum((s * a for s, a in zip(crt.bezout, crt.cofactors)), start=EisensteinInt(0))
        assert bezout == ONE

    def test_idempotent_inverse_matches_table(self, crt):
        for r in range(crt.ring.order):
            assert crt.ring.reduce(crt.inverse_by_idempotents(crt.forward(r))) == r

    def test_element_level_maps(self, crt):
        x = EisensteinInt(5, -7)
        parts = crt_forward(x, crt)
        assert crt_inverse(parts, crt) == crt.ring.element(x)

    def test_wrong_part_count(self, crt):
        with pytest.raises(InvalidModulusError):
            crt.inverse(np.array([0]))

    def test_rejects_units(self):
        with pytest.raises(InvalidModulusError):
            CrtSystem(1)

    def test_rejects_mismatched_layers(self):
        with pytest.raises(InvalidModulusError):
            CrtSystem(EisensteinInt(2, 4), layers=[Modulus(2)])

    def test_rejects_non_coprime_layers(self):
        with pytest.raises(InvalidModulusError):
            CrtSystem(4, layers=[Modulus(2), Modulus(2)])

    def test_single_layer(self):
        system = CrtSystem(2)
        assert system.num_layers == 1
        assert np.array_equal(system.components[:, 0], np.arange(4))
