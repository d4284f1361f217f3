"""
Tests for EDC lattice generators, message maps and figures of merit.

The expected figures for the 2+4w desk lattice with repetition codes of length 2 were derived by hand:
layer 0 (F3, cofactor 2) has d^2 = 8 and 18 neighbours, layer 1 (F4, cofactor 1+2w) has d^2 = 6 and
12 neighbours, and the full lattice has d^2 = 2 with the six unit vectors (u, u) as neighbours.
"""

import math

import numpy as np
import pytest

from latticenc.codes import BlockCode
from latticenc.edc_lattice import (
    THETA,
    GeneratorSet,
    LatticeSpec,
    Scope,
    brute_force_figures,
    build_coarse_generator,
    build_fine_generator,
    build_lif_generator,
    build_primary_generator,
    coarse_quantize,
    coding_gain,
    kissing_number,
    min_euclidean_weight,
    phi,
    phi_tilde,
    shortest_vectors,
    varphi,
)
from latticenc.eisenstein import EisensteinInt, to_complex
from latticenc.exceptions import InvalidModulusError, NotInLatticeError
from latticenc.residue import Modulus
from latticenc.selftest import desk_spec


def all_messages(spec):
    grids = [layer.code.all_messages() for layer in spec.layers]
    return [[a, b] for a in grids[0] for b in grids[1]]


class TestGeneratorSet:
    def test_membership(self):
        lattice = GeneratorSet([[2, 0], [0, 2]])
        assert lattice.contains([2, 4])
        assert lattice.contains([EisensteinInt(2, 2), 0])
        assert not lattice.contains([1, 0])
        with pytest.raises(ValueError):
            lattice.contains([2])

    def test_equality_ignores_the_basis(self):
        assert GeneratorSet([[1, 1], [0, 2]]) == GeneratorSet([[1, 1], [1, -1]])
        assert GeneratorSet([[1, 1], [0, 2]]) != GeneratorSet([[1, 0], [0, 2]])

    def test_hermite_pivots_are_canonical(self):
        hnf = GeneratorSet([[EisensteinInt(-1, -2), 0], [0, EisensteinInt(0, 2)]]).hermite()
        assert hnf.canonical
        assert [p for _, p in GeneratorSet(hnf.rows).pivots()] == [EisensteinInt(2, 1), EisensteinInt(2)]

    def test_rank_drops_dependent_rows(self):
        lattice = GeneratorSet([[1, 2], [2, 4], [EisensteinInt(0, 1), EisensteinInt(0, 2)]])
        assert lattice.rank == 1

    def test_volume(self):
        assert GeneratorSet.scaled_identity(2, 3).volume() == pytest.approx(THETA**3 * 64)
        with pytest.raises(ValueError):
            GeneratorSet([[1, 0]]).volume()

    def test_separable_scale(self):
        assert GeneratorSet.scaled_identity(EisensteinInt(2, 4), 2).separable_scale() == EisensteinInt(4, 2)
        assert GeneratorSet([[1, 1], [0, 2]]).separable_scale() is None

    def test_needs_a_dimension(self):
        with pytest.raises(ValueError):
            GeneratorSet([])
        with pytest.raises(ValueError):
            GeneratorSet([[1, 0], [1]])


class TestLatticeSpec:
    def test_layers(self, desk_spec):
        assert desk_spec.n == 2
        assert [layer.modulus for layer in desk_spec.layers] == [Modulus(EisensteinInt(1, 2)), Modulus(2)]
        assert [layer.cofactor for layer in desk_spec.layers] == [EisensteinInt(2), EisensteinInt(1, 2)]
        assert desk_spec.quotient_order == 12
        assert desk_spec.message_rate() == pytest.approx((math.log2(3) + 2) / 2)

    def test_code_ring_must_match_layer(self, crt):
        codes = [BlockCode.repetition(m.ring(), 2) for m in reversed(crt.layers)]
        with pytest.raises(InvalidModulusError):
            LatticeSpec(EisensteinInt(2, 4), codes, crt)

    def test_code_count(self, crt):
        with pytest.raises(InvalidModulusError):
            LatticeSpec(EisensteinInt(2, 4), [BlockCode.repetition(crt.layers[0].ring(), 2)], crt)

    def test_code_lengths(self, crt):
        codes = [BlockCode.repetition(crt.layers[0].ring(), 2), BlockCode.repetition(crt.layers[1].ring(), 3)]
        with pytest.raises(ValueError):
            LatticeSpec(EisensteinInt(2, 4), codes, crt)

    def test_check_layer(self, desk_spec):
        with pytest.raises(IndexError):
            desk_spec.check_layer(2)


class TestGenerators:
    def test_full_codes_give_the_integer_lattice(self, full_spec):
        assert build_fine_generator(full_spec) == GeneratorSet.scaled_identity(1, 2)

    def test_coarse_is_varpi_scaled(self, desk_spec):
        coarse = build_coarse_generator(desk_spec)
        assert coarse.separable_scale() == EisensteinInt(2, 4).canonical()

    def test_volume_ratio_is_the_quotient_order(self, desk_spec):
        coarse, fine = build_coarse_generator(desk_spec), build_fine_generator(desk_spec)
        assert coarse.volume() / fine.volume() == pytest.approx(desk_spec.quotient_order)
        for i, layer in enumerate(desk_spec.layers):
            primary = build_primary_generator(desk_spec, i)
            assert coarse.volume() / primary.volume() == pytest.approx(layer.code.size)

    def test_nesting(self, desk_spec):
        coarse, fine = build_coarse_generator(desk_spec), build_fine_generator(desk_spec)
        assert fine.contains_set(coarse)
        for i in range(desk_spec.num_layers):
            assert fine.contains_set(build_primary_generator(desk_spec, i))
            assert fine.contains_set(build_lif_generator(desk_spec, i))
            assert build_lif_generator(desk_spec, i).contains_set(coarse)

    def test_lif_kernel_zeroes_its_layer(self, desk_spec):
        for i in range(desk_spec.num_layers):
            for row in build_lif_generator(desk_spec, i).rows:
                assert not np.any(varphi(row, desk_spec, i))

    def test_membership_agrees_with_codeword_criterion(self, desk_spec):
        fine = build_fine_generator(desk_spec)
        for a in range(-3, 4):
            for b in range(-3, 4):
                vector = [EisensteinInt(a, b), EisensteinInt(b, a)]
                assert fine.contains(vector) == desk_spec.contains(vector)


class TestMessageMaps:
    def test_round_trip(self, desk_spec):
        for messages in all_messages(desk_spec):
            point = phi_tilde(messages, desk_spec)
            assert desk_spec.contains(point)
            for recovered, message in zip(phi(point, desk_spec), messages):
                assert np.array_equal(recovered, message)

    def test_embedding_is_minimum_norm(self, desk_spec):
        ring = desk_spec.ring
        for messages in all_messages(desk_spec):
            for x in phi_tilde(messages, desk_spec):
                assert x == ring.leader(ring.reduce(x))

    def test_coarse_translation_is_invisible(self, desk_spec):
        varpi = desk_spec.varpi
        messages = all_messages(desk_spec)[7]
        point = phi_tilde(messages, desk_spec)
        shifted = (point[0] + varpi * EisensteinInt(1, -2), point[1] - varpi)
        for recovered, message in zip(phi(shifted, desk_spec), messages):
            assert np.array_equal(recovered, message)

    def test_layer_map(self, desk_spec):
        for messages in all_messages(desk_spec):
            point = phi_tilde(messages, desk_spec)
            for i in range(desk_spec.num_layers):
                assert np.array_equal(varphi(point, desk_spec, i), messages[i])

    def test_outside_the_lattice(self, desk_spec):
        with pytest.raises(NotInLatticeError):
            phi([1, 0], desk_spec)
        with pytest.raises(NotInLatticeError):
            varphi([1, 0], desk_spec, 0)

    def test_coarse_quantize(self, desk_spec, rng):
        coarse = build_coarse_generator(desk_spec)
        target = (desk_spec.varpi * EisensteinInt(2, -1), desk_spec.varpi * EisensteinInt(-1, 0))
        noisy = np.array([to_complex(x) for x in target]) + 0.3 * (rng.random(2) - 0.5)
        assert coarse_quantize(noisy, coarse) == target

    def test_coarse_quantize_needs_a_separable_lattice(self, desk_spec):
        with pytest.raises(ValueError):
            coarse_quantize(np.zeros(2), build_fine_generator(desk_spec))


class TestScope:
    @pytest.mark.parametrize(
        "text,expected", [("full", Scope("full")), ("primary:1", Scope("primary", 1)), ("lif:0", Scope("lif", 0))]
    )
    def test_parse(self, text, expected):
        assert Scope.parse(text) == expected
        assert str(expected) == text

    @pytest.mark.parametrize("text", ["primary", "side:1", "lif:x", ""])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            Scope.parse(text)


class TestFigures:
    def test_min_euclidean_weight(self, f3):
        code = BlockCode.repetition(f3.ring(), 2)
        assert min_euclidean_weight(code, EisensteinInt(2)) == (8.0, 2)

    @pytest.mark.parametrize(
        "scope,d2,kissing,gain",
        [
            ("primary:0", 8.0, 18.0, 4.0 / 3.0),
            ("primary:1", 6.0, 12.0, 1.0 / THETA),
            ("full", 2.0, 6.0, 2.0 / 3.0),
        ],
    )
    def test_closed_forms(self, desk_spec, scope, d2, kissing, gain):
        figure = coding_gain(desk_spec, scope)
        assert figure.exact
        assert figure.d2 == d2
        assert figure.kissing == pytest.approx(kissing)
        assert figure.gain == pytest.approx(gain)
        assert figure.gain_db == pytest.approx(10 * math.log10(gain))

    @pytest.mark.parametrize("layers", [("repetition", "repetition"), ("full", "repetition"), ("repetition", "full")])
    def test_closed_forms_match_the_oracle(self, layers):
        spec = desk_spec(*layers)
        for scope in ("primary:0", "primary:1", "full"):
            closed, oracle = coding_gain(spec, scope), brute_force_figures(spec, scope)
            assert closed.gain == pytest.approx(oracle.gain)
            assert closed.d2 == oracle.d2
            assert closed.kissing == pytest.approx(oracle.kissing)
        closed = coding_gain(spec, "full")
        best, count = shortest_vectors(build_fine_generator(spec), build_coarse_generator(spec), int(closed.d2))
        assert (best, count) == (closed.d2, closed.kissing)

    def test_lif_scope_is_oracle_only(self, desk_spec):
        with pytest.raises(ValueError):
            coding_gain(desk_spec, "lif:0")
        figure = brute_force_figures(desk_spec, "lif:0")
        assert figure.d2 == 2.0
        assert figure.kissing == 6.0

    def test_layer_out_of_range(self, desk_spec):
        with pytest.raises(IndexError):
            brute_force_figures(desk_spec, "primary:4")

    def test_kissing_number(self, desk_spec):
        assert kissing_number(desk_spec, "primary:1") == (pytest.approx(12.0), True)

    def test_chain_ring_bound(self):
        spec = LatticeSpec(3, [BlockCode.repetition(Modulus(EisensteinInt(1, 2), 2).ring(), 2)])
        bound, oracle = coding_gain(spec, "primary:0"), brute_force_figures(spec, "primary:0")
        assert not bound.exact
        assert bound.gain <= oracle.gain + 1e-12
        assert oracle.gain == pytest.approx(2.0 / (3.0 * THETA))

    @pytest.mark.parametrize("scope,layer,radius", [("full", None, 1), ("primary", 0, 4), ("primary", 1, 3)])
    def test_shortest_vector_search_agrees(self, desk_spec, scope, layer, radius):
        lattice = build_fine_generator(desk_spec) if scope == "full" else build_primary_generator(desk_spec, layer)
        best, count = shortest_vectors(lattice, build_coarse_generator(desk_spec), radius)
        figure = brute_force_figures(desk_spec, Scope(scope, layer))
        assert (best, count) == (figure.d2, figure.kissing)
