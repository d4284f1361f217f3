"""
Tests for shaping, the MAC channel, coefficient selection and the layered decoders.
"""

import itertools
import math
from unittest.mock import MagicMock

import numpy as np
import pytest

from latticenc.eisenstein import EisensteinInt, quantize_array
from latticenc.exceptions import InvalidModulusError, LatticeError
from latticenc.mlnc import (
    LLR_FLOOR,
    CoefficientPlan,
    LayeredDecoder,
    SoftDetector,
    TupleModel,
    average_power,
    candidate_coefficients,
    choose_alpha,
    choose_coefficients,
    effective_noise_variance,
    expected_combinations,
    fold,
    from_lvector,
    lif_decode,
    lsd_posterior,
    mac_output,
    mmse_variance,
    noise_for_snr,
    rate_objective,
    sample_dither,
    to_lvector,
    transmit,
)
from latticenc.models import ChannelConfig, DecoderMode

NOISELESS = ChannelConfig(noise_variance=1e-12)
UNIT_GAINS = np.ones(2, dtype=np.complex128)


@pytest.fixture
def plan(desk_spec):
    return choose_coefficients(UNIT_GAINS, desk_spec, average_power(desk_spec.varpi), NOISELESS.noise_variance)


def random_messages(spec, rng):
    return [rng.integers(0, np.asarray(layer.code.message_orders)) for layer in spec.layers]


def noiseless_frame(spec, plan, rng, dithered):
    states = [
        transmit(spec, random_messages(spec, rng), dither=None if dithered else np.zeros(spec.n), rng=rng)
        for _ in range(2)
    ]
    y = mac_output(states, NOISELESS, rng, UNIT_GAINS)
    dithers = np.stack([s.dither for s in states])
    return y, dithers, expected_combinations(spec, plan, states)


class TestShaping:
    def test_fold_lands_in_the_cell(self, rng):
        scale = EisensteinInt(2, 4)
        z = 20 * (rng.random(500) - 0.5) + 20j * (rng.random(500) - 0.5)
        folded = fold(z, scale)
        a, b = quantize_array(folded / scale.to_complex())
        assert not np.any(a) and not np.any(b)
        qa, qb = quantize_array((z - folded) / scale.to_complex())
        shift = (z - folded) / scale.to_complex()
        assert np.allclose(shift, qa + qb * complex(-0.5, math.sqrt(3) / 2))

    def test_dither_is_uniform_over_the_cell(self, rng):
        varpi = EisensteinInt(2, 4)
        d = sample_dither(20000, varpi, rng)
        a, b = quantize_array(d / varpi.to_complex())
        assert not np.any(a) and not np.any(b)
        assert abs(d.mean()) < 0.05
        assert np.mean(np.abs(d) ** 2) == pytest.approx(average_power(varpi), rel=0.03)

    @pytest.mark.parametrize("varpi,expected", [(EisensteinInt(2, 4), 5.0 / 3.0), (EisensteinInt(1), 5.0 / 36.0)])
    def test_average_power(self, varpi, expected):
        assert average_power(varpi) == pytest.approx(expected, rel=1e-6)

    def test_average_power_of_zero(self):
        with pytest.raises(InvalidModulusError):
            average_power(EisensteinInt(0))

    def test_noise_for_snr(self):
        varpi = EisensteinInt(2, 4)
        assert noise_for_snr(varpi, 10.0) == pytest.approx(1.0 / 6.0)
        assert noise_for_snr(varpi, 7.0, offset_db=3.0) == pytest.approx(1.0 / 6.0)


class TestTransmit:
    def test_coarse_component(self, desk_spec, rng):
        state = transmit(desk_spec, random_messages(desk_spec, rng), rng=rng)
        s = desk_spec.varpi.to_complex()
        a, b = quantize_array(state.coarse / s)
        assert np.allclose(state.coarse, s * (a + b * complex(-0.5, math.sqrt(3) / 2)))
        assert np.all(np.abs(state.x) <= abs(s) / math.sqrt(3) + 1e-9)

    def test_undithered_point(self, desk_spec, rng):
        messages = random_messages(desk_spec, rng)
        state = transmit(desk_spec, messages, dither=np.zeros(2))
        assert np.allclose(np.abs(state.x), np.abs(state.lattice_point))
        assert np.array_equal(state.residues, desk_spec.encode_residues(messages))

    def test_needs_a_dither_source(self, desk_spec, rng):
        with pytest.raises(ValueError):
            transmit(desk_spec, random_messages(desk_spec, rng))

    def test_dither_shape(self, desk_spec, rng):
        with pytest.raises(ValueError):
            transmit(desk_spec, random_messages(desk_spec, rng), dither=np.zeros(3))

    def test_message_range(self, desk_spec):
        with pytest.raises(ValueError):
            transmit(desk_spec, [np.array([3]), np.array([0])], dither=np.zeros(2))


class TestMacOutput:
    def test_superposition(self, desk_spec, rng):
        states = [transmit(desk_spec, random_messages(desk_spec, rng), rng=rng) for _ in range(2)]
        gains = np.array([1.0 + 0.5j, -0.3j])
        y = mac_output(states, NOISELESS, rng, gains)
        assert np.allclose(y, gains[0] * states[0].x + gains[1] * states[1].x, atol=1e-5)

    def test_noise_variance(self, desk_spec, rng):
        state = transmit(desk_spec, random_messages(desk_spec, rng), dither=np.zeros(2))
        channel = ChannelConfig(noise_variance=0.5, num_sources=1)
        samples = np.concatenate([mac_output([state], channel, rng) - state.x for _ in range(5000)])
        assert np.mean(np.abs(samples) ** 2) == pytest.approx(0.5, rel=0.05)

    def test_needs_noise(self, desk_spec, rng):
        state = transmit(desk_spec, random_messages(desk_spec, rng), rng=rng)
        with pytest.raises(ValueError):
            mac_output([state, state], ChannelConfig(), rng)

    def test_source_count(self, desk_spec, rng):
        state = transmit(desk_spec, random_messages(desk_spec, rng), rng=rng)
        with pytest.raises(ValueError):
            mac_output([state], NOISELESS, rng)


class TestCoefficients:
    def test_mmse_alpha(self):
        a = [EisensteinInt(1), EisensteinInt(1)]
        alpha = choose_alpha(UNIT_GAINS, a, 2.0, 0.5)
        assert alpha == pytest.approx(4.0 / 4.5)
        expected = 0.5 * abs(alpha) ** 2 + 2.0 * 2 * abs(alpha - 1) ** 2
        assert effective_noise_variance(alpha, UNIT_GAINS, a, 2.0, 0.5) == pytest.approx(expected)

    def test_mmse_variance_is_the_minimum(self, rng):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        a = [EisensteinInt(1), EisensteinInt(-1, 1)]
        alpha = choose_alpha(h, a, 4.0, 1.0)
        assert mmse_variance(h, a, 4.0) == pytest.approx(effective_noise_variance(alpha, h, a, 4.0, 1.0))
        assert effective_noise_variance(alpha * 1.1, h, a, 4.0, 1.0) > mmse_variance(h, a, 4.0)

    def test_rate_objective(self):
        snr = 10.0
        assert rate_objective(UNIT_GAINS, [1, 1], snr) == pytest.approx(-math.log2(2.0 / (1 + 2 * snr)))

    def test_candidates(self):
        candidates = candidate_coefficients(2, 1)
        assert len(candidates) == 8
        assert candidates[0] == (EisensteinInt(0), EisensteinInt(1))
        for vector in candidates:
            lead = next(c for c in vector if not c.is_zero())
            assert lead == lead.canonical()
        lengths = [sum(c.norm() for c in v) for v in candidates]
        assert lengths == sorted(lengths)

    def test_rate_choice_for_unit_gains(self, desk_spec):
        plan = choose_coefficients(UNIT_GAINS, desk_spec, 5.0 / 3.0, 0.01)
        assert plan.method == "rate"
        for layer in plan.layers:
            assert layer.integer == (EisensteinInt(1), EisensteinInt(1))
            assert np.all(layer.reduced != 0)

    @pytest.mark.parametrize("theta", [0.7, -2.1, math.pi])
    def test_common_phase_does_not_change_the_choice(self, desk_spec, rng, theta):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        plan = choose_coefficients(h, desk_spec, 5.0 / 3.0, 0.05)
        rotated = choose_coefficients(h * np.exp(1j * theta), desk_spec, 5.0 / 3.0, 0.05)
        assert [layer.integer for layer in rotated.layers] == [layer.integer for layer in plan.layers]
        for layer, turned in zip(plan.layers, rotated.layers):
            np.testing.assert_array_equal(turned.reduced, layer.reduced)
            assert turned.objective == pytest.approx(layer.objective)

    def test_mi_choice(self, desk_spec):
        plan = choose_coefficients(UNIT_GAINS, desk_spec, 5.0 / 3.0, 0.05, method="mi")
        assert plan.method == "mi"
        assert len(plan) == 2
        for i, layer in enumerate(plan.layers):
            ring = desk_spec.layers[i].modulus.ring()
            assert next(r for r in layer.reduced if r != 0) == ring.one

    def test_from_integers(self, desk_spec):
        plan = CoefficientPlan.from_integers(desk_spec, [[1, 1], [1, EisensteinInt(0, 1)]], UNIT_GAINS, 1.0, 0.1)
        assert plan[1].integer == (EisensteinInt(1), EisensteinInt(0, 1))
        with pytest.raises(LatticeError):
            CoefficientPlan.from_integers(desk_spec, [[2, 0], [2, 0]], UNIT_GAINS, 1.0, 0.1)
        with pytest.raises(ValueError):
            CoefficientPlan.from_integers(desk_spec, [[1, 1]], UNIT_GAINS, 1.0, 0.1)

    @pytest.mark.parametrize(
        "kwargs", [{"h": [1.0, np.inf]}, {"noise_variance": 0.0}, {"method": "greedy"}]
    )
    def test_rejects(self, desk_spec, kwargs):
        args = {"h": UNIT_GAINS, "spec": desk_spec, "power": 1.0, "noise_variance": 0.1} | kwargs
        with pytest.raises(ValueError):
            choose_coefficients(**args)


class TestLValues:
    def test_conversion(self, rng):
        p = rng.dirichlet(np.ones(4), size=3)
        values = to_lvector(p)
        assert np.all(values[:, 0] == 0.0)
        assert np.allclose(from_lvector(values), p)

    def test_tuple_model(self, desk_spec):
        model = TupleModel(desk_spec, 2, [np.array([1, 1]), np.array([1, 1])])
        assert model.size == 144
        assert np.allclose(model.class_log_prior(0), np.log(1 / 3))
        assert np.allclose(model.class_log_prior(1), np.log(1 / 4))

    def test_tuple_model_needs_every_layer(self, desk_spec):
        with pytest.raises(ValueError):
            TupleModel(desk_spec, 2, [np.array([1, 1])])

    def test_detector_extrinsic(self, desk_spec, plan, rng):
        y, dithers, _ = noiseless_frame(desk_spec, plan, rng, dithered=True)
        detector = SoftDetector(desk_spec, plan, UNIT_GAINS, 0.3, dithers)
        posterior, extrinsic = lsd_posterior(y, 0, {}, detector)
        assert extrinsic.shape == (2, 3)
        assert np.all(extrinsic[:, 0] == 0.0)
        assert np.all(extrinsic >= LLR_FLOOR)
        assert np.allclose(posterior, extrinsic)

    def test_detector_validation(self, desk_spec, plan):
        with pytest.raises(ValueError):
            SoftDetector(desk_spec, plan, UNIT_GAINS, 0.0, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            SoftDetector(desk_spec, plan, UNIT_GAINS, 0.1, np.zeros((2, 3)))


class TestNoiselessDecoding:
    @pytest.mark.parametrize("dithered", [False, True])
    def test_lif(self, desk_spec, plan, rng, dithered):
        for _ in range(20):
            y, dithers, targets = noiseless_frame(desk_spec, plan, rng, dithered)
            for i in range(desk_spec.num_layers):
                result = lif_decode(y, plan, dithers, desk_spec, i)
                assert np.array_equal(result.message, targets[i])
                assert result.metric == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("mode,iterations", [("lif", 1), ("non-msd", 1), ("msd", 1), ("imsd", 3)])
    @pytest.mark.parametrize("dithered", [False, True])
    def test_every_mode(self, desk_spec, plan, rng, mode, iterations, dithered):
        for _ in range(10):
            y, dithers, targets = noiseless_frame(desk_spec, plan, rng, dithered)
            decoder = LayeredDecoder(desk_spec, plan, UNIT_GAINS, NOISELESS.noise_variance, dithers)
            for decision, target, layer in zip(decoder.decode(y, mode, iterations), targets, desk_spec.layers):
                assert np.array_equal(decision.message, target)
                assert np.array_equal(decision.codeword, layer.code.encode(target))

    @pytest.mark.parametrize("mode,iterations", [(DecoderMode.LIF, 1), (DecoderMode.MSD, 1), (DecoderMode.IMSD, 3)])
    @pytest.mark.parametrize("dithered", [False, True])
    def test_exhaustive_pairs(self, desk_spec, plan, mode, iterations, dithered):
        rng = np.random.default_rng(17)
        grid = [[a, b] for a, b in itertools.product(*(layer.code.all_messages() for layer in desk_spec.layers))]
        for first, second in itertools.product(grid, repeat=2):
            states = [
                transmit(desk_spec, m, dither=None if dithered else np.zeros(desk_spec.n), rng=rng)
                for m in (first, second)
            ]
            y = mac_output(states, NOISELESS, rng, UNIT_GAINS)
            targets = expected_combinations(desk_spec, plan, states)
            dithers = np.stack([s.dither for s in states])
            decoder = LayeredDecoder(desk_spec, plan, UNIT_GAINS, NOISELESS.noise_variance, dithers)
            for decision, target in zip(decoder.decode(y, mode, iterations), targets):
                assert np.array_equal(decision.message, target), (first, second)


class TestLayeredDecoder:
    def test_trace_stages(self, desk_spec, plan, rng):
        y, dithers, _ = noiseless_frame(desk_spec, plan, rng, dithered=True)
        trace = MagicMock()
        decoder = LayeredDecoder(desk_spec, plan, UNIT_GAINS, 0.1, dithers, trace=trace)
        decoder.decode(y, "imsd", iterations=2)
        stages = [c.kwargs["stage"] for c in trace.call_args_list]
        assert stages == ["lsd"] * 4
        assert [c.kwargs["iteration"] for c in trace.call_args_list] == [1, 1, 2, 2]

        trace.reset_mock()
        decoder.decode(y, "lif")
        assert [c.kwargs["layer"] for c in trace.call_args_list] == [0, 1]

    def test_schedule(self, desk_spec, plan, rng):
        y, dithers, targets = noiseless_frame(desk_spec, plan, rng, dithered=False)
        decoder = LayeredDecoder(desk_spec, plan, UNIT_GAINS, NOISELESS.noise_variance, dithers)
        decisions = decoder.decode(y, "msd", schedule=[1, 0])
        assert all(np.array_equal(d.message, t) for d, t in zip(decisions, targets))
        with pytest.raises(ValueError):
            decoder.decode(y, "msd", schedule=[0, 0])

    def test_invalid_arguments(self, desk_spec, plan, rng):
        y, dithers, _ = noiseless_frame(desk_spec, plan, rng, dithered=False)
        decoder = LayeredDecoder(desk_spec, plan, UNIT_GAINS, NOISELESS.noise_variance, dithers)
        with pytest.raises(ValueError):
            decoder.decode(y, "imsd", iterations=0)
        with pytest.raises(ValueError):
            decoder.decode(y, "viterbi")
        with pytest.raises(ValueError):
            decoder.decode(np.zeros(3), "msd")
