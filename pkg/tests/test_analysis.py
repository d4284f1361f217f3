"""
Tests for computation rates, the union bound, mutual information and EXIT characteristics.
"""

import math

import numpy as np
import pytest

from latticenc.analysis import (
    apriori_information,
    apriori_sigma,
    computation_rate,
    exit_curve,
    gaussian_apriori,
    genie_apriori,
    mutual_information,
    union_bound,
)
from latticenc.eisenstein import EisensteinInt
from latticenc.mlnc import LLR_FLOOR, choose_coefficients, noise_for_snr
from latticenc.models import ChannelConfig, Fading

UNIT_GAINS = np.ones(2, dtype=np.complex128)


class TestComputationRate:
    def test_unit_gains(self):
        report = computation_rate(UNIT_GAINS, [[1, 1], [1, 1]], 2.0, 0.1)
        snr = 20.0
        expected = -math.log2(2.0 / (1.0 + 2.0 * snr))
        assert report.layer_rates == pytest.approx([expected, expected])
        assert report.total == pytest.approx(2 * expected)
        assert report.coefficients == [["1", "1"], ["1", "1"]]
        assert report.clamped == [False, False]
        assert report.ring_mismatch

    def test_clamped_at_zero(self):
        report = computation_rate(UNIT_GAINS, [[2, 0]], 0.1, 1.0)
        assert report.layer_rates == [0.0]
        assert report.clamped == [True]

    def test_per_layer_powers(self):
        report = computation_rate(UNIT_GAINS, [[1, 1], [1, 1]], [1.0, 4.0], 1.0)
        assert report.layer_rates[1] > report.layer_rates[0]

    def test_eisenstein_coefficients(self):
        h = np.array([1.0, complex(-0.5, math.sqrt(3) / 2)])
        aligned = computation_rate(h, [[1, EisensteinInt(0, 1)]], 10.0, 1.0)
        misaligned = computation_rate(h, [[1, 1]], 10.0, 1.0)
        assert aligned.layer_rates[0] > misaligned.layer_rates[0]

    @pytest.mark.parametrize("theta", [0.4, -1.9, math.pi])
    def test_common_phase_leaves_rates_unchanged(self, rng, theta):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        coefficients = [[1, EisensteinInt(0, 1)], [1, 1]]
        report = computation_rate(h, coefficients, 5.0 / 3.0, 0.1)
        rotated = computation_rate(h * np.exp(1j * theta), coefficients, 5.0 / 3.0, 0.1)
        assert rotated.layer_rates == pytest.approx(report.layer_rates, abs=1e-12)
        assert rotated.clamped == report.clamped

    @pytest.mark.parametrize(
        "coefficients,power,noise",
        [([[1, 1]], 1.0, 0.0), ([[1, 1, 1]], 1.0, 1.0), ([[0, 0]], 1.0, 1.0), ([[1, 1]], [1.0, 2.0], 1.0)],
    )
    def test_rejects(self, coefficients, power, noise):
        with pytest.raises(ValueError):
            computation_rate(UNIT_GAINS, coefficients, power, noise)


class TestUnionBound:
    def test_explicit_figures(self, desk_spec):
        plan = choose_coefficients(UNIT_GAINS, desk_spec, 5.0 / 3.0, 0.1)
        bound = union_bound(UNIT_GAINS, plan, desk_spec, 0.1, 5.0 / 3.0, figures=[(2.0, 6.0), (2.0, 6.0)])
        assert bound.weights == pytest.approx((0.5, 0.5))
        assert bound.layer_bounds[0] == pytest.approx(bound.layer_bounds[1])
        assert bound.expectation == pytest.approx(bound.layer_bounds[0])

    def test_decreases_with_snr(self, desk_spec):
        values = []
        for noise in (0.5, 0.1, 0.02):
            plan = choose_coefficients(UNIT_GAINS, desk_spec, 5.0 / 3.0, noise)
            values.append(union_bound(UNIT_GAINS, plan, desk_spec, noise, 5.0 / 3.0).expectation)
        assert values[0] > values[1] > values[2]


class TestMutualInformation:
    def test_chain_rule_with_common_random_numbers(self, desk_spec):
        channel = ChannelConfig(noise_variance=noise_for_snr(desk_spec.varpi, 8.0))
        kwargs = dict(seed=5, batches=6)
        joint = mutual_information(desk_spec, [0, 1], [], channel, 1200, **kwargs)
        first = mutual_information(desk_spec, 0, [], channel, 1200, **kwargs)
        second = mutual_information(desk_spec, 1, [0], channel, 1200, **kwargs)
        assert joint.value == pytest.approx(first.value + second.value, abs=1e-9)
        assert joint.samples == 1200
        assert second.conditioning == [0]

    def test_reproducible(self, desk_spec):
        channel = ChannelConfig(noise_variance=0.2)
        a = mutual_information(desk_spec, 1, [], channel, 600, seed=3, batches=3)
        b = mutual_information(desk_spec, 1, [], channel, 600, seed=3, batches=3)
        assert a == b

    def test_saturates_at_high_snr(self, desk_spec):
        channel = ChannelConfig(noise_variance=1e-6)
        estimate = mutual_information(desk_spec, 0, [], channel, 500, batches=5)
        assert estimate.value == pytest.approx(math.log2(3), abs=1e-6)

    def test_bounded(self, desk_spec):
        channel = ChannelConfig(noise_variance=5.0)
        estimate = mutual_information(desk_spec, [0, 1], [], channel, 900, batches=3)
        assert 0.0 <= estimate.value <= math.log2(12)
        assert estimate.std_error >= 0.0

    def test_rayleigh(self, desk_spec):
        channel = ChannelConfig(fading=Fading.RAYLEIGH, noise_variance=0.1)
        estimate = mutual_information(desk_spec, 1, [], channel, 900, batches=3, snr_db=12.0)
        assert 0.0 < estimate.value <= 2.0
        assert estimate.snr_db == 12.0

    def test_rejects(self, desk_spec):
        channel = ChannelConfig(noise_variance=0.1)
        with pytest.raises(ValueError):
            mutual_information(desk_spec, 0, [0], channel, 100)
        with pytest.raises(ValueError):
            mutual_information(desk_spec, 0, [], channel, 0)
        with pytest.raises(ValueError):
            mutual_information(desk_spec, 0, [], ChannelConfig(), 100)
        with pytest.raises(IndexError):
            mutual_information(desk_spec, 2, [], channel, 100)


class TestApriori:
    def test_gaussian_lvalues(self, rng):
        truth = rng.integers(4, size=1000)
        values = gaussian_apriori(truth, 4, 3.0, rng)
        assert np.all(values[:, 0] == 0.0)
        assert np.mean(np.argmax(values, axis=1) == truth) > 0.8

    def test_genie(self):
        values = genie_apriori(np.array([0, 2]), 3)
        assert values[0].tolist() == [0.0, LLR_FLOOR, LLR_FLOOR]
        assert values[1].tolist() == [0.0, 0.0, -LLR_FLOOR]

    def test_information_is_monotone(self):
        values = [apriori_information(4, sigma) for sigma in (0.0, 0.5, 1.5, 4.0)]
        assert values[0] == 0.0
        assert values == sorted(values)
        assert values[-1] <= 2.0

    @pytest.mark.parametrize("target", [0.25, 1.0, 1.8])
    def test_sigma_inverts_information(self, target):
        sigma = apriori_sigma(4, target)
        assert apriori_information(4, sigma) == pytest.approx(target, abs=1e-3)

    def test_sigma_range(self):
        assert apriori_sigma(3, 0.0) == 0.0
        with pytest.raises(ValueError):
            apriori_sigma(3, 2.0)


class TestExitCurve:
    def test_shape(self, desk_spec):
        points = exit_curve(desk_spec, 0, 10.0, [0.0, 1.0, 2.0], samples=1200, batches=4)
        assert [p.i_a for p in points] == [0.0, 1.0, 2.0]
        assert points[-1].i_a_normalized == 1.0
        for p in points:
            assert p.layer == 0 and p.snr_db == 10.0
            assert 0.0 <= p.i_e <= math.log2(3)
            assert p.i_e_normalized == pytest.approx(p.i_e / math.log2(3))
        assert points[-1].i_e >= points[0].i_e - 0.02

    def test_monotone_and_anchored_at_zero(self, desk_spec):
        points = exit_curve(desk_spec, 0, 6.0, np.linspace(0.0, 2.0, 5), samples=2000, batches=8)
        for lower, upper in zip(points, points[1:]):
            slack = 2.0 * math.hypot(lower.std_error, upper.std_error) + 1e-3
            assert upper.i_e >= lower.i_e - slack
        channel = ChannelConfig(noise_variance=noise_for_snr(desk_spec.varpi, 6.0))
        estimate = mutual_information(desk_spec, 0, [], channel, 2000, batches=8)
        tolerance = max(3.0 * math.hypot(points[0].std_error, estimate.std_error), 0.01)
        assert points[0].i_e == pytest.approx(estimate.value, abs=tolerance)

    def test_default_grid(self, desk_spec):
        points = exit_curve(desk_spec, 1, 6.0, samples=210, batches=3)
        assert len(points) == 21
        assert points[-1].i_a == pytest.approx(math.log2(3))

    def test_grid_range(self, desk_spec):
        with pytest.raises(ValueError):
            exit_curve(desk_spec, 0, 10.0, [2.5], samples=100)

    def test_layer_range(self, desk_spec):
        with pytest.raises(IndexError):
            exit_curve(desk_spec, 3, 10.0, [0.0], samples=100)
