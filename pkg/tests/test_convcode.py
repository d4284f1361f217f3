"""
Tests for the trellis decoders of the non-binary convolutional codes.

Viterbi and forward-backward results are checked against exhaustive search over every codeword.
"""

import numpy as np
import pytest

from latticenc.codes import LinearCode
from latticenc.convcode import ConvCodeSpec, ConvolutionalCode
from latticenc.exceptions import DecoderError, InvalidModulusError, NotACodewordError
from latticenc.residue import Modulus


@pytest.fixture(
    params=[("table", "1+2w", 4), ("table", "2", 3), ("rate_three_quarters", "2", 2)],
    ids=["f3-table", "f4-table", "f4-rate-3/4"],
)
def code(request, f3, f4):
    kind, field, steps = request.param
    modulus = f3 if field == "1+2w" else f4
    return ConvolutionalCode(getattr(ConvCodeSpec, kind)(modulus), steps)


class TestShapes:
    @pytest.mark.parametrize(
        "kind,field,steps,n,k",
        [("table", "1+2w", 4, 14, 4), ("table", "2", 3, 12, 3), ("rate_three_quarters", "2", 2, 12, 6)],
    )
    def test_frame_sizes(self, f3, f4, kind, field, steps, n, k):
        modulus = f3 if field == "1+2w" else f4
        c = ConvolutionalCode(getattr(ConvCodeSpec, kind)(modulus), steps)
        assert (c.n, c.k) == (n, k)

    def test_states(self, f3):
        spec = ConvCodeSpec.table(f3)
        assert spec.memory == 3
        assert spec.num_states == 27
        assert spec.num_branches == 3

    def test_chain_ring_rejected(self):
        with pytest.raises(InvalidModulusError):
            ConvCodeSpec.single_input(Modulus(2, 2), [[1, 1]])

    def test_rate_three_quarters_needs_four_symbols(self, f3):
        with pytest.raises(InvalidModulusError):
            ConvCodeSpec.rate_three_quarters(f3)

    def test_unknown_table(self):
        with pytest.raises(KeyError):
            ConvCodeSpec.table(Modulus(5))

    def test_ragged_taps(self, f3):
        with pytest.raises(ValueError):
            ConvCodeSpec.single_input(f3, [[1, 1], [1]])


class TestEncoding:
    def test_linear(self, code, rng):
        ring = code.ring
        for _ in range(10):
            x = rng.integers(0, code.spec.q, size=code.k)
            y = rng.integers(0, code.spec.q, size=code.k)
            assert np.array_equal(ring.add(code.encode(x), code.encode(y)), code.encode(ring.add(x, y)))

    def test_zero_tail(self, code):
        message = np.full(code.k, code.ring.one)
        word = code.encode(message).reshape(code.steps, code.spec.outputs)
        assert word.shape[0] == code.info_steps + code.spec.memory

    def test_unencode(self, code, rng):
        message = rng.integers(0, code.spec.q, size=code.k)
        word = code.encode(message)
        assert np.array_equal(code.unencode(word), message)
        assert code.contains(word)

    def test_unencode_rejects(self, code):
        word = code.encode(np.zeros(code.k, dtype=np.int64))
        word[-1] = 1
        with pytest.raises(NotACodewordError):
            code.unencode(word)


class TestViterbi:
    def test_matches_exhaustive_search(self, code, rng):
        for _ in range(5):
            costs = rng.random((code.n, code.spec.q))
            fast = code.decode_costs(costs)
            slow = LinearCode.decode_costs(code, costs)
            assert np.array_equal(fast.codeword, slow.codeword)
            assert np.array_equal(fast.message, slow.message)
            assert fast.metric == pytest.approx(slow.metric)

    def test_callable_metrics(self, code, rng):
        costs = rng.random((code.n, code.spec.q))
        metrics = code.symbol_costs_to_branch_metrics(costs)
        assert np.array_equal(code.viterbi(lambda t: metrics[t]).codeword, code.decode_costs(costs).codeword)

    def test_rejects_negative_metrics(self, code):
        with pytest.raises(DecoderError):
            code.decode_costs(-np.ones((code.n, code.spec.q)))


class TestForwardBackward:
    def test_matches_exhaustive_map(self, code, rng):
        for _ in range(3):
            priors = rng.dirichlet(np.ones(code.spec.q), size=code.n)
            fast = code.map_decode(priors)
            slow = LinearCode.map_decode(code, priors)
            assert np.allclose(fast.input_posteriors, slow.input_posteriors, atol=1e-9)
            assert np.allclose(fast.extrinsic, slow.extrinsic, atol=1e-9)
            assert np.allclose(fast.output_posteriors, slow.output_posteriors, atol=1e-9)

    def test_posteriors_are_distributions(self, code, rng):
        priors = rng.dirichlet(np.ones(code.spec.q), size=code.n)
        result = code.map_decode(priors)
        assert np.allclose(result.input_posteriors.sum(axis=1), 1.0)
        assert np.allclose(result.extrinsic.sum(axis=1), 1.0)

    def test_rejects_bad_priors(self, code):
        with pytest.raises(DecoderError):
            code.map_decode(np.zeros((code.n, code.spec.q)))
