"""
Non-binary convolutional codes over residue fields S/<p>.

A code with ``k`` inputs and ``c`` outputs per trellis step and memory ``nu`` has q^(k nu) states and
q^k branches per state. Codes are zero-tail terminated by default, so a frame of ``iota`` information
steps is a block code of length c (iota + nu) with k iota message symbols (both stored step-major).

Decoders:

* :meth:`ConvolutionalCode.viterbi` - minimum additive path metric, deterministic tie-break
* :meth:`ConvolutionalCode.map_decode` - log-domain forward-backward returning input-symbol
  posteriors and extrinsic output-symbol probabilities
"""

import logging
from collections.abc import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from latticenc.codes import PRIOR_FLOOR, HardDecision, LinearCode, MapResult, normalize_priors, softmax
from latticenc.eisenstein import EisensteinInt, parse
from latticenc.exceptions import DecoderError, InvalidModulusError, NotACodewordError
from latticenc.residue import Modulus, ResidueRing

logger = logging.getLogger(__name__)


# Generator taps of the two-layer experiments, as written before reduction into the layer field.
# TABLE_TAPS[field][j] lists the coefficients of D^0..D^3 for output j of a rate-1/2 code.
TABLE_TAPS = {
    "1+2w": [["2+2w", "0", "0", "-2-2w"], ["-2-2w", "2+2w", "0", "-2-2w"]],
    "2": [["-2", "0", "1-1w", "-2"], ["-2", "-2", "-2", "2+1w"]],
}


class ConvCodeSpec:
    """Field, shape and taps of a convolutional code.

    ``taps[j][r]`` holds the nu+1 coefficients (powers D^0..D^nu) connecting input r to output j.
    Coefficients may be arbitrary Eisenstein integers; they are reduced into the field.
    """

    def __init__(
        self,
        field: Modulus,
        taps: Sequence[Sequence[Sequence[EisensteinInt | int | str]]],
        *,
        terminated: bool = True,
    ):
        if not field.is_field:
            raise InvalidModulusError(f"convolutional codes need a residue field, got {field}")
        self.field = field
        self.ring: ResidueRing = field.ring()
        self.outputs = len(taps)
        if self.outputs == 0:
            raise ValueError("a convolutional code needs at least one output")
        self.inputs = len(taps[0])
        lengths = {len(poly) for row in taps for poly in row}
        if any(len(row) != self.inputs for row in taps) or len(lengths) != 1:
            raise ValueError("every output needs one tap polynomial per input, all of the same length")
        self.memory = lengths.pop() - 1
        if self.memory < 0:
            raise ValueError("tap polynomials cannot be empty")
        self.terminated = terminated

        g = np.zeros((self.outputs, self.inputs, self.memory + 1), dtype=np.int64)
        for j, row in enumerate(taps):
            for r, poly in enumerate(row):
                for d, coeff in enumerate(poly):
                    value = parse(coeff) if isinstance(coeff, str) else EisensteinInt.coerce(coeff)
                    g[j, r, d] = self.ring.reduce(value)
        self.taps = g

    @classmethod
    def single_input(cls, field: Modulus, taps: Sequence[Sequence[EisensteinInt | int | str]], **kwargs):
        """Rate 1/c code from one tap polynomial per output."""
        return cls(field, [[poly] for poly in taps], **kwargs)

    @classmethod
    def table(cls, field: Modulus, **kwargs) -> "ConvCodeSpec":
        """The memory-3 rate-1/2 code used for ``field`` in the two-layer experiments."""
        key = str(field.prime)
        if key not in TABLE_TAPS:
            raise KeyError(f"no tabulated code for field {field}")
        return cls.single_input(field, TABLE_TAPS[key], **kwargs)

    @classmethod
    def rate_three_quarters(cls, field: Modulus, **kwargs) -> "ConvCodeSpec":
        """Systematic memory-1 code with 3 inputs and one parity output."""
        ring = field.ring()
        if ring.order < 4:
            raise InvalidModulusError("the rate-3/4 parity needs a field with at least 4 elements")
        one, w = EisensteinInt(1), EisensteinInt(0, 1)
        taps = [[[one if r == j else 0, 0] for r in range(3)] for j in range(3)]
        taps.append([[one, one], [one, w], [one, one + w]])
        return cls(field, taps, **kwargs)

    @property
    def q(self) -> int:
        return self.ring.order

    @property
    def num_states(self) -> int:
        return self.q ** (self.inputs * self.memory)

    @property
    def num_branches(self) -> int:
        return self.q**self.inputs

    def __repr__(self):
        return (
            f"ConvCodeSpec(field={self.field}, inputs={self.inputs}, outputs={self.outputs}, "
            f"memory={self.memory}, states={self.num_states})"
        )


class Trellis:
    """Time-invariant trellis of a :class:`ConvCodeSpec`.

    State index: sum over inputs r and delays d=1..nu of x_r(t-d) * q^(r nu + d - 1).
    Branch index: sum_r x_r(t) * q^r. Predecessors of each state are listed in increasing
    (previous state, branch) order.
    """

    def __init__(self, spec: ConvCodeSpec):
        q, k, nu = spec.q, spec.inputs, spec.memory
        ring = spec.ring
        self.num_states = spec.num_states
        self.num_branches = spec.num_branches

        states = np.arange(self.num_states)
        branches = np.arange(self.num_branches)
        # past[s, r, d-1] = x_r(t-d)
        past = np.zeros((self.num_states, k, max(nu, 1)), dtype=np.int64)
        for r in range(k):
            for d in range(nu):
                past[:, r, d] = (states // q ** (r * nu + d)) % q
        self.branch_digits = np.stack([(branches // q**r) % q for r in range(k)], axis=1)

        self.next_state = np.zeros((self.num_states, self.num_branches), dtype=np.int64)
        self.outputs = np.zeros((self.num_states, self.num_branches, spec.outputs), dtype=np.int64)
        for b in branches:
            u = self.branch_digits[b]
            nxt = np.zeros(self.num_states, dtype=np.int64)
            for r in range(k):
                shifted = [np.full(self.num_states, u[r])] + [past[:, r, d] for d in range(nu - 1)]
                for d, digit in enumerate(shifted[:nu]):
                    nxt += digit * q ** (r * nu + d)
            self.next_state[:, b] = nxt
            for j in range(spec.outputs):
                acc = np.zeros(self.num_states, dtype=np.int64)
                for r in range(k):
                    acc = ring.add(acc, ring.mul(spec.taps[j, r, 0], np.full(self.num_states, u[r])))
                    for d in range(1, nu + 1):
                        acc = ring.add(acc, ring.mul(spec.taps[j, r, d], past[:, r, d - 1]))
                self.outputs[:, b, j] = acc

        # flat edge index s * B + b is already in (state, branch) order; a stable sort keeps it per target
        by_target = np.argsort(self.next_state.ravel(), kind="stable")
        self.prev_state = (by_target // self.num_branches).reshape(self.num_states, self.num_branches)
        self.prev_branch = (by_target % self.num_branches).reshape(self.num_states, self.num_branches)


class ConvolutionalCode(LinearCode):
    """A terminated (or truncated) frame of ``steps`` trellis steps as a linear block code."""

    def __init__(self, spec: ConvCodeSpec, info_steps: int):
        if info_steps < 1:
            raise ValueError("a frame needs at least one information step")
        self.spec = spec
        self.ring = spec.ring
        self.trellis = Trellis(spec)
        self.info_steps = info_steps
        self.steps = info_steps + (spec.memory if spec.terminated else 0)
        self.n = spec.outputs * self.steps
        self.message_rings = (spec.ring,) * (spec.inputs * info_steps)
        logger.debug(
            "convolutional code: %d states, n=%d, k=%d over %s", self.trellis.num_states, self.n, self.k, spec.field
        )

    @property
    def num_states(self) -> int:
        return self.trellis.num_states

    def _branch_inputs(self, messages: np.ndarray) -> np.ndarray:
        """Branch indices (batch, steps) for step-major messages, zero tail included."""
        batch = messages.shape[0]
        digits = messages.reshape(batch, self.info_steps, self.spec.inputs)
        weights = self.spec.q ** np.arange(self.spec.inputs)
        branches = np.zeros((batch, self.steps), dtype=np.int64)
        branches[:, : self.info_steps] = digits @ weights
        return branches

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        messages = self.check_messages(messages)
        branches = self._branch_inputs(messages)
        batch = messages.shape[0]
        state = np.zeros(batch, dtype=np.int64)
        out = np.zeros((batch, self.steps, self.spec.outputs), dtype=np.int64)
        for t in range(self.steps):
            out[:, t] = self.trellis.outputs[state, branches[:, t]]
            state = self.trellis.next_state[state, branches[:, t]]
        return out.reshape(batch, self.n)

    def symbol_costs_to_branch_metrics(self, costs: np.ndarray) -> np.ndarray:
        """Per-branch metrics (steps, S, B) from per-output-symbol costs (n, q)."""
        costs = np.asarray(costs, dtype=np.float64).reshape(self.steps, self.spec.outputs, self.spec.q)
        metric = np.zeros((self.steps, self.num_states, self.trellis.num_branches))
        for j in range(self.spec.outputs):
            metric += costs[:, j][:, self.trellis.outputs[:, :, j]]
        return metric

    def viterbi(self, branch_metric: np.ndarray | Callable[[int], np.ndarray]) -> HardDecision:
        """Minimum-metric path through the trellis.

        ``branch_metric`` is either an array (steps, S, B) or a callable returning the (S, B) metrics
        of step t. Ties go to the smallest predecessor state, then the smallest branch.
        """
        trellis = self.trellis
        ps, pb = trellis.prev_state, trellis.prev_branch
        path = np.full(self.num_states, np.inf)
        path[0] = 0.0
        back = np.zeros((self.steps, self.num_states), dtype=np.int64)
        for t in range(self.steps):
            metric = branch_metric(t) if callable(branch_metric) else branch_metric[t]
            metric = np.asarray(metric, dtype=np.float64)
            if not np.all(np.isfinite(metric)):
                raise DecoderError(f"non-finite branch metric at step {t}")
            if np.any(metric < 0):
                raise DecoderError(f"negative branch metric at step {t}")
            candidates = path[ps] + metric[ps, pb]
            if t >= self.info_steps:
                candidates = np.where(pb == 0, candidates, np.inf)
            best = np.argmin(candidates, axis=1)
            back[t] = best
            path = candidates[np.arange(self.num_states), best]

        state = 0 if self.spec.terminated else int(np.argmin(path))
        total = float(path[state])
        branches = np.zeros(self.steps, dtype=np.int64)
        for t in range(self.steps - 1, -1, -1):
            choice = back[t, state]
            branches[t] = pb[state, choice]
            state = ps[state, choice]
        digits = trellis.branch_digits[branches[: self.info_steps]]
        message = digits.reshape(-1)
        return HardDecision(message, self.encode(message), total)

    def decode_costs(self, costs: np.ndarray) -> HardDecision:
        return self.viterbi(self.symbol_costs_to_branch_metrics(costs))

    def unencode(self, word: Sequence[int]) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        if word.shape != (self.n,):
            raise NotACodewordError(f"expected a word of length {self.n}, got shape {word.shape}")
        costs = (np.arange(self.spec.q)[None, :] != word[:, None]).astype(np.float64)
        result = self.decode_costs(costs)
        if result.metric != 0.0:
            raise NotACodewordError(f"word is at Hamming distance {result.metric:.0f} from the code")
        return result.message

    def map_decode(self, symbol_priors: np.ndarray) -> MapResult:
        """Symbol-wise MAP decoding from output-symbol probabilities (n, q).

        Rows are renormalised; probabilities are floored at ``PRIOR_FLOOR`` before taking logs.
        """
        q, c = self.spec.q, self.spec.outputs
        priors = normalize_priors(symbol_priors, self.n, q)
        logp = np.log(np.maximum(priors, PRIOR_FLOOR)).reshape(self.steps, c, q)

        trellis = self.trellis
        S = self.num_states
        gamma = np.zeros((self.steps, S, trellis.num_branches))
        for j in range(c):
            gamma += logp[:, j][:, trellis.outputs[:, :, j]]
        gamma[self.info_steps :, :, 1:] = -np.inf

        ps, pb = trellis.prev_state, trellis.prev_branch
        alpha = np.full((self.steps + 1, S), -np.inf)
        alpha[0, 0] = 0.0
        for t in range(self.steps):
            alpha[t + 1] = logsumexp(alpha[t][ps] + gamma[t][ps, pb], axis=1)
            alpha[t + 1] -= logsumexp(alpha[t + 1])

        beta = np.full((self.steps + 1, S), -np.inf)
        if self.spec.terminated:
            beta[self.steps, 0] = 0.0
        else:
            beta[self.steps] = 0.0
        for t in range(self.steps - 1, -1, -1):
            beta[t] = logsumexp(gamma[t] + beta[t + 1][trellis.next_state], axis=1)
            beta[t] -= logsumexp(beta[t])

        joint = alpha[:-1, :, None] + gamma + beta[1:][:, trellis.next_state]

        per_branch = logsumexp(joint[: self.info_steps], axis=1)
        inputs = np.empty((self.info_steps, self.spec.inputs, q))
        for r in range(self.spec.inputs):
            for v in range(q):
                mask = trellis.branch_digits[:, r] == v
                inputs[:, r, v] = logsumexp(per_branch[:, mask], axis=1)
        input_post = softmax(inputs.reshape(-1, q))

        extrinsic = np.empty((self.steps, c, q))
        for j in range(c):
            own = logp[:, j][:, trellis.outputs[:, :, j]]
            excluded = joint - own
            for v in range(q):
                mask = trellis.outputs[:, :, j] == v
                extrinsic[:, j, v] = logsumexp(excluded[:, mask], axis=1)
        extrinsic = extrinsic.reshape(self.n, q)
        return MapResult(input_post, softmax(extrinsic), softmax(extrinsic + logp.reshape(self.n, q)))
