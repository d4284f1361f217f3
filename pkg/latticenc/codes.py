"""
Linear block codes over residue rings of S.

Symbols are the integer indices of :class:`~latticenc.residue.ResidueRing`. Every code exposes the
same interface (``encode``/``unencode``/``contains``/``codewords``), which the lattice layer and the
convolutional codes in :mod:`latticenc.convcode` rely on.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from latticenc.eisenstein import EisensteinInt
from latticenc.exceptions import DecoderError, EnumerationBoundError, InvalidModulusError, NotACodewordError
from latticenc.residue import Modulus, ResidueRing, residue_ring

logger = logging.getLogger(__name__)

CODEWORD_BOUND = 10**6
PRIOR_FLOOR = 1e-300


class HardDecision(NamedTuple):
    message: np.ndarray
    codeword: np.ndarray
    metric: float


class MapResult(NamedTuple):
    input_posteriors: np.ndarray  # (k, q)
    extrinsic: np.ndarray  # (n, q)
    output_posteriors: np.ndarray  # (n, q)


def normalize_priors(symbol_priors: np.ndarray, n: int, q: int) -> np.ndarray:
    """Validate per-position probabilities (n, q) and renormalise each row."""
    priors = np.asarray(symbol_priors, dtype=np.float64)
    if priors.shape != (n, q):
        raise DecoderError(f"expected priors of shape {(n, q)}, got {priors.shape}")
    if not np.all(np.isfinite(priors)) or np.any(priors < 0):
        raise DecoderError("priors must be finite and non-negative")
    totals = priors.sum(axis=1)
    if np.any(totals <= 0):
        raise DecoderError(f"all-zero prior at position {int(np.flatnonzero(totals <= 0)[0])}")
    return priors / totals[:, None]


def softmax(log_values: np.ndarray) -> np.ndarray:
    return np.exp(log_values - logsumexp(log_values, axis=-1, keepdims=True))


class LinearCode:
    """Base class for codes of length ``n`` over ``ring``.

    Message position r carries a symbol of ``message_rings[r]``; for codes over fields and plain
    chain-ring codes that is ``ring`` itself.
    """

    ring: ResidueRing
    n: int
    message_rings: tuple[ResidueRing, ...]

    @property
    def k(self) -> int:
        return len(self.message_rings)

    @property
    def message_orders(self) -> tuple[int, ...]:
        return tuple(r.order for r in self.message_rings)

    @property
    def size(self) -> int:
        return math.prod(self.message_orders)

    @property
    def log2_size(self) -> float:
        return sum(math.log2(q) for q in self.message_orders)

    def check_messages(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=np.int64)
        if messages.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} message symbols, got {messages.shape[-1]}")
        orders = np.asarray(self.message_orders, dtype=np.int64)
        if np.any(messages < 0) or np.any(messages >= orders):
            raise ValueError("message symbol out of range for its message ring")
        return messages

    def encode(self, message: Sequence[int]) -> np.ndarray:
        return self.encode_batch(np.asarray(message, dtype=np.int64)[None, :])[0]

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def unencode(self, word: Sequence[int]) -> np.ndarray:
        raise NotImplementedError

    def contains(self, word: Sequence[int]) -> bool:
        try:
            self.unencode(word)
        except NotACodewordError:
            return False
        return True

    def all_messages(self, bound: int = CODEWORD_BOUND) -> np.ndarray:
        if self.size > bound:
            raise EnumerationBoundError(
                f"code has {self.size} codewords, over the bound {bound}", size=self.size, bound=bound
            )
        if self.k == 0:
            return np.zeros((1, 0), dtype=np.int64)
        return np.indices(self.message_orders).reshape(self.k, -1).T.astype(np.int64)

    def codewords(self, bound: int = CODEWORD_BOUND) -> tuple[np.ndarray, np.ndarray]:
        """All (messages, codewords), messages in lexicographic order."""
        messages = self.all_messages(bound)
        return messages, self.encode_batch(messages)

    def generator_rows(self) -> np.ndarray:
        """Codewords of the unit messages, one row per message position."""
        units = np.zeros((self.k, self.k), dtype=np.int64)
        for r, mring in enumerate(self.message_rings):
            units[r, r] = mring.one
        return self.encode_batch(units) if self.k else np.zeros((0, self.n), dtype=np.int64)

    def decode_costs(self, costs: np.ndarray) -> HardDecision:
        """Codeword minimising the summed per-symbol costs (n, q), by exhaustive search.

        Ties go to the lexicographically smallest message.
        """
        costs = np.asarray(costs, dtype=np.float64)
        if costs.shape != (self.n, self.ring.order):
            raise DecoderError(f"expected costs of shape {(self.n, self.ring.order)}, got {costs.shape}")
        if not np.all(np.isfinite(costs)):
            raise DecoderError("non-finite symbol cost")
        messages, words = self.codewords()
        totals = costs[np.arange(self.n), words].sum(axis=1)
        best = int(np.argmin(totals))
        return HardDecision(messages[best], words[best], float(totals[best]))

    def map_decode(self, symbol_priors: np.ndarray) -> MapResult:
        """Symbol-wise MAP by exhaustive codeword enumeration."""
        q = self.ring.order
        priors = normalize_priors(symbol_priors, self.n, q)
        logp = np.log(np.maximum(priors, PRIOR_FLOOR))
        messages, words = self.codewords()
        positions = np.arange(self.n)
        scores = logp[positions, words].sum(axis=1)

        width = max(self.message_orders, default=q)
        inputs = np.full((self.k, width), -np.inf)
        for r, order in enumerate(self.message_orders):
            for v in range(order):
                hits = messages[:, r] == v
                if np.any(hits):
                    inputs[r, v] = logsumexp(scores[hits])

        extrinsic = np.full((self.n, q), -np.inf)
        for j in range(self.n):
            own = logp[j, words[:, j]]
            for v in range(q):
                hits = words[:, j] == v
                if np.any(hits):
                    extrinsic[j, v] = logsumexp(scores[hits] - own[hits])
        return MapResult(softmax(inputs), softmax(extrinsic), softmax(extrinsic + logp))

    def combine_messages(self, messages: np.ndarray, coeffs: Sequence[EisensteinInt]) -> np.ndarray:
        """Message of sum_l coeffs[l] * messages[l] (messages stacked on the first axis)."""
        messages = np.asarray(messages, dtype=np.int64)
        if messages.shape[0] != len(coeffs):
            raise ValueError(f"{messages.shape[0]} messages but {len(coeffs)} coefficients")
        out = np.zeros(messages.shape[1:], dtype=np.int64)
        for r, mring in enumerate(self.message_rings):
            acc = np.zeros(messages.shape[1:-1], dtype=np.int64)
            for coeff, message in zip(coeffs, messages):
                acc = mring.add(acc, mring.scale(coeff, message[..., r]))
            out[..., r] = acc
        return out

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, k={self.k}, ring={self.ring.modulus!s})"


class BlockCode(LinearCode):
    """Systematic code with generator [I | parity] over ``ring``."""

    def __init__(self, ring: ResidueRing, parity: np.ndarray | Sequence[Sequence[int]]):
        parity = np.asarray(parity, dtype=np.int64)
        if parity.ndim != 2:
            raise ValueError("parity must be a k x (n - k) matrix")
        k, redundancy = parity.shape
        if np.any(parity < 0) or np.any(parity >= ring.order):
            raise ValueError("parity entry out of range")
        self.ring = ring
        self.n = k + redundancy
        self.parity = parity
        self.message_rings = (ring,) * k
        self.rows = np.zeros((k, self.n), dtype=np.int64)
        self.rows[np.arange(k), np.arange(k)] = ring.one
        self.rows[:, k:] = parity

    @classmethod
    def repetition(cls, ring: ResidueRing, n: int) -> "BlockCode":
        return cls(ring, np.full((1, n - 1), ring.one, dtype=np.int64))

    @classmethod
    def full_space(cls, ring: ResidueRing, n: int) -> "BlockCode":
        return cls(ring, np.zeros((n, 0), dtype=np.int64))

    @classmethod
    def zero(cls, ring: ResidueRing, n: int) -> "BlockCode":
        return cls(ring, np.zeros((0, n), dtype=np.int64))

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        messages = self.check_messages(messages)
        out = np.zeros((messages.shape[0], self.n), dtype=np.int64)
        out[:, : self.k] = messages
        for r in range(self.k):
            out[:, self.k :] = self.ring.add(
                out[:, self.k :], self.ring.mul(messages[:, r : r + 1], self.parity[r][None, :])
            )
        return out

    def unencode(self, word: Sequence[int]) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        if word.shape != (self.n,):
            raise NotACodewordError(f"expected a word of length {self.n}, got shape {word.shape}")
        message = word[: self.k].copy()
        if not np.array_equal(self.encode(message), word):
            raise NotACodewordError("word fails the parity checks")
        return message


class NestedBlockCode(LinearCode):
    """Code over the chain ring S/<p^gamma> built from nested digit blocks.

    Block t contributes rows p^t [e_l | B_l]; its message symbols live in S/<p^(gamma - t)>. The digit
    codes obtained by reducing the rows of blocks 0..t mod p are nested in t.
    """

    def __init__(self, modulus: Modulus, blocks: Sequence[tuple[int, np.ndarray | Sequence[Sequence[int]]]], n: int):
        if modulus.is_field:
            raise InvalidModulusError("nested block codes need a chain ring with gamma > 1")
        self.modulus = modulus
        self.ring = modulus.ring()
        self.n = n
        self.blocks: list[tuple[int, np.ndarray]] = []
        for t, parity in sorted(blocks, key=lambda tb: tb[0]):
            if not 0 <= t < modulus.exponent:
                raise ValueError(f"block index t={t} outside 0..{modulus.exponent - 1}")
            self.blocks.append((t, np.asarray(parity, dtype=np.int64)))
        self.pivots = sum(parity.shape[0] for _, parity in self.blocks)
        if self.pivots > n:
            raise ValueError(f"{self.pivots} pivots do not fit in length {n}")

        rows, rings, shifts = [], [], []
        pivot = 0
        for t, parity in self.blocks:
            if parity.shape[1] != n - self.pivots:
                raise ValueError(f"block t={t} parity must have {n - self.pivots} columns")
            shift = modulus.prime**t
            for r in range(parity.shape[0]):
                row = np.zeros(n, dtype=np.int64)
                row[pivot] = self.ring.one
                row[self.pivots :] = parity[r]
                rows.append(self.ring.scale(shift, row))
                rings.append(residue_ring(modulus.prime ** (modulus.exponent - t)))
                shifts.append(t)
                pivot += 1
        self.rows = np.array(rows, dtype=np.int64).reshape(len(rows), n)
        self.message_rings = tuple(rings)
        self.shifts = tuple(shifts)
        # lift message symbols into the code ring via their leaders
        self._lift = [self.ring.reduce_array(m.leader_a, m.leader_b) for m in self.message_rings]

    @property
    def digit_dimensions(self) -> dict[int, int]:
        dims = {t: 0 for t in range(self.modulus.exponent)}
        for t in self.shifts:
            dims[t] += 1
        return dims

    def dimension_identity(self, k: int | float) -> bool:
        """Whether gamma * k == sum_t (gamma - t) k'_t."""
        gamma = self.modulus.exponent
        return math.isclose(gamma * k, sum((gamma - t) * kt for t, kt in self.digit_dimensions.items()))

    def encode_batch(self, messages: np.ndarray) -> np.ndarray:
        messages = self.check_messages(messages)
        out = np.zeros((messages.shape[0], self.n), dtype=np.int64)
        for r in range(self.k):
            lifted = self._lift[r][messages[:, r]]
            out = self.ring.add(out, self.ring.mul(lifted[:, None], self.rows[r][None, :]))
        return out

    def unencode(self, word: Sequence[int]) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        if word.shape != (self.n,):
            raise NotACodewordError(f"expected a word of length {self.n}, got shape {word.shape}")
        message = np.zeros(self.k, dtype=np.int64)
        for r, (t, mring) in enumerate(zip(self.shifts, self.message_rings)):
            pivot_value = self.ring.leader(word[r])
            quotient, remainder = divmod(pivot_value, self.modulus.prime**t)
            if not remainder.is_zero():
                raise NotACodewordError(f"pivot {r} is not divisible by p^{t}")
            message[r] = mring.reduce(quotient)
        if not np.array_equal(self.encode(message), word):
            raise NotACodewordError("word fails the parity checks")
        return message

    def digit_code(self, t: int) -> BlockCode:
        """The residue-field code spanned by blocks 0..t reduced mod p."""
        field = self.modulus.field()
        selected = [(s, parity) for s, parity in self.blocks if s <= t]
        k_t = sum(parity.shape[0] for _, parity in selected)
        parity_t = np.zeros((k_t, self.n - k_t), dtype=np.int64)
        row = 0
        for _, parity in selected:
            for r in range(parity.shape[0]):
                reduced = field.reduce_array(self.ring.leader_a[parity[r]], self.ring.leader_b[parity[r]])
                parity_t[row, self.pivots - k_t :] = reduced
                row += 1
        return BlockCode(field, parity_t)
