"""
Multilevel lattice network coding over the MAC hop of a relay network.

Each source maps its per-layer messages to a lattice point, adds a dither and folds the result into
the Voronoi cell of the coarse lattice varpi S^n. The relay observes y = sum_l h_l x_l + z and
recovers one linear combination per layer, either with layered integer forcing (:func:`lif_decode`)
or with the layered soft detector (:class:`SoftDetector`) feeding the layer codes' MAP decoders in a
multistage (MSD), single-pass (non-MSD) or iterative multistage (IMSD) schedule.

L-values (:data:`LVector`) are arrays of shape (n, q) holding log(Pr(. | V = v) / Pr(. | V = 0)) per
position; column 0 is therefore always zero.
"""

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import dblquad
from scipy.special import logsumexp

from latticenc.codes import PRIOR_FLOOR, softmax
from latticenc.edc_lattice import LatticeSpec
from latticenc.eisenstein import OMEGA, EisensteinInt, norm, quantize_array, to_complex_array
from latticenc.exceptions import DecoderError, EnumerationBoundError, InvalidModulusError, LatticeError
from latticenc.models import ChannelConfig, DecoderMode

logger = logging.getLogger(__name__)

COEFFICIENT_NORM_BOUND = 9
TUPLE_BOUND = 1 << 16
LLR_FLOOR = math.log(PRIOR_FLOOR)
MI_SELECTION_SAMPLES = 2000

LVector = np.ndarray
FrameTrace = Callable[..., None]


# ---------------------------------------------------------------------------
# Shaping: folding, dithers and transmit power
# ---------------------------------------------------------------------------


def fold(z, scale: EisensteinInt | int) -> np.ndarray:
    """Reduce complex values into the Voronoi cell of scale * Z[w]."""
    s = EisensteinInt.coerce(scale).to_complex()
    z = np.asarray(z, dtype=np.complex128)
    a, b = quantize_array(z / s)
    return z - s * to_complex_array(a, b)


def sample_dither(shape, varpi: EisensteinInt, rng: np.random.Generator) -> np.ndarray:
    """Dithers uniform over the Voronoi cell of varpi Z[w]: uniform in the parallelogram, then folded."""
    s = EisensteinInt.coerce(varpi).to_complex()
    u = rng.random(shape)
    v = rng.random(shape)
    return fold(s * (u + v * OMEGA), varpi)


@lru_cache(maxsize=32)
def average_power(varpi: EisensteinInt) -> float:
    """Second moment E|x|^2 per complex dimension of the uniform law on the Voronoi cell of varpi Z[w].

    The hexagon is split into six triangles (0, v_k, v_k+1) with vertices v_k = u_k varpi (2 + w) / 3
    and each triangle integrated numerically.
    """
    varpi = EisensteinInt.coerce(varpi)
    if varpi.is_zero():
        raise InvalidModulusError("average power is undefined for varpi = 0")
    corner = varpi.to_complex() * (2.0 + OMEGA) / 3.0
    rotation = complex(0.5, math.sqrt(3.0) / 2.0)
    vertices = [corner * rotation**k for k in range(6)]

    moment = area = 0.0
    for k in range(6):
        p, q = vertices[k], vertices[(k + 1) % 6]
        jacobian = abs((p.conjugate() * q).imag)
        value, _ = dblquad(lambda t, s: abs(s * p + t * q) ** 2, 0.0, 1.0, 0.0, lambda s: 1.0 - s)
        moment += value * jacobian
        area += jacobian / 2.0
    return moment / area


def noise_for_snr(varpi: EisensteinInt, snr_db: float, offset_db: float = 0.0) -> float:
    """N0 such that average_power(varpi) / N0 equals the SNR (shifted by ``offset_db``)."""
    return average_power(EisensteinInt.coerce(varpi)) / 10.0 ** ((snr_db + offset_db) / 10.0)


# ---------------------------------------------------------------------------
# Transmitters and the MAC channel
# ---------------------------------------------------------------------------


@dataclass
class SourceState:
    """One source's frame: layer messages, dither and the folded transmit vector."""

    messages: list[np.ndarray]
    residues: np.ndarray
    lattice_point: np.ndarray
    dither: np.ndarray
    x: np.ndarray

    @property
    def coarse(self) -> np.ndarray:
        """lambda' = Q_{Lambda'}(phi_tilde(w) + d), as complex coordinates."""
        return self.lattice_point + self.dither - self.x


def transmit(
    spec: LatticeSpec,
    messages: Sequence[np.ndarray],
    dither: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> SourceState:
    """x = phi_tilde(w) + d - Q_{Lambda'}(phi_tilde(w) + d).

    Without a supplied ``dither`` one is drawn from ``rng``; pass zeros to disable dithering.
    """
    messages = [layer.code.check_messages(w) for layer, w in zip(spec.layers, messages)]
    residues = spec.encode_residues(messages)
    point = spec.ring.leader_complex[residues]
    if dither is None:
        if rng is None:
            raise ValueError("either a dither or a random generator is required")
        dither = sample_dither(spec.n, spec.varpi, rng)
    dither = np.asarray(dither, dtype=np.complex128)
    if dither.shape != (spec.n,):
        raise ValueError(f"expected a dither of length {spec.n}, got shape {dither.shape}")
    x = fold(point + dither, spec.varpi)
    return SourceState(messages, residues, point, dither, x)


def mac_output(
    states: Sequence[SourceState],
    channel: ChannelConfig,
    rng: np.random.Generator,
    gains: np.ndarray | None = None,
) -> np.ndarray:
    """y = sum_l h_l x_l + z with circular Gaussian z of variance N0 per complex coordinate."""
    if channel.noise_variance is None:
        raise ValueError("channel has no noise variance; set one or derive it from an SNR")
    if len(states) != channel.num_sources:
        raise ValueError(f"channel expects {channel.num_sources} sources, got {len(states)}")
    lengths = {state.x.shape for state in states}
    if len(lengths) != 1:
        raise ValueError(f"sources transmit vectors of different shapes {sorted(lengths)}")
    if gains is None:
        gains = channel.draw_gains(rng)
    gains = np.asarray(gains, dtype=np.complex128)
    y = sum(h * state.x for h, state in zip(gains, states))
    shape = states[0].x.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return y + math.sqrt(channel.noise_variance / 2.0) * noise


# ---------------------------------------------------------------------------
# Scaling and integer coefficients
# ---------------------------------------------------------------------------


def _as_complex(coefficients: Sequence[EisensteinInt | int]) -> np.ndarray:
    return np.array([EisensteinInt.coerce(c).to_complex() for c in coefficients], dtype=np.complex128)


def choose_alpha(h, a_tilde: Sequence[EisensteinInt | int], power: float, noise_variance: float) -> complex:
    """MMSE scaling P h^H a / (N0 + P ||h||^2)."""
    if power <= 0 or noise_variance <= 0:
        raise ValueError("power and noise variance must be positive")
    h = np.asarray(h, dtype=np.complex128)
    a = _as_complex(a_tilde)
    return complex(power * np.vdot(h, a) / (noise_variance + power * np.vdot(h, h).real))


def effective_noise_variance(alpha: complex, h, a_tilde, power: float, noise_variance: float) -> float:
    """Per-coordinate E|alpha y - sum a x|^2 = N0 |alpha|^2 + P ||alpha h - a||^2."""
    h = np.asarray(h, dtype=np.complex128)
    a = _as_complex(a_tilde)
    return float(noise_variance * abs(alpha) ** 2 + power * np.sum(np.abs(alpha * h - a) ** 2))


def mmse_variance(h, a_tilde, snr: float) -> float:
    """||a||^2 - snr |h^H a|^2 / (1 + snr ||h||^2), the effective noise at the MMSE scaling over N0 = 1."""
    h = np.asarray(h, dtype=np.complex128)
    a = _as_complex(a_tilde)
    return float(np.vdot(a, a).real - snr * abs(np.vdot(h, a)) ** 2 / (1.0 + snr * np.vdot(h, h).real))


def rate_objective(h, a_tilde, snr: float) -> float:
    """log2 of the inverse MMSE effective-noise variance (unclamped)."""
    variance = mmse_variance(h, a_tilde, snr)
    if variance <= 0:
        return math.inf
    return -math.log2(variance)


@lru_cache(maxsize=8)
def candidate_coefficients(
    num_sources: int, norm_bound: int = COEFFICIENT_NORM_BOUND
) -> tuple[tuple[EisensteinInt, ...], ...]:
    """Nonzero coefficient vectors with entries of norm <= bound, one per unit class.

    The first nonzero entry is canonical; vectors come in (squared length, lexicographic) order.
    """
    radius = math.isqrt(4 * norm_bound // 3) + 1
    entries = sorted(
        EisensteinInt(a, b)
        for a in range(-radius, radius + 1)
        for b in range(-radius, radius + 1)
        if norm(EisensteinInt(a, b)) <= norm_bound
    )
    candidates = []
    for vector in itertools.product(entries, repeat=num_sources):
        lead = next((c for c in vector if not c.is_zero()), None)
        if lead is None or lead != lead.canonical():
            continue
        candidates.append(vector)
    candidates.sort(key=lambda v: (sum(c.norm() for c in v), v))
    return tuple(candidates)


class LayerCoefficients(NamedTuple):
    alpha: complex
    integer: tuple[EisensteinInt, ...]
    reduced: np.ndarray
    objective: float


@dataclass(frozen=True)
class CoefficientPlan:
    """Per-layer scaling alpha^i, integer vector a~^i and its reduction a^i in the layer ring."""

    layers: tuple[LayerCoefficients, ...]
    method: str = "manual"

    def __getitem__(self, i: int) -> LayerCoefficients:
        return self.layers[i]

    def __len__(self):
        return len(self.layers)

    @property
    def reduced(self) -> list[np.ndarray]:
        return [layer.reduced for layer in self.layers]

    @classmethod
    def from_integers(
        cls,
        spec: LatticeSpec,
        integers: Sequence[Sequence[EisensteinInt | int]],
        gains,
        power: float,
        noise_variance: float,
    ) -> "CoefficientPlan":
        """Plan from explicit integer vectors, one per layer, with MMSE scalings."""
        if len(integers) != spec.num_layers:
            raise ValueError(f"expected {spec.num_layers} coefficient vectors, got {len(integers)}")
        snr = power / noise_variance
        layers = []
        for i, vector in enumerate(integers):
            vector = tuple(EisensteinInt.coerce(c) for c in vector)
            reduced = reduce_coefficients(spec, i, vector)
            if not np.any(reduced):
                raise LatticeError(f"coefficients {[str(c) for c in vector]} vanish in layer {i}")
            alpha = choose_alpha(gains, vector, power, noise_variance)
            layers.append(LayerCoefficients(alpha, vector, reduced, rate_objective(gains, vector, snr)))
        return cls(tuple(layers))


def reduce_coefficients(spec: LatticeSpec, i: int, integers: Sequence[EisensteinInt]) -> np.ndarray:
    ring = spec.check_layer(i).modulus.ring()
    return np.array([ring.reduce(c) for c in integers], dtype=np.int64)


def _rate_plan(spec: LatticeSpec, gains, power: float, noise_variance: float, norm_bound: int) -> CoefficientPlan:
    snr = power / noise_variance
    candidates = candidate_coefficients(len(gains), norm_bound)
    objectives = [rate_objective(gains, vector, snr) for vector in candidates]
    layers = []
    for i in range(spec.num_layers):
        best = None
        for vector, value in zip(candidates, objectives):
            if best is not None and value <= best[1] + 1e-12:
                continue
            reduced = reduce_coefficients(spec, i, vector)
            if np.any(reduced):
                best = (vector, value, reduced)
        if best is None:
            raise LatticeError(f"no coefficient vector within norm {norm_bound} survives reduction in layer {i}")
        vector, value, reduced = best
        layers.append(LayerCoefficients(choose_alpha(gains, vector, power, noise_variance), vector, reduced, value))
    return CoefficientPlan(tuple(layers), method="rate")


def _mi_plan(spec: LatticeSpec, gains, power: float, noise_variance: float, norm_bound: int) -> CoefficientPlan:
    snr = power / noise_variance
    num_sources = len(gains)
    candidates = candidate_coefficients(num_sources, norm_bound)
    layers = []
    for i in range(spec.num_layers):
        ring = spec.layers[i].modulus.ring()
        lifts: dict[tuple[int, ...], tuple[tuple[EisensteinInt, ...], float]] = {}
        for vector in candidates:
            key = tuple(int(r) for r in reduce_coefficients(spec, i, vector))
            value = rate_objective(gains, vector, snr)
            if key not in lifts or value > lifts[key][1] + 1e-12:
                lifts[key] = (vector, value)

        best = None
        for key in itertools.product(range(ring.order), repeat=num_sources):
            lead = next((r for r in key if r != 0), None)
            if lead != ring.one or key not in lifts:
                continue
            coefficients = [np.full(num_sources, ring.one, dtype=np.int64) for _ in spec.layers]
            coefficients[i] = np.asarray(key, dtype=np.int64)
            model = TupleModel(spec, num_sources, coefficients)
            # common random numbers across candidates
            rng = np.random.default_rng(0)
            info = float(
                np.mean(
                    model.sample_information(
                        [i], [], np.asarray(gains)[None, :], noise_variance, rng, MI_SELECTION_SAMPLES
                    )
                )
            )
            if best is None or info > best[1] + 1e-12:
                best = (key, info)
        if best is None:
            raise LatticeError(f"no reduced coefficient tuple with a lift of norm <= {norm_bound} in layer {i}")
        key, info = best
        vector = lifts[key][0]
        reduced = np.asarray(key, dtype=np.int64)
        layers.append(LayerCoefficients(choose_alpha(gains, vector, power, noise_variance), vector, reduced, info))
    return CoefficientPlan(tuple(layers), method="mi")


def choose_coefficients(
    h,
    spec: LatticeSpec,
    power: float,
    noise_variance: float,
    method: str = "rate",
    norm_bound: int = COEFFICIENT_NORM_BOUND,
) -> CoefficientPlan:
    """Per-layer integer coefficients by exhaustive computation-rate search or by maximum mutual information."""
    gains = np.asarray(h, dtype=np.complex128)
    if gains.ndim != 1 or not np.all(np.isfinite(gains)):
        raise ValueError("channel gains must be a finite vector")
    if power <= 0 or noise_variance <= 0:
        raise ValueError("power and noise variance must be positive")
    if method == "rate":
        plan = _rate_plan(spec, gains, power, noise_variance, norm_bound)
    elif method == "mi":
        plan = _mi_plan(spec, gains, power, noise_variance, norm_bound)
    else:
        raise ValueError(f"unknown coefficient method '{method}' (expected 'rate' or 'mi')")
    logger.debug("coefficients for h=%s: %s", gains, [[str(c) for c in layer.integer] for layer in plan.layers])
    return plan


# ---------------------------------------------------------------------------
# Layered integer forcing
# ---------------------------------------------------------------------------


class LifResult(NamedTuple):
    message: np.ndarray
    codeword: np.ndarray
    residual: np.ndarray
    metric: float


def lif_decode(y, plan: CoefficientPlan, dithers, spec: LatticeSpec, i: int) -> LifResult:
    """Decode the layer-i combination sum_l a^i_l w^i_l from alpha^i y - sum_l a~^i_l d_l.

    The kernel Lambda_i' is replaced by the separable p_i^gamma S^n that contains it, so the symbol
    metric of c is the squared distance from each coordinate to the coset lift(c) + p_i^gamma S.
    ``residual`` is the difference between the scaled observation and the decided lattice point.
    """
    layer = spec.check_layer(i)
    coefficients = plan[i]
    y = np.asarray(y, dtype=np.complex128)
    dithers = np.asarray(dithers, dtype=np.complex128).reshape(len(coefficients.integer), -1)
    if y.shape != (spec.n,) or dithers.shape[1] != spec.n:
        raise ValueError(f"expected observations and dithers of length {spec.n}")
    s = coefficients.alpha * y - _as_complex(coefficients.integer) @ dithers

    ring = layer.modulus.ring()
    offsets = s[:, None] - ring.leader_complex[None, :]
    folded = fold(offsets, layer.modulus.value)
    costs = np.abs(folded) ** 2
    if not np.all(np.isfinite(costs)):
        raise DecoderError("non-finite integer-forcing metric")
    decision = layer.code.decode_costs(costs)
    residual = folded[np.arange(spec.n), decision.codeword]
    return LifResult(decision.message, decision.codeword, residual, decision.metric)


# ---------------------------------------------------------------------------
# Layered soft detection
# ---------------------------------------------------------------------------


def to_lvector(probabilities: np.ndarray) -> LVector:
    logp = np.log(np.maximum(np.asarray(probabilities, dtype=np.float64), PRIOR_FLOOR))
    return logp - logp[..., :1]


def from_lvector(values: LVector) -> np.ndarray:
    return softmax(np.asarray(values, dtype=np.float64))


def _combine_layer(ring, coefficients: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """sum_l coefficients[l] * symbols[:, l] in ``ring`` (symbol indices)."""
    acc = np.zeros(symbols.shape[0], dtype=np.int64)
    for a, column in zip(coefficients, symbols.T):
        acc = ring.add(acc, ring.mul(np.full_like(column, int(a)), column))
    return np.asarray(acc, dtype=np.int64)


class TupleModel:
    """Every residue tuple (r_1..r_L) of S/<varpi> and the layer combinations V^j it induces."""

    def __init__(self, spec: LatticeSpec, num_sources: int, coefficients: Sequence[np.ndarray]):
        if len(coefficients) != spec.num_layers:
            raise ValueError(f"expected {spec.num_layers} coefficient vectors, got {len(coefficients)}")
        order = spec.ring.order
        count = order**num_sources
        if count > TUPLE_BOUND:
            raise EnumerationBoundError(
                f"{count} residue tuples over the bound {TUPLE_BOUND}", size=count, bound=TUPLE_BOUND
            )
        self.spec = spec
        self.num_sources = num_sources
        self.tuples = np.indices((order,) * num_sources).reshape(num_sources, -1).T
        components = spec.crt.components[self.tuples]
        self.combos = np.stack(
            [
                _combine_layer(layer.modulus.ring(), np.asarray(coefficients[j]), components[:, :, j])
                for j, layer in enumerate(spec.layers)
            ],
            axis=1,
        )
        self.orders = tuple(layer.modulus.cardinality for layer in spec.layers)
        self.class_masks = [
            [self.combos[:, j] == v for v in range(q)] for j, q in enumerate(self.orders)
        ]

    @property
    def size(self) -> int:
        return self.tuples.shape[0]

    def means(self, gains: np.ndarray, dithers: np.ndarray) -> np.ndarray:
        """Noise-free observations (..., T) for gains (..., L) and per-source dithers (..., L)."""
        leaders = self.spec.ring.leader_complex
        folded = fold(leaders + dithers[..., None], self.spec.varpi)
        total = np.zeros(folded.shape[:-2] + (self.size,), dtype=np.complex128)
        for source in range(self.num_sources):
            total += gains[..., source, None] * folded[..., source, self.tuples[:, source]]
        return total

    def log_prior(self, apriori: dict[int, LVector], exclude: int, rows: int) -> np.ndarray:
        """Tuple log-priors (rows, T) induced by per-layer L-values (rows, q_j), skipping layer ``exclude``."""
        lp = np.zeros((rows, self.size))
        for j, values in apriori.items():
            if j == exclude:
                continue
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (rows, self.orders[j]):
                expected = (rows, self.orders[j])
                raise DecoderError(f"a-priori for layer {j} has shape {values.shape}, expected {expected}")
            lp += values[:, self.combos[:, j]]
        return lp

    def extrinsic(self, ll: np.ndarray, lp: np.ndarray, i: int) -> LVector:
        """e^i[v] = log sum_{V^i=v} exp(ll + lp) - log sum_{V^i=v} exp(lp), relative to v = 0."""
        out = np.empty((ll.shape[0], self.orders[i]))
        joint = ll + lp
        for v, mask in enumerate(self.class_masks[i]):
            if not mask.any():
                out[:, v] = -np.inf
                continue
            out[:, v] = logsumexp(joint[:, mask], axis=1) - logsumexp(lp[:, mask], axis=1)
        return np.maximum(out - out[:, :1], LLR_FLOOR)

    def class_log_prior(self, i: int) -> np.ndarray:
        """log Pr(V^i = v) under uniform tuples; -inf for unreachable values."""
        counts = np.array([mask.sum() for mask in self.class_masks[i]], dtype=np.float64)
        with np.errstate(divide="ignore"):
            return np.log(counts / self.size)

    def joint_keys(self, layers: Sequence[int]) -> np.ndarray:
        """Mixed-radix index of (V^j)_{j in layers} per tuple."""
        keys = np.zeros(self.size, dtype=np.int64)
        for j in layers:
            keys = keys * self.orders[j] + self.combos[:, j]
        return keys

    def sample_information(
        self,
        target: Sequence[int],
        conditioning: Sequence[int],
        gains: np.ndarray,
        noise_variance: float,
        rng: np.random.Generator,
        samples: int,
        dithered: bool = True,
    ) -> np.ndarray:
        """Per-sample information density log2 p(v_A | y, v_C) / p(v_A | v_C) in bits.

        ``gains`` has shape (L,) for a fixed channel or (samples, L) for one draw per sample.
        Residue tuples are uniform and the noise is circular Gaussian with variance ``noise_variance``.
        """
        gains = np.broadcast_to(np.asarray(gains, dtype=np.complex128), (samples, self.num_sources))
        truth = rng.integers(self.size, size=samples)
        if dithered:
            dithers = sample_dither((samples, self.num_sources), self.spec.varpi, rng)
        else:
            dithers = np.zeros((samples, self.num_sources), dtype=np.complex128)
        means = self.means(gains, dithers)
        noise = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
        y = means[np.arange(samples), truth] + math.sqrt(noise_variance / 2.0) * noise
        ll = -np.abs(y[:, None] - means) ** 2 / noise_variance

        key_c = self.joint_keys(conditioning)
        key_ac = self.joint_keys(list(target) + list(conditioning))
        mask_c = (key_c[None, :] == key_c[truth][:, None]).astype(np.float64)
        mask_ac = (key_ac[None, :] == key_ac[truth][:, None]).astype(np.float64)
        posterior = logsumexp(ll, b=mask_ac, axis=1) - logsumexp(ll, b=mask_c, axis=1)
        prior = np.log(mask_ac.sum(axis=1)) - np.log(mask_c.sum(axis=1))
        return (posterior - prior) / math.log(2.0)


class SoftDetector:
    """Per-frame symbol detector over all residue tuples of the L sources."""

    def __init__(
        self,
        spec: LatticeSpec,
        plan: CoefficientPlan,
        gains,
        noise_variance: float,
        dithers,
    ):
        if noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        gains = np.asarray(gains, dtype=np.complex128)
        dithers = np.asarray(dithers, dtype=np.complex128)
        if dithers.shape != (len(gains), spec.n):
            raise ValueError(f"expected dithers of shape {(len(gains), spec.n)}, got {dithers.shape}")
        self.spec = spec
        self.noise_variance = noise_variance
        self.model = TupleModel(spec, len(gains), plan.reduced)
        self._means = self.model.means(np.broadcast_to(gains, (spec.n, len(gains))), dithers.T)

    def log_likelihoods(self, y) -> np.ndarray:
        """log p(y_k | tuple t) up to a constant, shape (n, T)."""
        y = np.asarray(y, dtype=np.complex128)
        if y.shape != (self.spec.n,):
            raise ValueError(f"expected an observation of length {self.spec.n}, got shape {y.shape}")
        return -np.abs(y[:, None] - self._means) ** 2 / self.noise_variance

    def posterior(
        self,
        ll: np.ndarray,
        i: int,
        apriori: dict[int, LVector],
        own_prior: LVector | None = None,
    ) -> tuple[LVector, LVector]:
        """(a-posteriori d^i, extrinsic e^i) for layer i given other layers' a-priori L-values."""
        self.spec.check_layer(i)
        lp = self.model.log_prior(apriori, exclude=i, rows=self.spec.n)
        extrinsic = self.model.extrinsic(ll, lp, i)
        own = np.zeros_like(extrinsic) if own_prior is None else np.asarray(own_prior, dtype=np.float64)
        return own + extrinsic, extrinsic


def lsd_posterior(y, i: int, apriori: dict[int, LVector], detector: SoftDetector, own_prior=None):
    """Layer-i a-posteriori and extrinsic L-values of one received frame."""
    return detector.posterior(detector.log_likelihoods(y), i, apriori, own_prior)


# ---------------------------------------------------------------------------
# Layered decoders
# ---------------------------------------------------------------------------


class LayerDecision(NamedTuple):
    message: np.ndarray
    codeword: np.ndarray
    extrinsic: LVector | None


class LayeredDecoder:
    """Decodes one combination per layer from a received frame.

    ``trace``, when given, is called with keyword fields for every detector and decoder stage.
    """

    def __init__(
        self,
        spec: LatticeSpec,
        plan: CoefficientPlan,
        gains,
        noise_variance: float,
        dithers,
        trace: FrameTrace | None = None,
    ):
        self.spec = spec
        self.plan = plan
        self.dithers = np.asarray(dithers, dtype=np.complex128)
        self.gains = np.asarray(gains, dtype=np.complex128)
        self.noise_variance = noise_variance
        self.trace = trace
        self._detector: SoftDetector | None = None

    @property
    def detector(self) -> SoftDetector:
        if self._detector is None:
            self._detector = SoftDetector(self.spec, self.plan, self.gains, self.noise_variance, self.dithers)
        return self._detector

    def _schedule(self, schedule: Sequence[int] | None) -> list[int]:
        order = list(range(self.spec.num_layers)) if schedule is None else list(schedule)
        if sorted(order) != list(range(self.spec.num_layers)):
            raise ValueError(f"schedule {order} is not a permutation of the layers")
        return order

    def _map_stage(self, ll, i: int, apriori: dict[int, LVector], own_prior, iteration: int) -> LayerDecision:
        posterior, extrinsic = self.detector.posterior(ll, i, apriori, own_prior)
        code = self.spec.layers[i].code
        result = code.map_decode(from_lvector(extrinsic))
        message = np.argmax(result.input_posteriors, axis=1).astype(np.int64)
        code_extrinsic = to_lvector(result.extrinsic)
        if self.trace is not None:
            self.trace(
                stage="lsd",
                iteration=iteration,
                layer=i,
                posterior=posterior,
                extrinsic=extrinsic,
                code_extrinsic=code_extrinsic,
            )
        return LayerDecision(message, code.encode(message), code_extrinsic)

    def lif_decode(self, y) -> list[LayerDecision]:
        decisions = []
        for i in range(self.spec.num_layers):
            result = lif_decode(y, self.plan, self.dithers, self.spec, i)
            if self.trace is not None:
                self.trace(stage="lif", layer=i, residual=result.residual, metric=result.metric)
            decisions.append(LayerDecision(result.message, result.codeword, None))
        return decisions

    def non_msd_decode(self, y) -> list[LayerDecision]:
        ll = self.detector.log_likelihoods(y)
        return [self._map_stage(ll, i, {}, None, 1) for i in range(self.spec.num_layers)]

    def msd_decode(self, y, schedule: Sequence[int] | None = None) -> list[LayerDecision]:
        return self.imsd_decode(y, 1, schedule)

    def imsd_decode(self, y, iterations: int, schedule: Sequence[int] | None = None) -> list[LayerDecision]:
        """Iteration 1 is multistage decoding; later iterations refresh every layer in turn.

        Only extrinsic L-values of the layer codes are exchanged between layers.
        """
        if iterations < 1:
            raise ValueError(f"iterations must be positive, got {iterations}")
        order = self._schedule(schedule)
        ll = self.detector.log_likelihoods(y)
        decisions: dict[int, LayerDecision] = {}
        for iteration in range(1, iterations + 1):
            for i in order:
                apriori = {j: d.extrinsic for j, d in decisions.items() if j != i}
                own = decisions[i].extrinsic if i in decisions else None
                decisions[i] = self._map_stage(ll, i, apriori, own, iteration)
        return [decisions[i] for i in range(self.spec.num_layers)]

    def decode(self, y, mode: DecoderMode | str, iterations: int = 1, schedule=None) -> list[LayerDecision]:
        mode = DecoderMode(mode)
        if mode is DecoderMode.LIF:
            return self.lif_decode(y)
        if mode is DecoderMode.NON_MSD:
            return self.non_msd_decode(y)
        if mode is DecoderMode.MSD:
            return self.msd_decode(y, schedule)
        return self.imsd_decode(y, iterations, schedule)


def expected_combinations(spec: LatticeSpec, plan: CoefficientPlan, states: Sequence[SourceState]) -> list[np.ndarray]:
    """Per-layer message of sum_l a~^i_l w^i_l, the target of every decoder."""
    out = []
    for i, layer in enumerate(spec.layers):
        stacked = np.stack([state.messages[i] for state in states])
        out.append(layer.code.combine_messages(stacked, plan[i].integer))
    return out

