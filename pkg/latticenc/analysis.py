"""
Information-theoretic evaluation of layered lattice network coding.

* :func:`computation_rate` - per-layer computation rates at the MMSE scaling
* :func:`union_bound` - per-layer union bound on the error probability of the LIF decoder
* :func:`mutual_information` - Monte Carlo I(Y; V^A | V^C) for any target and conditioning layer sets
* :func:`exit_curve` - extrinsic information transfer characteristic of the layered soft detector

Monte Carlo estimates use fixed-size batches seeded from (seed, batch) and report batch-mean errors.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from latticenc.edc_lattice import LatticeSpec, Scope, coset_figures
from latticenc.eisenstein import EisensteinInt
from latticenc.exceptions import DecoderError
from latticenc.mlnc import (
    LLR_FLOOR,
    CoefficientPlan,
    TupleModel,
    effective_noise_variance,
    mmse_variance,
    noise_for_snr,
    sample_dither,
)
from latticenc.models import ChannelConfig, ExitPoint, MiEstimate, RateReport
from latticenc.tracing import SpanType, observe

logger = logging.getLogger(__name__)

MI_BATCHES = 30
EXIT_GRID_POINTS = 21
EXIT_SAMPLES = 20_000
APRIORI_SAMPLES = 20_000
BISECTION_TOL = 1e-4
BISECTION_STEPS = 60


# ---------------------------------------------------------------------------
# Computation rates and the union bound
# ---------------------------------------------------------------------------


@observe(span_name="computation_rate")
def computation_rate(
    h,
    coefficients: Sequence[Sequence[EisensteinInt | int]],
    power: float | Sequence[float],
    noise_variance: float,
) -> RateReport:
    """Per-layer log2(1 / (||a||^2 - P |h^H a|^2 / (1 + P ||h||^2))) with P the layer SNR P^i / N0.

    Terms are clamped at 0; a vanishing effective noise is reported as an infinite rate.
    """
    h = np.asarray(h, dtype=np.complex128)
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    powers = [float(power)] * len(coefficients) if np.isscalar(power) else [float(p) for p in power]
    if len(powers) != len(coefficients):
        raise ValueError(f"{len(powers)} layer powers for {len(coefficients)} coefficient vectors")

    rates, clamped = [], []
    for i, (vector, p) in enumerate(zip(coefficients, powers)):
        vector = [EisensteinInt.coerce(c) for c in vector]
        if len(vector) != len(h):
            raise ValueError(f"layer {i} has {len(vector)} coefficients for {len(h)} sources")
        if all(c.is_zero() for c in vector):
            raise ValueError(f"layer {i} coefficient vector is all zero")
        variance = mmse_variance(h, vector, p / noise_variance)
        if variance <= 0:
            logger.warning("layer %d: effective noise vanishes, rate reported as infinite", i)
            rates.append(math.inf)
            clamped.append(False)
            continue
        term = -math.log2(variance)
        if term < 0:
            logger.debug("layer %d: rate term %.4f clamped at 0", i, term)
        rates.append(max(term, 0.0))
        clamped.append(term < 0)

    return RateReport(
        gains=list(h),
        coefficients=[[str(EisensteinInt.coerce(c)) for c in vector] for vector in coefficients],
        power=powers,
        noise_variance=noise_variance,
        layer_rates=rates,
        clamped=clamped,
        total=float(sum(rates)),
    )


class UnionBound(NamedTuple):
    layer_bounds: tuple[float, ...]
    weights: tuple[float, ...]
    expectation: float


def union_bound(
    h,
    plan: CoefficientPlan,
    spec: LatticeSpec,
    noise_variance: float,
    power: float | Sequence[float],
    figures: Sequence[tuple[float, float]] | None = None,
) -> UnionBound:
    """N exp(-d^2 / (4 (N0 |alpha|^2 + P ||alpha h - a||^2))) per layer over Lambda / Lambda_i'.

    ``figures`` supplies (d^2, kissing) per layer; otherwise they are enumerated exhaustively.
    The expectation weights each layer by its share k_i / sum_j k_j of the message symbols.
    """
    powers = [float(power)] * spec.num_layers if np.isscalar(power) else [float(p) for p in power]
    if figures is None:
        figures = [coset_figures(spec, Scope("lif", i)) for i in range(spec.num_layers)]
    bounds = []
    for i, ((d2, kissing), p) in enumerate(zip(figures, powers)):
        layer = plan[i]
        variance = effective_noise_variance(layer.alpha, h, layer.integer, p, noise_variance)
        if variance <= 0:
            bounds.append(0.0)
            continue
        bounds.append(float(kissing * math.exp(-d2 / (4.0 * variance))))
    dims = np.array([layer.code.k for layer in spec.layers], dtype=np.float64)
    weights = dims / dims.sum()
    return UnionBound(tuple(bounds), tuple(weights), float(np.dot(weights, bounds)))


# ---------------------------------------------------------------------------
# Mutual information
# ---------------------------------------------------------------------------


def _default_coefficients(spec: LatticeSpec, num_sources: int) -> list[np.ndarray]:
    return [np.full(num_sources, layer.modulus.ring().one, dtype=np.int64) for layer in spec.layers]


def _batch_sizes(samples: int, batches: int) -> list[int]:
    base, extra = divmod(samples, batches)
    return [base + (1 if b < extra else 0) for b in range(batches) if base + (1 if b < extra else 0) > 0]


def _batch_stats(means: list[float]) -> tuple[float, float]:
    values = np.asarray(means)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


@observe(span_name="mutual_information", type=SpanType.SWEEP)
def mutual_information(
    spec: LatticeSpec,
    target: int | Sequence[int],
    conditioning: Sequence[int],
    channel: ChannelConfig,
    samples: int,
    *,
    coefficients: Sequence[np.ndarray] | None = None,
    seed: int = 0,
    batches: int = MI_BATCHES,
    dithered: bool = True,
    snr_db: float | None = None,
) -> MiEstimate:
    """Monte Carlo estimate of I(Y, H; V^target | V^conditioning) in bits.

    The channel must carry a noise variance; Rayleigh gains are drawn per sample and known at the
    receiver. Without ``coefficients`` every layer combines the sources with unit coefficients.
    """
    if samples <= 0:
        raise ValueError("mutual information needs at least one sample")
    if channel.noise_variance is None:
        raise ValueError("channel has no noise variance")
    target = [target] if isinstance(target, int) else list(target)
    conditioning = list(conditioning)
    for j in target + conditioning:
        spec.check_layer(j)
    if set(target) & set(conditioning):
        raise ValueError("target and conditioning layers overlap")

    coefficients = coefficients or _default_coefficients(spec, channel.num_sources)
    model = TupleModel(spec, channel.num_sources, coefficients)
    means, total = [], 0
    for b, size in enumerate(_batch_sizes(samples, batches)):
        rng = np.random.default_rng([seed, b])
        gains = channel.sample_gains(rng, size)
        info = model.sample_information(target, conditioning, gains, channel.noise_variance, rng, size, dithered)
        means.append(float(info.mean()))
        total += size
    value, std_error = _batch_stats(means)
    ceiling = sum(math.log2(model.orders[j]) for j in target)
    return MiEstimate(
        value=min(max(value, 0.0), ceiling),
        std_error=std_error,
        samples=total,
        target=target,
        conditioning=conditioning,
        snr_db=snr_db,
    )


# ---------------------------------------------------------------------------
# EXIT characteristics
# ---------------------------------------------------------------------------


def gaussian_apriori(truth: np.ndarray, q: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """L-values sigma^2 [v = truth] + sigma z_v relative to v = 0, shape (len(truth), q).

    These are the exact log-likelihoods of observing sigma e_truth + z with z standard Gaussian.
    """
    scores = sigma * rng.standard_normal((len(truth), q))
    scores[np.arange(len(truth)), truth] += sigma**2
    return scores - scores[:, :1]


def genie_apriori(truth: np.ndarray, q: int) -> np.ndarray:
    scores = np.full((len(truth), q), LLR_FLOOR)
    scores[np.arange(len(truth)), truth] = 0.0
    return scores - scores[:, :1]


def apriori_information(q: int, sigma: float, samples: int = APRIORI_SAMPLES, seed: int = 0) -> float:
    """Average mutual information (bits) between a uniform symbol and its Gaussian a-priori L-values."""
    if sigma == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    truth = rng.integers(q, size=samples)
    scores = gaussian_apriori(truth, q, sigma, rng)
    own = scores[np.arange(samples), truth]
    spread = np.log(np.exp(scores - own[:, None]).sum(axis=1))
    return float(math.log2(q) - spread.mean() / math.log(2.0))


def apriori_sigma(q: int, target: float, seed: int = 0) -> float:
    """sigma whose a-priori information is ``target`` bits, by bisection."""
    ceiling = math.log2(q)
    if not 0.0 <= target <= ceiling:
        raise ValueError(f"a-priori information {target} outside [0, {ceiling}]")
    if target == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while apriori_information(q, hi, seed=seed) < target:
        hi *= 2.0
        if hi > 64.0:
            raise DecoderError(f"could not bracket a-priori information {target:.4f} bits")
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        value = apriori_information(q, mid, seed=seed)
        if abs(value - target) < BISECTION_TOL:
            return mid
        if value < target:
            lo = mid
        else:
            hi = mid
    logger.warning("a-priori bisection for %.4f bits stopped at sigma=%.4f without converging", target, hi)
    return hi


@observe(span_name="exit_curve", type=SpanType.SWEEP)
def exit_curve(
    spec: LatticeSpec,
    layer: int,
    snr_db: float,
    apriori_grid: Sequence[float] | None = None,
    samples: int = EXIT_SAMPLES,
    *,
    channel: ChannelConfig | None = None,
    coefficients: Sequence[np.ndarray] | None = None,
    seed: int = 0,
    batches: int = MI_BATCHES,
    snr_offset_db: float = 0.0,
) -> list[ExitPoint]:
    """I_E(I_A) of the soft detector for ``layer``; every other layer receives a-priori at I_A bits.

    The top grid point log2 q of the other layers uses genie a-priori knowledge.
    """
    spec.check_layer(layer)
    if samples <= 0:
        raise ValueError("an EXIT point needs at least one sample")
    channel = channel or ChannelConfig()
    channel = channel.with_noise(noise_for_snr(spec.varpi, snr_db, snr_offset_db))
    coefficients = coefficients or _default_coefficients(spec, channel.num_sources)
    model = TupleModel(spec, channel.num_sources, coefficients)
    others = [j for j in range(spec.num_layers) if j != layer]
    ceiling = min((math.log2(model.orders[j]) for j in others), default=0.0)
    if apriori_grid is None:
        apriori_grid = list(np.linspace(0.0, ceiling, EXIT_GRID_POINTS))

    q = model.orders[layer]
    prior = model.class_log_prior(layer)
    entropy = float(-np.sum(np.exp(prior[np.isfinite(prior)]) * prior[np.isfinite(prior)]) / math.log(2.0))
    points = []
    for target in apriori_grid:
        if target < 0 or target > ceiling + 1e-9:
            raise ValueError(f"a-priori information {target} outside [0, {ceiling}]")
        genie = target >= ceiling - 1e-9
        sigmas = {j: None if genie else apriori_sigma(model.orders[j], min(target, ceiling), seed) for j in others}

        means = []
        for b, size in enumerate(_batch_sizes(samples, batches)):
            rng = np.random.default_rng([seed, b])
            gains = channel.sample_gains(rng, size)
            truth = rng.integers(model.size, size=size)
            dithers = sample_dither((size, channel.num_sources), spec.varpi, rng)
            mu = model.means(gains, dithers)
            noise = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            y = mu[np.arange(size), truth] + math.sqrt(channel.noise_variance / 2.0) * noise
            ll = -np.abs(y[:, None] - mu) ** 2 / channel.noise_variance

            apriori = {}
            for j in others:
                symbols = model.combos[truth, j]
                if genie:
                    apriori[j] = genie_apriori(symbols, model.orders[j])
                else:
                    apriori[j] = gaussian_apriori(symbols, model.orders[j], sigmas[j], rng)
            lp = model.log_prior(apriori, exclude=layer, rows=size)
            extrinsic = model.extrinsic(ll, lp, layer)
            logpost = extrinsic + prior
            logpost -= np.logaddexp.reduce(logpost, axis=1, keepdims=True)
            own = logpost[np.arange(size), model.combos[truth, layer]]
            means.append(entropy + float(own.mean()) / math.log(2.0))
        i_e, std_error = _batch_stats(means)
        i_e = min(max(i_e, 0.0), math.log2(q))
        i_a = ceiling if genie else float(target)
        points.append(
            ExitPoint(
                layer=layer,
                snr_db=snr_db,
                i_a=i_a,
                i_e=i_e,
                i_a_normalized=i_a / ceiling if ceiling else 0.0,
                i_e_normalized=i_e / math.log2(q),
                std_error=std_error,
            )
        )
        logger.debug("EXIT layer %d at %.1f dB: I_A=%.3f I_E=%.3f", layer, snr_db, i_a, i_e)
    return points
