"""
Monte Carlo harness for the layered decoders.

Every frame draws its gains, messages, dithers and noise from ``default_rng([seed, snr_index, frame])``,
and all configured decoders decode the same received frame. Frames run in fixed-size batches on a
thread pool; counts are summed per batch, so the results do not depend on the worker count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from latticenc.edc_lattice import LatticeSpec
from latticenc.eisenstein import parse
from latticenc.mlnc import (
    CoefficientPlan,
    LayerDecision,
    LayeredDecoder,
    average_power,
    choose_coefficients,
    expected_combinations,
    mac_output,
    noise_for_snr,
    transmit,
)
from latticenc.models import ChannelConfig, CoefficientMethod, ExperimentConfig, Fading, ResultRow
from latticenc.tracing import SpanType, observe, set_tag, start_span
from latticenc.utils.frame_trace import FrameTraceWriter
from latticenc.utils.results_io import write_csv, write_metadata
from latticenc.utils.settings import get_worker_count

logger = logging.getLogger(__name__)

OVERALL = "overall"


def frame_rng(seed: int, snr_index: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, snr_index, frame_index])


@dataclass
class ErrorCounts:
    frames: int = 0
    symbols: int = 0
    symbol_errors: int = 0
    frame_errors: int = 0

    def add(self, symbols: int, errors: int) -> None:
        self.frames += 1
        self.symbols += symbols
        self.symbol_errors += errors
        self.frame_errors += int(errors > 0)

    def row(self, snr_db: float, decoder: str, layer: str, wall_time: float = 0.0) -> ResultRow:
        return ResultRow(
            snr_db=snr_db,
            decoder=decoder,
            layer=layer,
            ser=self.symbol_errors / self.symbols if self.symbols else 0.0,
            fer=self.frame_errors / self.frames if self.frames else 0.0,
            frames=self.frames,
            symbols=self.symbols,
            symbol_errors=self.symbol_errors,
            frame_errors=self.frame_errors,
            wall_time=wall_time,
        )


def frame_errors(spec: LatticeSpec, decisions: list[LayerDecision], targets: list[np.ndarray]) -> np.ndarray:
    """(symbols, errors) per layer plus an overall row.

    Layer rows count message symbols. The overall row counts coordinate positions where any layer's
    decided codeword differs from the codeword of its target combination.
    """
    rows = []
    wrong_positions = np.zeros(spec.n, dtype=bool)
    for layer, decision, target in zip(spec.layers, decisions, targets):
        rows.append((target.size, int(np.count_nonzero(decision.message != target))))
        wrong_positions |= decision.codeword != layer.code.encode(target)
    rows.append((spec.n, int(np.count_nonzero(wrong_positions))))
    return np.asarray(rows, dtype=np.int64)


class FrameSimulator:
    """Runs single frames of one experiment at a fixed noise level."""

    def __init__(self, config: ExperimentConfig, spec: LatticeSpec, trace: FrameTraceWriter | None = None):
        self.config = config
        self.spec = spec
        self.power = average_power(spec.varpi)
        self.trace = trace

    def plan(self, gains: np.ndarray, noise_variance: float) -> CoefficientPlan:
        coefficients = self.config.coefficients
        if coefficients.method is CoefficientMethod.FIXED:
            integers = [[parse(v) for v in row] for row in coefficients.vectors]
            return CoefficientPlan.from_integers(self.spec, integers, gains, self.power, noise_variance)
        return choose_coefficients(
            gains, self.spec, self.power, noise_variance, coefficients.method.value, coefficients.norm_bound
        )

    def static_plan(self, channel: ChannelConfig) -> CoefficientPlan | None:
        """The plan shared by every frame when the gains do not change between frames."""
        if channel.fading is Fading.RAYLEIGH:
            return None
        return self.plan(channel.draw_gains(np.random.default_rng(0)), channel.noise_variance)

    def run_frame(
        self,
        channel: ChannelConfig,
        snr_index: int,
        frame_index: int,
        plan: CoefficientPlan | None = None,
    ) -> dict[str, np.ndarray]:
        """Error counts (layers + 1, 2) per decoder label for one frame."""
        spec, config = self.spec, self.config
        rng = frame_rng(config.seed, snr_index, frame_index)
        gains = channel.draw_gains(rng)
        if plan is None:
            plan = self.plan(gains, channel.noise_variance)

        states = []
        for _ in range(channel.num_sources):
            messages = [rng.integers(0, np.asarray(layer.code.message_orders)) for layer in spec.layers]
            dither = None if config.dithered else np.zeros(spec.n, dtype=np.complex128)
            states.append(transmit(spec, messages, dither=dither, rng=rng))
        y = mac_output(states, channel, rng, gains)
        targets = expected_combinations(spec, plan, states)

        dithers = np.stack([state.dither for state in states])
        decoder = LayeredDecoder(spec, plan, gains, channel.noise_variance, dithers)
        counts = {}
        for decoder_config in config.decoders:
            label = decoder_config.label
            if self.trace is not None:
                decoder.trace = self.trace.bind(snr_index=snr_index, frame=frame_index, decoder=label)
            decisions = decoder.decode(y, decoder_config.mode, decoder_config.iterations, decoder_config.schedule)
            counts[label] = frame_errors(spec, decisions, targets)
        return counts


def _stop(totals: dict[str, list[ErrorCounts]], frames: int, config: ExperimentConfig) -> bool:
    rule = config.stop
    if frames >= rule.max_frames:
        return True
    if frames < rule.min_frames:
        return False
    return all(counts[-1].frame_errors >= rule.min_frame_errors for counts in totals.values())


def run_snr_point(
    simulator: FrameSimulator,
    snr_index: int,
    snr_db: float,
    executor: ThreadPoolExecutor,
) -> list[ResultRow]:
    config, spec = simulator.config, simulator.spec
    if config.channel.noise_variance is not None:
        channel = config.channel
    else:
        channel = config.channel.with_noise(noise_for_snr(spec.varpi, snr_db, config.snr_offset_db))
    plan = simulator.static_plan(channel)
    totals = {d.label: [ErrorCounts() for _ in range(spec.num_layers + 1)] for d in config.decoders}

    start = time.perf_counter()
    frames = 0
    while not _stop(totals, frames, config):
        size = min(config.stop.batch_size, config.stop.max_frames - frames)
        batch = executor.map(
            lambda f: simulator.run_frame(channel, snr_index, f, plan), range(frames, frames + size)
        )
        for counts in batch:
            for label, rows in counts.items():
                for tally, (symbols, errors) in zip(totals[label], rows):
                    tally.add(int(symbols), int(errors))
        frames += size
    wall_time = time.perf_counter() - start

    layers = [str(i) for i in range(spec.num_layers)] + [OVERALL]
    rows = [
        tally.row(snr_db, label, layer, wall_time)
        for label, tallies in totals.items()
        for layer, tally in zip(layers, tallies)
    ]
    for label, tallies in totals.items():
        logger.info(
            "%.2f dB %s: %d frames, SER %.3e, FER %.3e",
            snr_db,
            label,
            frames,
            tallies[-1].symbol_errors / max(tallies[-1].symbols, 1),
            tallies[-1].frame_errors / max(frames, 1),
        )
    return rows


@observe(span_name="run_experiment", type=SpanType.EXPERIMENT)
def run_experiment(config: ExperimentConfig, workers: int | None = None, progress: bool = False) -> list[ResultRow]:
    """Simulate every SNR point of ``config``; rows are ordered by SNR, decoder, then layer."""
    spec = config.lattice.spec
    workers = get_worker_count(workers)
    if not config.snr_db:
        logger.info("experiment '%s' has an empty SNR grid", config.name)
        return []
    logger.info(
        "experiment '%s': n=%d, %d layers, rate %.3f bits/dim, %d workers",
        config.name,
        spec.n,
        spec.num_layers,
        spec.message_rate(),
        workers,
    )

    trace = FrameTraceWriter(config.trace_path) if config.trace_path else None
    simulator = FrameSimulator(config, spec, trace)
    rows: list[ResultRow] = []
    try:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            for snr_index, snr_db in enumerate(tqdm(config.snr_db, desc=config.name, disable=not progress)):
                with start_span("snr_point", SpanType.SNR_POINT, {"snr_db": snr_db}):
                    point = run_snr_point(simulator, snr_index, snr_db, executor)
                    set_tag("frames", point[0].frames)
                rows.extend(point)
    finally:
        if trace is not None:
            trace.close()
    return rows


def save_results(config: ExperimentConfig, rows: list[ResultRow], path: str | Path) -> Path:
    """CSV of ``rows`` plus the metadata sidecar; wall time goes to the sidecar only."""
    path = write_csv(path, rows, fieldnames=[f for f in ResultRow.model_fields if f != "wall_time"])
    write_metadata(
        path,
        config_hash=config.config_hash(),
        seed=config.seed,
        experiment=config.name,
        wall_time={f"{row.snr_db}": row.wall_time for row in rows},
    )
    return path
