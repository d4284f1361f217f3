"""
Command-line front end: ``latticenc <simulate|exit-chart|rates|coding-gain|factor|selftest>``.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime.
"""

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from latticenc import tracing
from latticenc.analysis import EXIT_GRID_POINTS, EXIT_SAMPLES, computation_rate, exit_curve, mutual_information
from latticenc.edc_lattice import LatticeSpec, Scope, brute_force_figures, coding_gain
from latticenc.eisenstein import factor, parse
from latticenc.exceptions import EnumerationBoundError, LatticeConfigError, LatticeError
from latticenc.mlnc import average_power, noise_for_snr
from latticenc.models import load_experiment
from latticenc.selftest import SUITES, desk_spec, run_selftest
from latticenc.simulation import FrameSimulator, run_experiment, save_results
from latticenc.utils.results_io import write_csv
from latticenc.utils.settings import get_tracing_settings

logger = logging.getLogger("latticenc")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

console = Console()


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _simulate(args) -> int:
    config = load_experiment(args.config)
    rows = run_experiment(config, workers=args.workers, progress=not args.quiet)
    output = Path(args.output) if args.output else Path("results") / f"{config.name}.csv"
    path = save_results(config, rows, output)

    table = Table(title=f"{config.name} ({len(rows)} rows)")
    for column in ("SNR (dB)", "decoder", "layer", "SER", "FER", "frames"):
        table.add_column(column)
    for row in rows:
        table.add_row(f"{row.snr_db:g}", row.decoder, row.layer, f"{row.ser:.3e}", f"{row.fer:.3e}", str(row.frames))
    console.print(table)
    console.print(f"results written to {path}")
    return EXIT_OK


def _exit_chart(args) -> int:
    config = load_experiment(args.config)
    spec = config.lattice.spec
    layers = [args.layer] if args.layer is not None else list(range(spec.num_layers))
    points = []
    for layer in layers:
        spec.check_layer(layer)
        others = [math.log2(other.modulus.cardinality) for j, other in enumerate(spec.layers) if j != layer]
        grid = list(np.linspace(0.0, min(others, default=0.0), args.points))
        points.extend(
            exit_curve(
                spec,
                layer,
                args.snr,
                grid,
                args.samples,
                channel=config.channel,
                seed=config.seed,
                snr_offset_db=config.snr_offset_db,
            )
        )

    table = Table(title=f"EXIT at {args.snr:g} dB")
    for column in ("layer", "I_A", "I_E", "I_E / log2 q", "std error"):
        table.add_column(column)
    for p in points:
        table.add_row(str(p.layer), f"{p.i_a:.4f}", f"{p.i_e:.4f}", f"{p.i_e_normalized:.4f}", f"{p.std_error:.1e}")
    console.print(table)
    if args.output:
        console.print(f"written to {write_csv(args.output, points)}")
    return EXIT_OK


def _rates(args) -> int:
    config = load_experiment(args.config)
    spec = config.lattice.spec
    simulator = FrameSimulator(config, spec)
    power = average_power(spec.varpi)
    grid = args.snr or config.snr_db
    all_layers = list(range(spec.num_layers))
    rows = []
    for snr_db in grid:
        channel = config.channel.with_noise(noise_for_snr(spec.varpi, snr_db, config.snr_offset_db))
        gains = channel.draw_gains(np.random.default_rng(config.seed))
        plan = simulator.plan(gains, channel.noise_variance)
        report = computation_rate(gains, [layer.integer for layer in plan.layers], power, channel.noise_variance)
        common = dict(seed=config.seed, dithered=config.dithered, snr_db=snr_db)
        joint = mutual_information(spec, all_layers, [], channel, args.samples, **common)
        for i in all_layers:
            others = [j for j in all_layers if j != i]
            marginal = mutual_information(spec, i, [], channel, args.samples, **common)
            conditional = mutual_information(spec, i, others, channel, args.samples, **common)
            rows.append({
                "snr_db": snr_db,
                "layer": i,
                "coefficients": report.coefficients[i],
                "computation_rate": report.layer_rates[i],
                "clamped": report.clamped[i],
                "mi": marginal.value,
                "mi_std_error": marginal.std_error,
                "mi_conditional": conditional.value,
                "mi_conditional_std_error": conditional.std_error,
                "mi_joint": joint.value,
            })

    table = Table(title="computation rates and mutual information (bits)")
    for column in ("SNR (dB)", "layer", "a", "rate", "I(Y;V)", "I(Y;V|rest)", "I(Y;all)"):
        table.add_column(column)
    for row in rows:
        table.add_row(
            f"{row['snr_db']:g}",
            str(row["layer"]),
            ",".join(row["coefficients"]),
            f"{row['computation_rate']:.3f}" + (" (clamped)" if row["clamped"] else ""),
            f"{row['mi']:.3f} ± {row['mi_std_error']:.3f}",
            f"{row['mi_conditional']:.3f} ± {row['mi_conditional_std_error']:.3f}",
            f"{row['mi_joint']:.3f}",
        )
    console.print(table)
    if args.output:
        console.print(f"written to {write_csv(args.output, rows)}")
    return EXIT_OK


def _scopes(spec: LatticeSpec) -> list[Scope]:
    scopes = [Scope("primary", i) for i in range(spec.num_layers)]
    scopes += [Scope("lif", i) for i in range(spec.num_layers)]
    return scopes + [Scope("full")]


def _coding_gain(args) -> int:
    spec = load_experiment(args.config).lattice.spec if args.config else desk_spec()
    table = Table(title=f"figures of merit, varpi={spec.varpi}, n={spec.n}, rate {spec.message_rate():.3f} bits/dim")
    for column in ("scope", "d^2", "kissing", "gain (dB)", "closed form", "oracle gain (dB)"):
        table.add_column(column)
    for scope in _scopes(spec):
        try:
            oracle = brute_force_figures(spec, scope)
        except EnumerationBoundError as e:
            logger.info("%s: oracle skipped (%s)", scope, e)
            oracle = None
        closed = None
        if scope.kind != "lif":
            try:
                closed = coding_gain(spec, scope)
            except EnumerationBoundError as e:
                logger.info("%s: closed form skipped (%s)", scope, e)
        shown = closed or oracle
        if shown is None:
            table.add_row(str(scope), "-", "-", "-", "over bound", "-")
            continue
        flag = "-" if closed is None else ("exact" if closed.exact else "bound")
        table.add_row(
            str(scope),
            f"{shown.d2:g}",
            f"{shown.kissing:g}",
            f"{shown.gain_db:.3f}",
            flag,
            "-" if oracle is None else f"{oracle.gain_db:.3f}",
        )
    console.print(table)
    return EXIT_OK


def _factor(args) -> int:
    try:
        value = parse(args.value)
    except ValueError as e:
        print(f"latticenc factor: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(factor(value))
    return EXIT_OK


def _selftest(args) -> int:
    report = run_selftest(args.suite or None)
    table = Table(title="selftest")
    for column in ("suite", "passed", "failed"):
        table.add_column(column)
    for suite, (passed, failed) in report.by_suite().items():
        table.add_row(suite, str(passed), str(failed), style="red" if failed else None)
    console.print(table)
    for check in report.checks:
        if not check.passed:
            console.print(f"[red]FAIL[/red] {check.suite}: {check.name} {check.detail}")
    console.print(f"{report.passed} passed, {report.failed} failed")
    return EXIT_OK if report.failed == 0 else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticenc", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--otlp-endpoint", help="export spans over OTLP/HTTP (or set LATTICENC_OTLP_ENDPOINT)")
    sub = parser.add_subparsers(dest="command", metavar="command")

    simulate = sub.add_parser("simulate", help="Monte Carlo SER/FER over an SNR grid")
    simulate.add_argument("--config", required=True, help="experiment YAML file")
    simulate.add_argument("--output", help="CSV path (default results/<name>.csv)")
    simulate.add_argument("--workers", type=int, help="worker threads (or LATTICENC_WORKERS)")
    simulate.add_argument("-q", "--quiet", action="store_true", help="no progress bar")
    simulate.set_defaults(handler=_simulate)

    chart = sub.add_parser("exit-chart", help="EXIT characteristic of the soft detector")
    chart.add_argument("--config", required=True)
    chart.add_argument("--snr", type=float, required=True, help="SNR in dB")
    chart.add_argument("--layer", type=int, help="layer index (default: every layer)")
    chart.add_argument("--points", type=int, default=EXIT_GRID_POINTS)
    chart.add_argument("--samples", type=int, default=EXIT_SAMPLES)
    chart.add_argument("--output", help="CSV path")
    chart.set_defaults(handler=_exit_chart)

    rates = sub.add_parser("rates", help="computation rates and mutual information per layer")
    rates.add_argument("--config", required=True)
    rates.add_argument("--snr", type=float, nargs="+", help="SNR grid in dB (default: the config grid)")
    rates.add_argument("--samples", type=int, default=30_000)
    rates.add_argument("--output", help="CSV path")
    rates.set_defaults(handler=_rates)

    gain = sub.add_parser("coding-gain", help="nominal coding gains and kissing numbers")
    gain.add_argument("--config", help="experiment YAML file (default: the 2+4w desk lattice)")
    gain.set_defaults(handler=_coding_gain)

    fac = sub.add_parser("factor", help="factor an Eisenstein integer such as 2+4w")
    fac.add_argument("value")
    fac.set_defaults(handler=_factor)

    test = sub.add_parser("selftest", help="exhaustive desk-scale oracle checks")
    test.add_argument("--suite", action="append", choices=list(SUITES), help="run only this suite (repeatable)")
    test.set_defaults(handler=_selftest)
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=verbose)],
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    _configure_logging(args.verbose)
    endpoint, _, _ = get_tracing_settings(args.otlp_endpoint)
    if endpoint is not None:
        tracing.init(endpoint)

    try:
        return args.handler(args)
    except LatticeConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except (LatticeError, ValueError, ArithmeticError) as e:
        logger.error("%s: %s", type(e).__name__, e, exc_info=args.verbose)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
