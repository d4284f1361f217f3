"""
latticenc

Multilevel lattice network coding over the Eisenstein integers: EDC lattices, layered integer
forcing and soft-detection decoders, and their information-theoretic analysis.
"""

from .analysis import computation_rate, exit_curve, mutual_information, union_bound
from .edc_lattice import LatticeSpec, Scope, brute_force_figures, coding_gain, kissing_number
from .eisenstein import EisensteinInt, factor, parse, quantize
from .exceptions import (
    DecoderError,
    EisensteinOverflowError,
    EnumerationBoundError,
    InvalidModulusError,
    LatticeConfigError,
    LatticeError,
    NotACodewordError,
    NotInLatticeError,
)
from .mlnc import LayeredDecoder, choose_coefficients, lif_decode, mac_output, transmit
from .models import ExperimentConfig, load_experiment
from .residue import CrtSystem, Modulus
from .simulation import run_experiment
from .tracing import SpanType, capture_exception, get_tracer, init, observe, set_tag, start_span

__version__ = "0.1.0"
__all__ = [
    "CrtSystem",
    "DecoderError",
    "EisensteinInt",
    "EisensteinOverflowError",
    "EnumerationBoundError",
    "ExperimentConfig",
    "InvalidModulusError",
    "LatticeConfigError",
    "LatticeError",
    "LatticeSpec",
    "LayeredDecoder",
    "Modulus",
    "NotACodewordError",
    "NotInLatticeError",
    "Scope",
    "SpanType",
    "brute_force_figures",
    "capture_exception",
    "choose_coefficients",
    "coding_gain",
    "computation_rate",
    "exit_curve",
    "factor",
    "get_tracer",
    "init",
    "kissing_number",
    "lif_decode",
    "load_experiment",
    "mac_output",
    "mutual_information",
    "observe",
    "parse",
    "quantize",
    "run_experiment",
    "set_tag",
    "start_span",
    "transmit",
    "union_bound",
]
