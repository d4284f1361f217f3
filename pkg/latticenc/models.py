"""
Pydantic models for latticenc experiment configs and results.
"""

import hashlib
import io
import logging
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from rich.console import Console

from latticenc.codes import BlockCode, LinearCode, NestedBlockCode
from latticenc.convcode import ConvCodeSpec, ConvolutionalCode
from latticenc.edc_lattice import LatticeSpec
from latticenc.eisenstein import parse
from latticenc.exceptions import LatticeConfigError, LatticeError
from latticenc.residue import CrtSystem, Modulus

logger = logging.getLogger(__name__)


class ReadableBaseModel(BaseModel):
    """Base model with a rich-formatted __repr__ for terminals and notebooks."""

    def __repr__(self) -> str:
        string_buffer = io.StringIO()
        console = Console(file=string_buffer, force_terminal=True)
        console.print(self)
        return string_buffer.getvalue()


def parse_complex(value: Any) -> complex:
    """Complex gain from a number, a [re, im] pair or text such as "1.25-1.63i"."""
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        text = value.replace(" ", "").replace("i", "j")
        try:
            return complex(text)
        except ValueError:
            raise ValueError(f"cannot parse complex gain '{value}'") from None
    raise ValueError(f"cannot parse complex gain {value!r}")


# ---------------------------------------------------------------------------
# Lattice and code configuration
# ---------------------------------------------------------------------------


class CodeKind(str, Enum):
    TABLE = "table"
    RATE_THREE_QUARTERS = "rate-3/4"
    CONVOLUTIONAL = "convolutional"
    REPETITION = "repetition"
    FULL = "full"
    ZERO = "zero"
    BLOCK = "block"
    NESTED = "nested"


CONVOLUTIONAL_KINDS = {CodeKind.TABLE, CodeKind.RATE_THREE_QUARTERS, CodeKind.CONVOLUTIONAL}


class NestedBlockConfig(ReadableBaseModel):
    shift: int = Field(..., ge=0, description="Digit level t of the block rows p^t [I | B]")
    parity: list[list[str]] = Field(..., description="Parity matrix B as Eisenstein integers")


class CodeConfig(ReadableBaseModel):
    """One layer code. Convolutional kinds derive their trellis length from the frame length."""

    kind: CodeKind = CodeKind.TABLE
    taps: list[list[list[str]]] | None = Field(None, description="taps[j][r][d] for kind 'convolutional'")
    terminated: bool = True
    length: int | None = Field(None, ge=1, description="Block length for block kinds in the first layer")
    parity: list[list[str]] | None = Field(None, description="Parity matrix for kind 'block'")
    blocks: list[NestedBlockConfig] | None = Field(None, description="Digit blocks for kind 'nested'")

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "CodeConfig":
        if self.kind is CodeKind.CONVOLUTIONAL and not self.taps:
            raise ValueError("kind 'convolutional' needs taps")
        if self.kind is CodeKind.BLOCK and self.parity is None:
            raise ValueError("kind 'block' needs a parity matrix")
        if self.kind is CodeKind.NESTED and not self.blocks:
            raise ValueError("kind 'nested' needs blocks")
        return self

    def _conv_spec(self, modulus: Modulus) -> ConvCodeSpec:
        if self.kind is CodeKind.TABLE:
            return ConvCodeSpec.table(modulus, terminated=self.terminated)
        if self.kind is CodeKind.RATE_THREE_QUARTERS:
            return ConvCodeSpec.rate_three_quarters(modulus, terminated=self.terminated)
        return ConvCodeSpec(modulus, self.taps, terminated=self.terminated)

    def _matrix(self, modulus: Modulus, rows: list[list[str]]) -> np.ndarray:
        ring = modulus.ring()
        return np.array([[ring.reduce(parse(v)) for v in row] for row in rows], dtype=np.int64).reshape(len(rows), -1)

    def block_length(self) -> int | None:
        if self.length is not None:
            return self.length
        if self.kind is CodeKind.BLOCK:
            return len(self.parity) + (len(self.parity[0]) if self.parity else 0)
        return None

    def build(self, modulus: Modulus, n: int | None, info_steps: int) -> LinearCode:
        """The layer code; ``n`` is None only for the layer that fixes the frame length."""
        if self.kind in CONVOLUTIONAL_KINDS:
            spec = self._conv_spec(modulus)
            if n is not None:
                steps, rest = divmod(n, spec.outputs)
                if rest:
                    raise LatticeConfigError(
                        f"frame length {n} is not a multiple of the {spec.outputs} code outputs", field="kind"
                    )
                info_steps = steps - (spec.memory if spec.terminated else 0)
                if info_steps < 1:
                    raise LatticeConfigError(f"frame length {n} leaves no information steps", field="kind")
            return ConvolutionalCode(spec, info_steps)

        length = n if n is not None else self.block_length()
        if length is None:
            raise LatticeConfigError("the first layer's block code needs a length", field="length")
        if self.length is not None and self.length != length:
            raise LatticeConfigError(
                f"block length {self.length} differs from the frame length {length}", field="length"
            )
        ring = modulus.ring()
        if self.kind is CodeKind.REPETITION:
            return BlockCode.repetition(ring, length)
        if self.kind is CodeKind.FULL:
            return BlockCode.full_space(ring, length)
        if self.kind is CodeKind.ZERO:
            return BlockCode.zero(ring, length)
        if self.kind is CodeKind.BLOCK:
            code = BlockCode(ring, self._matrix(modulus, self.parity))
            if code.n != length:
                raise LatticeConfigError(f"block code has length {code.n}, expected {length}", field="parity")
            return code
        blocks = [(block.shift, self._matrix(modulus, block.parity)) for block in self.blocks]
        return NestedBlockCode(modulus, blocks, length)


class LatticeConfig(ReadableBaseModel):
    """EDC lattice: varpi and one code per prime-power layer, layers in CRT order."""

    varpi: str = "2+4w"
    info_steps: int = Field(200, ge=1, description="Information steps of the first layer's trellis")
    layers: list[CodeConfig] = Field(default_factory=lambda: [CodeConfig(), CodeConfig()])

    @field_validator("varpi")
    @classmethod
    def _check_varpi(cls, value: str) -> str:
        parse(value)
        return value

    @cached_property
    def spec(self) -> LatticeSpec:
        return self.build()

    def build(self) -> LatticeSpec:
        try:
            crt = CrtSystem(parse(self.varpi))
        except LatticeError as e:
            raise LatticeConfigError(str(e), field="lattice.varpi") from e
        if len(self.layers) != crt.num_layers:
            raise LatticeConfigError(
                f"varpi = {self.varpi} has {crt.num_layers} layers but {len(self.layers)} codes are configured",
                field="lattice.layers",
            )
        codes: list[LinearCode] = []
        n = None
        for i, (modulus, layer) in enumerate(zip(crt.layers, self.layers)):
            try:
                code = layer.build(modulus, n, self.info_steps)
            except LatticeConfigError as e:
                raise LatticeConfigError(e.args[0], field=f"lattice.layers.{i}.{e.field or 'kind'}") from e
            except (LatticeError, ValueError, KeyError) as e:
                raise LatticeConfigError(f"layer {i} over {modulus}: {e}", field=f"lattice.layers.{i}") from e
            n = code.n
            codes.append(code)
        return LatticeSpec(crt.varpi, codes, crt)


# ---------------------------------------------------------------------------
# Channel and decoders
# ---------------------------------------------------------------------------


class Fading(str, Enum):
    UNIT = "unit"
    FIXED = "fixed"
    RAYLEIGH = "rayleigh"


class ChannelConfig(ReadableBaseModel):
    """MAC channel. Rayleigh gains are drawn once per frame."""

    fading: Fading = Fading.UNIT
    gains: list[complex] | None = None
    noise_variance: float | None = Field(None, gt=0, description="N0 per complex dimension")
    num_sources: int = Field(2, ge=1, le=3)

    @field_validator("gains", mode="before")
    @classmethod
    def _parse_gains(cls, value):
        if value is None:
            return None
        return [parse_complex(v) for v in value]

    @model_validator(mode="after")
    def _check_gains(self) -> "ChannelConfig":
        if self.fading is Fading.FIXED:
            if self.gains is None or len(self.gains) != self.num_sources:
                raise ValueError(f"fixed fading needs {self.num_sources} gains")
            if not np.all(np.isfinite(np.asarray(self.gains))):
                raise ValueError("channel gains must be finite")
        return self

    def draw_gains(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_gains(rng, 1)[0]

    def sample_gains(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Gains of shape (count, L)."""
        shape = (count, self.num_sources)
        if self.fading is Fading.UNIT:
            return np.ones(shape, dtype=np.complex128)
        if self.fading is Fading.FIXED:
            return np.broadcast_to(np.asarray(self.gains, dtype=np.complex128), shape).copy()
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    def with_noise(self, noise_variance: float) -> "ChannelConfig":
        if not noise_variance > 0:
            raise ValueError(f"noise variance must be positive, got {noise_variance}")
        return self.model_copy(update={"noise_variance": noise_variance})


class DecoderMode(str, Enum):
    LIF = "lif"
    MSD = "msd"
    NON_MSD = "non-msd"
    IMSD = "imsd"


class DecoderConfig(ReadableBaseModel):
    mode: DecoderMode = DecoderMode.MSD
    iterations: int = Field(1, ge=1)
    schedule: list[int] | None = None

    @model_validator(mode="after")
    def _check_iterations(self) -> "DecoderConfig":
        if self.iterations > 1 and self.mode is not DecoderMode.IMSD:
            raise ValueError(f"only imsd takes more than one iteration, got {self.iterations} for {self.mode.value}")
        return self

    @property
    def label(self) -> str:
        if self.mode is DecoderMode.IMSD:
            return f"imsd({self.iterations})"
        return self.mode.value


class CoefficientMethod(str, Enum):
    RATE = "rate"
    MI = "mi"
    FIXED = "fixed"


class CoefficientConfig(ReadableBaseModel):
    method: CoefficientMethod = CoefficientMethod.RATE
    norm_bound: int = Field(9, ge=1)
    vectors: list[list[str]] | None = Field(None, description="Per-layer integer vectors for method 'fixed'")

    @model_validator(mode="after")
    def _check_vectors(self) -> "CoefficientConfig":
        if self.method is CoefficientMethod.FIXED:
            if not self.vectors:
                raise ValueError("method 'fixed' needs coefficient vectors")
            for row in self.vectors:
                for value in row:
                    parse(value)
        return self


class StopRule(ReadableBaseModel):
    """Per SNR point: stop once every decoder has min_frame_errors and min_frames, or at max_frames."""

    min_frame_errors: int = Field(100, ge=0)
    min_frames: int = Field(1, ge=0)
    max_frames: int = Field(1_000_000, ge=1)
    batch_size: int = Field(64, ge=1)


class ExperimentConfig(ReadableBaseModel):
    name: str = "experiment"
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    decoders: list[DecoderConfig] = Field(default_factory=lambda: [DecoderConfig()])
    coefficients: CoefficientConfig = Field(default_factory=CoefficientConfig)
    snr_db: list[float] = Field(default_factory=list)
    snr_offset_db: float = 0.0
    stop: StopRule = Field(default_factory=StopRule)
    seed: int = 0
    dithered: bool = True
    trace_path: str | None = None

    @field_validator("decoders")
    @classmethod
    def _check_decoders(cls, value: list[DecoderConfig]) -> list[DecoderConfig]:
        if not value:
            raise ValueError("at least one decoder is required")
        labels = [d.label for d in value]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate decoders {labels}")
        return value

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


class ResultRow(ReadableBaseModel):
    """One decoder and layer (or "overall") at one SNR point."""

    snr_db: float
    decoder: str
    layer: str
    ser: float
    fer: float
    frames: int
    symbols: int
    symbol_errors: int
    frame_errors: int
    wall_time: float = Field(0.0, exclude=True)


class RateReport(ReadableBaseModel):
    gains: list[complex]
    coefficients: list[list[str]]
    power: list[float]
    noise_variance: float
    layer_rates: list[float]
    clamped: list[bool]
    total: float
    ring_mismatch: bool = Field(
        True, description="The rate expression is stated for Gaussian integers and evaluated here over Z[w]"
    )


class MiEstimate(ReadableBaseModel):
    value: float
    std_error: float
    samples: int
    target: list[int]
    conditioning: list[int] = Field(default_factory=list)
    snr_db: float | None = None


class ExitPoint(ReadableBaseModel):
    layer: int
    snr_db: float
    i_a: float
    i_e: float
    i_a_normalized: float
    i_e_normalized: float
    std_error: float = 0.0


# ---------------------------------------------------------------------------
# YAML loading
# ---------------------------------------------------------------------------


def _node_line(node: yaml.Node | None, loc: tuple) -> int | None:
    """1-based line of the YAML node at ``loc``, or of the deepest ancestor found."""
    line = None
    for key in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            node = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            node = None
    if node is not None:
        line = node.start_mark.line + 1
    return line


def load_experiment(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise LatticeConfigError(f"cannot read config {path}: {e}") from e
    return parse_experiment(text, source=str(path))


def parse_experiment(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate a YAML experiment config, raising LatticeConfigError with field/line detail."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise LatticeConfigError(f"invalid YAML: {e}", line=mark.line + 1 if mark else None) from e
    if not isinstance(data, dict):
        raise LatticeConfigError("an experiment config must be a mapping", line=1)

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        field = ".".join(str(p) for p in loc)
        raise LatticeConfigError(error["msg"], field=field or None, line=_node_line(root, loc)) from e

    try:
        config.lattice.spec
    except LatticeConfigError as e:
        loc = tuple(int(p) if p.isdigit() else p for p in (e.field or "lattice").split("."))
        raise LatticeConfigError(e.args[0], field=e.field, line=_node_line(root, loc)) from e
    logger.debug("loaded experiment '%s' from %s", config.name, source)
    return config
