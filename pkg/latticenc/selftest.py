"""
Exhaustive desk-scale oracle suite behind ``latticenc selftest``.

Each suite yields :class:`Check` results; an exception inside a suite is reported as one failed check
instead of aborting the run.
"""

import itertools
import logging
from collections.abc import Callable, Iterator, Sequence
from typing import NamedTuple

import numpy as np

from latticenc.codes import BlockCode, LinearCode
from latticenc.convcode import ConvCodeSpec, ConvolutionalCode
from latticenc.edc_lattice import (
    LatticeSpec,
    Scope,
    brute_force_figures,
    build_coarse_generator,
    build_fine_generator,
    coding_gain,
    coset_figures,
    phi,
    phi_tilde,
    shortest_vectors,
    varphi,
)
from latticenc.eisenstein import EisensteinInt, factor, gcd, quantize, to_complex_array
from latticenc.mlnc import (
    LayeredDecoder,
    average_power,
    choose_coefficients,
    expected_combinations,
    mac_output,
    transmit,
)
from latticenc.models import ChannelConfig, DecoderMode
from latticenc.residue import CrtSystem, Modulus

logger = logging.getLogger(__name__)

DESK_VARPI = EisensteinInt(2, 4)


class Check(NamedTuple):
    suite: str
    name: str
    passed: bool
    detail: str = ""


class SelfTestReport(NamedTuple):
    checks: tuple[Check, ...]

    @property
    def passed(self) -> int:
        return sum(c.passed for c in self.checks)

    @property
    def failed(self) -> int:
        return len(self.checks) - self.passed

    def by_suite(self) -> dict[str, tuple[int, int]]:
        """(passed, failed) per suite, in run order."""
        out: dict[str, tuple[int, int]] = {}
        for c in self.checks:
            ok, bad = out.get(c.suite, (0, 0))
            out[c.suite] = (ok + c.passed, bad + (not c.passed))
        return out


def desk_spec(layer0: str = "repetition", layer1: str = "repetition", n: int = 2) -> LatticeSpec:
    """varpi = 2+4w with one length-n block code per layer (F3 then F4)."""
    crt = CrtSystem(DESK_VARPI)
    codes = []
    for kind, modulus in zip((layer0, layer1), crt.layers):
        ring = modulus.ring()
        codes.append(BlockCode.full_space(ring, n) if kind == "full" else BlockCode.repetition(ring, n))
    return LatticeSpec(DESK_VARPI, codes, crt)


def _message_grid(spec: LatticeSpec) -> list[list[np.ndarray]]:
    per_layer = [layer.code.all_messages() for layer in spec.layers]
    return [list(combo) for combo in itertools.product(*per_layer)]


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def eisenstein_suite() -> Iterator[Check]:
    rng = np.random.default_rng(7)
    values = [EisensteinInt(int(a), int(b)) for a, b in rng.integers(-50, 51, size=(60, 2))]
    laws = norms = True
    for x, y, z in zip(values, values[1:], values[2:]):
        laws &= (x * y) * z == x * (y * z) and x * (y + z) == x * y + x * z and x * y == y * x
        norms &= (x * y).norm() == x.norm() * y.norm()
    yield Check("eisenstein", "ring laws", laws)
    yield Check("eisenstein", "norm is multiplicative", norms)

    ok = True
    for x, y in zip(values, values[1:]):
        if x.is_zero() and y.is_zero():
            continue
        g = gcd(x, y)
        ok &= g.divides(x) and g.divides(y)
    yield Check("eisenstein", "gcd divides both arguments", ok)

    bad = [
        (a, b)
        for a in range(-30, 31)
        for b in range(-30, 31)
        if (a, b) != (0, 0) and factor(EisensteinInt(a, b)).reconstruct() != EisensteinInt(a, b)
    ]
    yield Check("eisenstein", "factor reconstructs its input", not bad, f"first failure {bad[:1]}")

    span = np.arange(-15, 16)
    grid_a, grid_b = (g.ravel() for g in np.meshgrid(span, span, indexing="ij"))
    grid = to_complex_array(grid_a, grid_b)
    radius = 10 * np.sqrt(rng.random(500))
    points = radius * np.exp(2j * np.pi * rng.random(500))
    mismatches = 0
    for c in points:
        best = int(np.argmin(np.abs(grid - c)))
        mismatches += quantize(complex(c)) != EisensteinInt(int(grid_a[best]), int(grid_b[best]))
    yield Check("eisenstein", "quantize matches exhaustive search", mismatches == 0, f"{mismatches} mismatches")


def crt_suite() -> Iterator[Check]:
    crt = CrtSystem(DESK_VARPI)
    ring = crt.ring
    symbols = np.arange(ring.order)
    identity = bool(np.array_equal(crt.inverse(crt.forward(symbols)), symbols))
    yield Check("crt", "inverse of forward is the identity", identity)

    add_ok = mul_ok = True
    for r, s in itertools.product(range(ring.order), repeat=2):
        parts_r, parts_s = crt.forward(r), crt.forward(s)
        for i, layer_ring in enumerate(crt.layer_rings):
            add_ok &= int(crt.forward(ring.add(r, s))[i]) == int(layer_ring.add(parts_r[i], parts_s[i]))
            mul_ok &= int(crt.forward(ring.mul(r, s))[i]) == int(layer_ring.mul(parts_r[i], parts_s[i]))
    yield Check("crt", "forward map preserves addition", add_ok)
    yield Check("crt", "forward map preserves multiplication", mul_ok)

    bezout_ok = all(
        crt.inverse_by_idempotents([int(p) for p in crt.forward(r)]) == ring.leader(r) for r in range(ring.order)
    )
    yield Check("crt", "idempotent reconstruction agrees with the table", bezout_ok)


def lattice_suite() -> Iterator[Check]:
    for kinds in (("repetition", "repetition"), ("full", "full")):
        spec = desk_spec(*kinds)
        grid = _message_grid(spec)
        residues = {tuple(spec.encode_residues(messages)) for messages in grid}
        yield Check(
            "lattice",
            f"{'/'.join(kinds)}: layer messages biject onto the quotient",
            len(residues) == spec.quotient_order == len(grid),
            f"{len(residues)} residue vectors for {spec.quotient_order} cosets",
        )
        round_trip = layer_maps = True
        for messages in grid:
            point = phi_tilde(messages, spec)
            round_trip &= all(np.array_equal(a, b) for a, b in zip(phi(point, spec), messages))
            layer_maps &= all(np.array_equal(varphi(point, spec, i), messages[i]) for i in range(spec.num_layers))
        yield Check("lattice", f"{'/'.join(kinds)}: phi inverts phi_tilde", round_trip)
        yield Check("lattice", f"{'/'.join(kinds)}: layer maps recover each layer", layer_maps)

        coarse = tuple(DESK_VARPI * EisensteinInt(j + 1, j) for j in range(spec.n))
        kernel = all(not np.any(w) for w in phi(coarse, spec))
        yield Check("lattice", f"{'/'.join(kinds)}: coarse vectors map to zero messages", kernel)


def figures_suite() -> Iterator[Check]:
    instances = {
        "rep/rep": desk_spec("repetition", "repetition"),
        "full/rep": desk_spec("full", "repetition"),
        "rep/full": desk_spec("repetition", "full"),
    }
    for name, spec in instances.items():
        for i in range(spec.num_layers):
            closed, oracle = coding_gain(spec, Scope("primary", i)), brute_force_figures(spec, Scope("primary", i))
            yield Check(
                "figures",
                f"{name} primary:{i} closed form equals oracle",
                bool(np.isclose(closed.gain, oracle.gain)) and closed.d2 == oracle.d2,
                f"{closed.gain:.6f} vs {oracle.gain:.6f}",
            )
        closed, oracle = coding_gain(spec, Scope("full")), brute_force_figures(spec, Scope("full"))
        yield Check(
            "figures",
            f"{name} full closed form equals oracle",
            bool(np.isclose(closed.gain, oracle.gain)),
            f"{closed.gain:.6f} vs {oracle.gain:.6f}",
        )

    chain = LatticeSpec(3, [BlockCode.repetition(Modulus(EisensteinInt(1, 2), 2).ring(), 2)])
    bound, oracle = coding_gain(chain, Scope("primary", 0)), brute_force_figures(chain, Scope("primary", 0))
    yield Check(
        "figures",
        "chain-ring primary bound does not exceed the oracle",
        bound.gain <= oracle.gain + 1e-9 and not bound.exact,
        f"{bound.gain:.6f} vs {oracle.gain:.6f}",
    )

    spec = instances["rep/rep"]
    d2, kissing = coset_figures(spec, Scope("full"))
    best, count = shortest_vectors(build_fine_generator(spec), build_coarse_generator(spec), int(d2))
    yield Check(
        "figures",
        "coset enumeration matches the shortest-vector search",
        best == d2 and count == kissing,
        f"({d2}, {kissing}) vs ({best}, {count})",
    )


def _decoder_codes() -> dict[str, ConvolutionalCode]:
    f3, f4 = Modulus(EisensteinInt(1, 2)), Modulus(EisensteinInt(2))
    return {
        "F3 table": ConvolutionalCode(ConvCodeSpec.table(f3), 4),
        "F4 table": ConvolutionalCode(ConvCodeSpec.table(f4), 3),
        "F4 rate-3/4": ConvolutionalCode(ConvCodeSpec.rate_three_quarters(f4), 2),
    }


def decoder_suite() -> Iterator[Check]:
    rng = np.random.default_rng(11)
    for name, code in _decoder_codes().items():
        q = code.ring.order
        agree = True
        for _ in range(5):
            costs = rng.random((code.n, q))
            trellis, exhaustive = code.decode_costs(costs), LinearCode.decode_costs(code, costs)
            agree &= np.array_equal(trellis.codeword, exhaustive.codeword) and np.isclose(
                trellis.metric, exhaustive.metric
            )
        yield Check("decoders", f"{name}: Viterbi equals exhaustive search", bool(agree))

        agree = True
        for _ in range(3):
            priors = rng.dirichlet(np.ones(q), size=code.n)
            fast, slow = code.map_decode(priors), LinearCode.map_decode(code, priors)
            agree &= np.allclose(fast.input_posteriors[:, :q], slow.input_posteriors[:, :q], atol=1e-9)
            agree &= np.allclose(fast.extrinsic, slow.extrinsic, atol=1e-9)
        yield Check("decoders", f"{name}: MAP marginals equal exhaustive enumeration", bool(agree))


def noiseless_suite() -> Iterator[Check]:
    spec = desk_spec()
    channel = ChannelConfig(noise_variance=1e-12)
    gains = np.ones(2, dtype=np.complex128)
    plan = choose_coefficients(gains, spec, average_power(spec.varpi), channel.noise_variance)
    modes = [(DecoderMode.LIF, 1), (DecoderMode.NON_MSD, 1), (DecoderMode.MSD, 1), (DecoderMode.IMSD, 3)]
    rng = np.random.default_rng(3)
    for dithered in (False, True):
        errors = {mode: 0 for mode, _ in modes}
        for first, second in itertools.product(_message_grid(spec), repeat=2):
            states = [
                transmit(spec, messages, dither=None if dithered else np.zeros(spec.n), rng=rng)
                for messages in (first, second)
            ]
            y = mac_output(states, channel, rng, gains)
            targets = expected_combinations(spec, plan, states)
            decoder = LayeredDecoder(spec, plan, gains, channel.noise_variance, np.stack([s.dither for s in states]))
            for mode, iterations in modes:
                decisions = decoder.decode(y, mode, iterations)
                errors[mode] += sum(not np.array_equal(d.message, t) for d, t in zip(decisions, targets))
        label = "dithered" if dithered else "undithered"
        for mode, count in errors.items():
            name = f"{mode.value} recovers every combination ({label})"
            yield Check("noiseless", name, count == 0, f"{count} errors")


SUITES: dict[str, Callable[[], Iterator[Check]]] = {
    "eisenstein": eisenstein_suite,
    "crt": crt_suite,
    "lattice": lattice_suite,
    "figures": figures_suite,
    "decoders": decoder_suite,
    "noiseless": noiseless_suite,
}


def run_selftest(suites: Sequence[str] | None = None) -> SelfTestReport:
    names = list(SUITES) if suites is None else list(suites)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    checks: list[Check] = []
    for name in names:
        try:
            for check in SUITES[name]():
                checks.append(check)
                if not check.passed:
                    logger.warning("%s: %s failed %s", name, check.name, check.detail)
        except Exception as e:
            logger.exception("suite %s raised", name)
            checks.append(Check(name, "suite raised", False, f"{type(e).__name__}: {e}"))
    return SelfTestReport(tuple(checks))
