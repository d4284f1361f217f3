"""
Shared pytest fixtures and configuration.
"""

import numpy as np
import pytest

from latticenc.eisenstein import EisensteinInt
from latticenc.residue import CrtSystem, Modulus
from latticenc.selftest import desk_spec as build_desk_spec

VARPI = EisensteinInt(2, 4)


@pytest.fixture
def varpi():
    return VARPI


@pytest.fixture
def crt():
    """CRT system of 2+4w: layer 0 is F3 = S/<1+2w>, layer 1 is F4 = S/<2>."""
    return CrtSystem(VARPI)


@pytest.fixture
def f3():
    return Modulus(EisensteinInt(1, 2))


@pytest.fixture
def f4():
    return Modulus(EisensteinInt(2))


@pytest.fixture
def desk_spec():
    """varpi = 2+4w, n = 2, a repetition code in each layer."""
    return build_desk_spec()


@pytest.fixture
def full_spec():
    return build_desk_spec("full", "full")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
