"""Shared fixtures: the two-by-two NMP plant and the study setups."""

import numpy as np
import pytest

from ocitune.controller import pid_structure
from ocitune.rational import RationalFunction
from ocitune.refmodel import EntryTemplate, RefModelSpec
from ocitune.transfer import TransferMatrix, closed_loop


@pytest.fixture(scope="session")
def plant():
    """Two-input two-output plant with one NMP transmission zero at 1.2."""
    return TransferMatrix([
        [RationalFunction([1.0, -0.7], np.convolve([1, -0.9], [1, -0.8])),
         RationalFunction([2.0], [1.0, -0.8])],
        [RationalFunction([1.25], [1.0, -0.8]),
         RationalFunction([1.5], [1.0, -0.8])],
    ])


@pytest.fixture(scope="session")
def pid2():
    return pid_structure(2)


@pytest.fixture(scope="session")
def diag_spec():
    """Diagonal reference model with free unit-gain numerators."""
    return RefModelSpec(n=2, structure="diagonal", entries=(
        (EntryTemplate("gain", poles=(0.6, 0.8)), EntryTemplate("zero")),
        (EntryTemplate("zero"), EntryTemplate("gain", poles=(0.6, 0.7))),
    ))


@pytest.fixture(scope="session")
def tri_spec():
    """Block-triangular reference model moving the NMP effect to output 1."""
    return RefModelSpec(n=2, structure="triangular", row_k=0, entries=(
        (EntryTemplate("gain", poles=(0.8, 0.6)),
         EntryTemplate("coupling", poles=(0.8, 0.6, 0.75), c1=None, c0=None)),
        (EntryTemplate("zero"),
         EntryTemplate("fixed", num=(0.25,), poles=(0.75,))),
    ))


@pytest.fixture(scope="session")
def tri_refmodel_matched():
    """The reference model the matching condition singles out for the
    block-triangular templates: eta = (-0.4, 1.0, -0.8)."""
    return TransferMatrix([
        [RationalFunction([-0.4, 0.48], np.convolve([1, -0.8], [1, -0.6])),
         RationalFunction([1.0, -1.0], np.convolve([1, -0.6], [1, -0.75]))],
        [RationalFunction([0.0], [1.0]),
         RationalFunction([0.25], [1.0, -0.75])],
    ])


@pytest.fixture(scope="session")
def noise_free_batch(plant):
    """Closed-loop record with the proportional collection controller."""
    from ocitune.signals import prbs

    c0 = TransferMatrix.gain(0.5, 2)
    t_loop = closed_loop(plant, c0)
    r = prbs(2, 1.0, 20, 1260, seed=321)
    y = t_loop.simulate(r)
    u = c0.simulate(r - y)
    return r, u, y
