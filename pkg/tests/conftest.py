import numpy as np
import pytest

from lrsplit.problems import preset_dre, preset_reaction_diffusion
from lrsplit.reference import dopri5


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture(scope="session")
def rd64():
    p = preset_reaction_diffusion(64)
    return p, dopri5(p)


@pytest.fixture(scope="session")
def rd32():
    p = preset_reaction_diffusion(32)
    return p, dopri5(p)


@pytest.fixture(scope="session")
def dre64():
    p = preset_dre(64)
    return p, dopri5(p)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def slope(taus, errors):
    return float(np.polyfit(np.log(taus), np.log(errors), 1)[0])
