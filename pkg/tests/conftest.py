import numpy as np
import pytest

from restriction_lab.harmonics import HarmonicSpectrum, SphereField, synthesize
from restriction_lab.quadrature import build_sphere_quadrature


@pytest.fixture(scope="session")
def q_small():
    return build_sphere_quadrature(10, 20)


@pytest.fixture(scope="session")
def q_default():
    return build_sphere_quadrature(18, 36)


def random_field(q, L, seed, complex_values=True, even=False):
    rng = np.random.default_rng(seed)
    n = (L + 1) ** 2
    c = rng.normal(size=n) + (1j * rng.normal(size=n) if complex_values else 0)
    if even:
        ls = np.floor(np.sqrt(np.arange(n))).astype(int)
        c = np.where(ls % 2 == 0, c, 0)
    return synthesize(HarmonicSpectrum(L, np.asarray(c, dtype=complex)), q)


@pytest.fixture(scope="session")
def rand_field():
    return random_field
