"""
Shared meshes and closed-form oracles.
"""
import math

import numpy as np
import pytest

from anisolab.models.fields import ScalarField
from anisolab.models.schemas import DomainSpec, GaugeSpec
from anisolab.services.domain_mesh import domain_mesher


def square_torsion_rigidity(side: float, terms: int = 400) -> float:
    """
    int u for -Delta u = 1 on a square with zero boundary values, by the double sine series
    T = 64 L^4 / pi^6 * sum_{m, n odd} 1 / (m^2 n^2 (m^2 + n^2)).
    """
    odd = np.arange(1, 2 * terms, 2, dtype=float)
    m, n = np.meshgrid(odd, odd)
    return float(64 * side ** 4 / math.pi ** 6 * np.sum(1.0 / (m ** 2 * n ** 2 * (m ** 2 + n ** 2))))


def bessel_j0(x: float, terms: int = 40) -> float:
    total, term = 0.0, 1.0
    for k in range(terms):
        if k:
            term *= -(x / 2) ** 2 / k ** 2
        total += term
    return total


def bessel_j0_first_zero() -> float:
    """Bisection of the J0 power series on [2, 3]."""
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bessel_j0(lo) * bessel_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="session")
def euclidean():
    return GaugeSpec()


@pytest.fixture(scope="session")
def ellipse():
    return GaugeSpec(family="ellipse", a=2.0, b=1.0)


@pytest.fixture(scope="session")
def disk_mesh():
    return domain_mesher.build_mesh(DomainSpec.model_validate("unit_disk_64"), 0.05)


@pytest.fixture(scope="session")
def fine_disk_mesh():
    return domain_mesher.build_mesh(DomainSpec.model_validate("unit_disk_64"), 0.025)


@pytest.fixture(scope="session")
def coarse_disk_mesh():
    return domain_mesher.build_mesh(DomainSpec.model_validate("unit_disk_64"), 0.1)


@pytest.fixture(scope="session")
def square_mesh():
    """[-1, 1]^2."""
    return domain_mesher.build_mesh(DomainSpec.model_validate("square(2)"), 0.05)


@pytest.fixture(scope="session")
def unit_square_mesh():
    """[0, 1]^2."""
    spec = DomainSpec(kind="polygon", vertices=[(0, 0), (1, 0), (1, 1), (0, 1)])
    return domain_mesher.build_mesh(spec, 0.1)


@pytest.fixture(scope="session")
def disk_torsion_exact(disk_mesh):
    """Interpolant of (1 - r^2) / 4."""
    r2 = np.sum(disk_mesh.vertices ** 2, axis=1)
    return ScalarField(disk_mesh, (1.0 - r2) / 4.0)


@pytest.fixture(scope="session")
def shifted_lshape():
    """(-1,1)^2 minus [0,1)^2, translated by (-0.5, 0.5); the origin sees a re-entrant edge from behind."""
    return DomainSpec(kind="lshape", offset=(-0.5, 0.5))


@pytest.fixture(scope="session")
def square_T():
    return square_torsion_rigidity(2.0)


@pytest.fixture(scope="session")
def j01():
    return bessel_j0_first_zero()
