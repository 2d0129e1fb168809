from __future__ import annotations

import numpy as np
import pytest

from plap_freq.core.exact import ExactSolution
from plap_freq.core.mesh import Domain, build_mesh
from plap_freq.core.solver import picard_solve


@pytest.fixture(scope="session")
def coarse_disc():
    return build_mesh(Domain.disc(1.0), 0.1)


@pytest.fixture(scope="session")
def disc_mesh():
    return build_mesh(Domain.disc(1.0), 0.05)


@pytest.fixture(scope="session")
def fine_disc():
    return build_mesh(Domain.disc(1.0), 0.02)


@pytest.fixture(scope="session")
def solved_harmonic(fine_disc):
    """Discrete harmonic fields with boundary data Re(z^k), keyed by k."""
    fields = {}
    for k in (1, 2, 3):
        field, report = picard_solve(fine_disc, ExactSolution.harmonic_polynomial(k), 2.0)
        assert report.converged
        fields[k] = field
    return fields


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def ring_points(rng, count, r_lo, r_hi, center=(0.0, 0.0)):
    rho = np.sqrt(rng.uniform(r_lo**2, r_hi**2, size=count))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return np.asarray(center) + np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])
