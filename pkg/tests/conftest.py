import numpy as np
import pytest

from lpsflow.mesh import build_structured_mesh, periodic_tags, wall_tags

TWO_PI = 2.0 * np.pi


def periodic_mesh(dim, n, p, spacing="gll", length=TWO_PI):
    if isinstance(n, int):
        n = (n,) * dim
    return build_structured_mesh(
        dim, [(0.0, length)] * dim, n, p, spacing, periodic_tags(dim)
    )


def walled_mesh(dim, n, p, spacing="gll", length=1.0):
    if isinstance(n, int):
        n = (n,) * dim
    return build_structured_mesh(
        dim, [(0.0, length)] * dim, n, p, spacing, wall_tags(dim)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
