import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catiter.spaces import Euclidean, Hyperbolic, Product, Sphere, Tripod

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SPACES = {
    "sphere": Sphere(1.0, 2),
    "sphere_k4": Sphere(4.0, 2),
    "euclidean": Euclidean(0.0, 2),
    "hyperbolic": Hyperbolic(-1.0, 2),
    "tripod": Tripod(),
    "product": Product(1.0, 2, 1),
}


@pytest.fixture(params=sorted(SPACES))
def space(request):
    return SPACES[request.param]


@pytest.fixture
def sphere():
    return Sphere(1.0, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def local_points(space, rng, n, radius=None):
    """``n`` points in a ball small enough for unique geodesics."""
    if radius is None:
        radius = 0.3 * space.geodesic_bound if math.isfinite(space.geodesic_bound) else 2.0
    return space.sample_ball(space.origin(), radius, rng, n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
