import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rmest.geometry import Euclidean, Hyperbolic, Sphere

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

SPACES = [
    Euclidean(3),
    Sphere(2),
    Sphere(3, radius=2.5),
    Hyperbolic(2),
    Hyperbolic(3, kappa=0.5),
]


def space_id(space):
    return space.spec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def local_radius(space, frac=0.45):
    """A ball radius that keeps everything well inside the injectivity radius."""
    if isinstance(space, Sphere):
        return frac * space.injectivity_radius
    return 2.0 * space.length_scale


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
