import numpy as np
import pytest

from klshell.nurbs import NurbsSurface


def warped_patch(n_el=4, degree=3, seed=0, amplitude=0.15, weights=True):
    """A doubly curved, rational test patch on [0, 2] x [0, 1.5]."""
    rng = np.random.default_rng(seed)
    n = n_el + degree
    knots = np.concatenate([np.zeros(degree), np.linspace(0, 1, n_el + 1), np.ones(degree)])
    u, v = np.meshgrid(np.linspace(0, 2, n), np.linspace(0, 1.5, n), indexing="ij")
    z = 0.3 * (u - 1) ** 2 - 0.2 * (v - 0.7) ** 2 + 0.1 * u * v
    cp = np.stack([u, v, z, np.ones_like(u)], -1)
    cp[..., :3] += amplitude * rng.uniform(-0.5, 0.5, cp[..., :3].shape)
    if weights:
        cp[..., 3] = rng.uniform(0.7, 1.3, u.shape)
    return NurbsSurface(degree, degree, knots, knots, cp)


@pytest.fixture
def patch():
    return warped_patch()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long benchmark runs")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
