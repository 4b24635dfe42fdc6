import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ksurf.harmonic_cauchy import solve_cauchy
from ksurf.sphere_curves import circle, cusp_demo, perturbed_circle
from ksurf.surface_builder import integrate_surface

settings.register_profile("ksurf", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ksurf")

CORPUS = {
    "circle-0.3": lambda: circle(0.3),
    "circle-0.5": lambda: circle(0.5),
    "circle-0.8": lambda: circle(0.8),
    "cusp-demo": lambda: cusp_demo(),
    "perturbed-1": lambda: perturbed_circle(0.5, 0.03, 1),
    "perturbed-2": lambda: perturbed_circle(0.5, 0.03, 2),
}
CONVEX_JORDAN = ["circle-0.3", "circle-0.5", "circle-0.8", "perturbed-1", "perturbed-2"]


@pytest.fixture(scope="session")
def corpus():
    """Curve, Gauss jet and surface jet for every admissible test datum."""
    out = {}
    for name, make in CORPUS.items():
        alpha = make()
        jet = solve_cauchy(alpha)
        out[name] = (alpha, jet, integrate_surface(jet))
    return out


@pytest.fixture(scope="session")
def circle_run():
    alpha = circle(0.5)
    jet = solve_cauchy(alpha, 24, 8)
    return alpha, jet, integrate_surface(jet)


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotational_oracle(A, u, v):
    """Closed-form Gauss map of the rotational surface in Cauchy coordinates.

    Uses scipy's Jacobi elliptic functions, independent of the quadrature in
    the package: N(u, v) = (dn cos u, dn sin u, A sn) at s = K(A^2) - |v|.
    """
    from scipy.special import ellipj, ellipk

    m = A * A
    sn, cn, dn, _ = ellipj(ellipk(m) - np.abs(v), m)
    return np.stack([np.multiply.outer(np.cos(u), dn), np.multiply.outer(np.sin(u), dn),
                     np.multiply.outer(np.ones_like(u), A * sn)], axis=-1)


TWO_PI = 2 * math.pi


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
