import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

import ksurf.harmonic_cauchy as hc
from ksurf.errors import DivergenceWarning, DomainError, ExtrapolationError, ResolutionError
from ksurf.harmonic_cauchy import GaussJet, estimate_strip, evaluate_gauss, norm_defect, solve_cauchy
from ksurf.sphere_curves import SphericalCurve, circle, equator, perturbed_circle
from tests.conftest import random_rotation, rotational_oracle


@pytest.mark.parametrize("A", [0.3, 0.5, 0.8])
def test_circle_data_matches_elliptic_oracle(A):
    jet = solve_cauchy(circle(A))
    u = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    h = 0.9 * jet.trust_height
    v = np.linspace(-h, h, 21)
    N = jet.partials(u, v, 0)[(0, 0)]
    assert np.abs(N - rotational_oracle(A, u, v)).max() < 1e-10


def test_corpus_unit_norm(corpus):
    for name, (alpha, jet, _) in corpus.items():
        assert norm_defect(jet).max() <= 1e-10, name
        assert jet.trust_height > 0.1, name


def test_odd_layers_vanish(corpus):
    for name, (_, jet, _) in corpus.items():
        assert np.abs(jet.hat[1::2]).max() == 0.0, name


def test_equator_and_constant_data_give_trivial_layers():
    jet = solve_cauchy(equator())
    assert np.abs(jet.hat[1:]).max() < 1e-14
    north = SphericalCurve.from_coeffs([[0, 0, 1]], [], normalize=False)
    jet = solve_cauchy(north)
    assert np.abs(jet.hat[1:]).max() == 0.0
    assert jet.trust_height == hc.STRIP_CAP


def test_refinement_changes_values_below_tolerance():
    alpha = perturbed_circle(0.5, 0.03, 1)
    coarse = solve_cauchy(alpha)
    fine = solve_cauchy(alpha, K_v=48, M_u=2 * coarse.M_u)
    u = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    v = np.linspace(0, 0.8 * coarse.trust_height, 9)
    a = coarse.partials(u, v, 1)
    b = fine.partials(u, v, 1)
    assert max(np.abs(a[key] - b[key]).max() for key in a) < 1e-8


def test_harmonic_map_equation_by_finite_differences():
    jet = solve_cauchy(perturbed_circle(0.5, 0.03, 2))
    h = 1e-3
    u0 = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    v0 = np.linspace(0.05, 0.5 * jet.trust_height, 5)
    U, V = np.meshgrid(u0, v0, indexing="ij")

    def N(du, dv):
        return evaluate_gauss(jet, U + du, V + dv)[(0, 0)]

    c = N(0, 0)
    Nu = (N(h, 0) - N(-h, 0)) / (2 * h)
    Nv = (N(0, h) - N(0, -h)) / (2 * h)
    lap = (N(h, 0) + N(-h, 0) + N(0, h) + N(0, -h) - 4 * c) / (h * h)
    grad2 = (Nu**2).sum(-1) + (Nv**2).sum(-1)
    resid = lap + grad2[..., None] * c
    assert np.abs(resid).max() < 1e-5


@given(st.integers(0, 2 ** 31))
def test_rotation_equivariance(seed):
    R = random_rotation(np.random.default_rng(seed))
    alpha = circle(0.5)
    a = solve_cauchy(alpha, 16, 8)
    b = solve_cauchy(alpha.rotated(R), 16, 8)
    assert np.abs(b.hat - a.hat @ R.T).max() < 1e-12


def test_evaluate_gauss_is_pointwise():
    jet = solve_cauchy(circle(0.5), 24, 8)
    u = np.array([0.1, 2.0, 4.0])
    v = np.array([0.0, 0.2, -0.3])
    out = evaluate_gauss(jet, u, v, 2)
    assert set(out) == {(i, j) for i in range(3) for j in range(3 - i)}
    diag = np.stack([jet.partials(u[i], v[i], 0)[(0, 0)][0, 0] for i in range(3)])
    assert np.abs(out[(0, 0)] - diag).max() < 1e-15
    assert np.abs(out[(0, 0)] - rotational_oracle(0.5, u, v).diagonal().T).max() < 1e-10


def test_input_and_numerical_errors():
    jet = solve_cauchy(circle(0.5), 24, 8)
    with pytest.raises(DomainError):
        evaluate_gauss(jet, 0.0, 0.0, 3)
    with pytest.raises(ExtrapolationError):
        jet.partials([0.0], [2 * jet.trust_height])
    with pytest.raises(DomainError):
        solve_cauchy(circle(0.5), K_v=1)
    with pytest.raises(DomainError):
        solve_cauchy(perturbed_circle(0.5, 0.03, 2), M_u=1)
    with pytest.raises(ResolutionError):
        solve_cauchy(perturbed_circle(0.5, 0.03, 2), M_u=8)


def test_strip_estimate_on_geometric_jet():
    K, C, r = 20, 2.0, 3.0
    hat = np.zeros((K + 1, 3, 3), dtype=complex)
    hat[:, 0, 0] = C * r ** np.arange(K + 1)
    est = estimate_strip(GaussJet(hat, 1.0), tol=1e-8, cap=1.0)
    oracle = brentq(lambda v: C * (r * v) ** (K - 1) / (1 - r * v) - 1e-8, 1e-6, (1 - 1e-9) / r)
    assert abs(est - oracle) < 1e-10
    # a jet whose tail never reaches the tolerance inside the cap is capped
    hat[:, 0, 0] = r ** -np.arange(K + 1.0)
    assert estimate_strip(GaussJet(hat, 1.0), tol=1e-8, cap=0.5) == 0.5


def test_negligible_strip_warns(monkeypatch):
    monkeypatch.setattr(hc, "estimate_strip", lambda jet: 1e-5)
    with pytest.warns(DivergenceWarning):
        jet = solve_cauchy(circle(0.5), 12, 8)
    assert jet.trust_height == 1e-5
    assert math.isfinite(jet.layer_norms().sum())
