import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from restriction_lab.quadrature import (BALL_RADIUS, build_ball_grid, build_sphere_quadrature,
                                        compensated_sum, integrate_ball, integrate_sphere,
                                        ball_volume)


def monomial_integral(a, b, c):
    # closed form of the sphere integral of x^a y^b z^c
    if a % 2 or b % 2 or c % 2:
        return 0.0
    g = math.gamma
    return 2 * g((a + 1) / 2) * g((b + 1) / 2) * g((c + 1) / 2) / g((a + b + c + 3) / 2)


def test_degree_accounting():
    assert build_sphere_quadrature(10, 20).degree == 19
    assert build_sphere_quadrature(10, 12).degree == 11
    q = build_sphere_quadrature(6, 8)
    assert q.size == 48 and q.nodes.shape == (48, 3)
    assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0, atol=1e-15)


def test_weights_sum_to_area():
    q = build_sphere_quadrature(7, 9)
    assert abs(q.weights.sum() - 4 * math.pi) < 1e-13


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 11), st.integers(0, 11), st.integers(0, 11))
def test_polynomial_exactness(a, b, c):
    q = build_sphere_quadrature(8, 16)  # degree 15
    if a + b + c > q.degree:
        return
    x, y, z = q.nodes.T
    got = integrate_sphere(q, x**a * y**b * z**c)
    assert abs(got - monomial_integral(a, b, c)) < 1e-11


def test_refinement_convergence_exp():
    exact = 4 * math.pi * math.sinh(1.0)
    errs = []
    n = 2
    while True:
        q = build_sphere_quadrature(n, 2 * n)
        errs.append(abs(integrate_sphere(q, np.exp(q.nodes[:, 2])) - exact))
        if errs[-1] <= 1e-12:
            break
        n *= 2
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))


def test_ball_singular_integrand():
    g = build_ball_grid(12, build_sphere_quadrature(4, 8))
    r = np.linalg.norm(g.points(), axis=-1)
    assert abs(integrate_ball(g, 1.0 / r) - 8 * math.pi) < 1e-10
    assert abs(integrate_ball(g, np.ones(g.shape)) - ball_volume()) < 1e-10
    assert r.min() > 0 and r.max() < BALL_RADIUS


def test_compensated_sum_matches_fsum():
    rng = np.random.default_rng(3)
    t = rng.normal(size=10001) * 10.0 ** rng.integers(-8, 8, size=10001)
    assert abs(compensated_sum(t) - math.fsum(t)) <= 1e-14 * np.abs(t).sum()
    assert compensated_sum(t) == compensated_sum(t.copy())


@pytest.mark.parametrize("args", [(1, 8), (4, 3), (4.5, 8)])
def test_invalid_sizes(args):
    with pytest.raises(ValueError):
        build_sphere_quadrature(*args)


def test_length_mismatch():
    q = build_sphere_quadrature(4, 8)
    with pytest.raises(ValueError):
        integrate_sphere(q, np.ones(q.size + 1))
    with pytest.raises(ValueError):
        build_ball_grid(2, q)
