import math

import numpy as np
import pytest

from restriction_lab.convolution import (C0, calibrate_n_circle, circle_frame, circle_points,
                                         convolve_pair, euler_lagrange_map, l2_norm_ball,
                                         triple_restrict, trilinear, write_ball_csv)
from restriction_lab.harmonics import (SphereField, axis_angle_matrix, harmonic_field, modulus,
                                       rotate_field)
from restriction_lab.quadrature import build_ball_grid

from conftest import random_field


@pytest.fixture(scope="module")
def grid(q_small):
    return build_ball_grid(8, q_small)


def test_constant_density_law(q_default):
    g = build_ball_grid(24, q_default)
    one = SphereField.constant(q_default)
    b = convolve_pair(one, one, g, 64)
    exact = C0 / g.radial_nodes[:, None]
    assert np.abs(b.values / exact - 1).max() < 1e-12
    assert l2_norm_ball(b) == pytest.approx(math.sqrt(32 * math.pi**3), rel=1e-10)


def test_monte_carlo_pair_density():
    # |x + y| for independent uniform x, y has density r/2 on (0, 2); this
    # pins c0 because sigma*sigma integrates to (4 pi)^2 over the ball
    rng = np.random.default_rng(42)
    n = 200_000
    x = rng.normal(size=(n, 3))
    y = rng.normal(size=(n, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    y /= np.linalg.norm(y, axis=1)[:, None]
    r = np.linalg.norm(x + y, axis=1)
    c_hat = 1.5 * math.pi * r.mean()  # E r = 4/3 when c0 = 2 pi
    se = 1.5 * math.pi * r.std() / math.sqrt(n)
    assert abs(c_hat - C0) < 5 * se


def test_calibration_accepts_default(grid):
    assert calibrate_n_circle(grid, 64) == 64


def test_circle_geometry():
    z = np.array([0.3, -0.7, 0.9])
    x, xp = circle_points(z, 16)
    assert np.allclose(np.linalg.norm(x, axis=1), 1, atol=1e-14)
    assert np.allclose(np.linalg.norm(xp, axis=1), 1, atol=1e-14)
    assert np.allclose(x + xp, z, atol=1e-14)
    e1, e2 = circle_frame(z)
    assert abs(e1 @ z) < 1e-14 and abs(e2 @ z) < 1e-14 and abs(e1 @ e2) < 1e-14


@pytest.mark.parametrize("z", [[0, 0, 0], [2.0, 0, 0], [0, 0, 2.5]])
def test_circle_points_outside_support(z):
    with pytest.raises(ValueError):
        circle_points(z, 16)


def test_finite_and_bounded(q_small, grid):
    f = random_field(q_small, 3, 1)
    h = random_field(q_small, 3, 2)
    b = convolve_pair(f, h, grid, 32)
    r = grid.radial_nodes[:, None]
    assert np.all(np.isfinite(b.values))
    bound = C0 * np.abs(f.values).max() * np.abs(h.values).max()
    # sup over nodes understates the field sup slightly, hence the margin
    assert np.all(r * np.abs(b.values) <= 1.5 * bound)


def test_positivity(q_small, grid):
    f = modulus(random_field(q_small, 3, 3))
    b = convolve_pair(f, SphereField.constant(q_small, 2.0), grid, 32)
    assert b.values.real.min() >= 0 and np.abs(b.values.imag).max() < 1e-12


def test_symmetry_and_bilinearity(q_small, grid):
    f = random_field(q_small, 3, 4)
    g = random_field(q_small, 3, 5)
    h = random_field(q_small, 3, 6)
    fg = convolve_pair(f, g, grid, 32).values
    assert np.abs(fg - convolve_pair(g, f, grid, 32).values).max() < 1e-12 * np.abs(fg).max()
    lhs = convolve_pair(f.with_values(f.values + 2j * h.values, 3), g, grid, 32).values
    rhs = fg + 2j * convolve_pair(h, g, grid, 32).values
    assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()


def test_evenness_transfer(q_small, grid):
    f = random_field(q_small, 4, 7, even=True)
    b = convolve_pair(f, f, grid, 32)
    pts = grid.points().reshape(-1, 3)[::7]
    assert np.abs(b.evaluate(pts) - b.evaluate(-pts)).max() < 1e-8 * np.abs(b.values).max()


def test_rotation_equivariance(q_small, grid):
    f = random_field(q_small, 3, 8)
    g = random_field(q_small, 3, 9)
    R = axis_angle_matrix([0.2, -1.0, 0.4], 1.1)
    b = convolve_pair(f, g, grid, 32)
    br = convolve_pair(rotate_field(f, R), rotate_field(g, R), grid, 32)
    pts = grid.points().reshape(-1, 3)
    assert np.abs(br.values.ravel() - b.evaluate(pts @ R.T)).max() < 1e-8 * np.abs(b.values).max()


def test_off_grid_evaluation_matches_nodes(q_small, grid):
    f = random_field(q_small, 3, 10)
    b = convolve_pair(f, f, grid, 32)
    pts = grid.points().reshape(-1, 3)
    assert np.abs(b.evaluate(pts) - b.values.ravel()).max() < 1e-10 * np.abs(b.values).max()
    assert b.evaluate(np.array([[0.0, 0.0, 2.5]]))[0] == 0


def test_constant_critical_identity(q_small, grid):
    one = SphereField.constant(q_small)
    T = euler_lagrange_map(one, 32)
    assert np.abs(T.values / (8 * math.pi**2) - 1).max() < 1e-12
    T2 = triple_restrict(one, convolve_pair(one, one, grid, 32))
    assert np.abs(T2.values - T.values).max() < 1e-10


def test_trilinear_matches_triple_restrict(q_small, grid):
    u, v, w = (random_field(q_small, 2, s) for s in (11, 12, 13))
    a = trilinear(u, v, w, 32).values
    b = triple_restrict(w, convolve_pair(u, v, grid, 32)).values
    assert np.abs(a - b).max() < 1e-10 * np.abs(a).max()


def test_homogeneity(q_small):
    f = random_field(q_small, 3, 14)
    c = 0.7 - 1.3j
    lhs = euler_lagrange_map(f.scaled(c), 32).values
    rhs = c**3 * euler_lagrange_map(f, 32).values
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()


def test_harmonic_convolution_support(q_small, grid):
    # Y10 is odd so Y10 sigma * 1 sigma is odd in z
    b = convolve_pair(harmonic_field(q_small, 1, 0), SphereField.constant(q_small), grid, 32)
    pts = grid.points().reshape(-1, 3)[::5]
    assert np.abs(b.evaluate(pts) + b.evaluate(-pts)).max() < 1e-10


def test_ball_csv_dump(tmp_path, q_small, grid):
    one = SphereField.constant(q_small)
    b = convolve_pair(one, one, grid, 16)
    p = tmp_path / "ball.csv"
    write_ball_csv(b, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "r,theta_index,phi_index,re,im"
    assert len(lines) == 1 + b.values.size
    r, ti, pj, re, im = lines[1].split(",")
    assert float(re) == b.values[0, 0].real


def test_small_n_circle_rejected(q_small, grid):
    one = SphereField.constant(q_small)
    with pytest.raises(ValueError):
        convolve_pair(one, one, grid, 4)
