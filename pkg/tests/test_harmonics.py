import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import sph_harm_y

from restriction_lab.harmonics import (HarmonicSpectrum, ResolutionError, SphereField, analyze,
                                       axis_angle_matrix, harmonic_field, lm_index, modulus,
                                       read_spectrum_csv, real_sph_harm, rotate_field,
                                       rotation_distance, rotation_modulus, smooth_split,
                                       sobolev_norm, standard_rotations, synthesize,
                                       write_spectrum_csv)
from restriction_lab.quadrature import integrate_sphere

from conftest import random_field


def test_against_scipy_oracle():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(64, 3))
    p /= np.linalg.norm(p, axis=1)[:, None]
    theta, phi = np.arccos(p[:, 2]), np.arctan2(p[:, 1], p[:, 0])
    Y = real_sph_harm(7, p)
    for l in range(8):
        for m in range(-l, l + 1):
            c = sph_harm_y(l, abs(m), theta, phi)
            if m == 0:
                ref = c.real
            else:
                # scipy carries the Condon-Shortley phase; the real basis does not
                ref = (-1) ** m * math.sqrt(2) * (c.real if m > 0 else c.imag)
            assert np.allclose(Y[:, lm_index(l, m)], ref, atol=1e-13)


def test_orthonormal_under_quadrature(q_small):
    Y = real_sph_harm(4, q_small.nodes)
    G = (Y * q_small.weights[:, None]).T @ Y
    assert np.abs(G - np.eye(G.shape[0])).max() < 1e-13


def test_roundtrip_and_parseval(q_small):
    f = random_field(q_small, 4, 11)
    s = analyze(f, 4)
    g = synthesize(s, q_small)
    assert np.abs(g.values - f.values).max() < 1e-12
    assert abs(s.l2_norm() - f.l2_norm()) < 1e-10 * f.l2_norm()


def test_analyze_requires_resolution(q_small):
    with pytest.raises(ResolutionError):
        analyze(SphereField.constant(q_small), 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10_000),
       st.floats(0, 3), st.floats(0, 3))
def test_sobolev_monotone(L, seed, s1, s2):
    rng = np.random.default_rng(seed)
    n = (L + 1) ** 2
    spec = HarmonicSpectrum(L, rng.normal(size=n) + 1j * rng.normal(size=n))
    lo, hi = sorted((s1, s2))
    assert sobolev_norm(spec, lo) <= sobolev_norm(spec, hi) * (1 + 1e-14)
    assert sobolev_norm(spec, 0) == pytest.approx(spec.l2_norm(), rel=1e-14)


def test_sobolev_negative_order():
    with pytest.raises(ValueError):
        sobolev_norm(HarmonicSpectrum(0, np.ones(1)), -0.5)


def test_smooth_split_orthogonal(q_default):
    f = random_field(q_default, 8, 5)
    for eps in (0.5 * f.l2_norm(), 0.05 * f.l2_norm()):
        phi, g = smooth_split(f, eps)
        assert abs(phi.inner(g)) < 1e-10
        assert g.l2_norm() < eps
        assert np.abs(phi.values + g.values - f.values).max() < 1e-12


def test_smooth_split_constant_is_all_smooth(q_small):
    phi, g = smooth_split(SphereField.constant(q_small), 1e-3)
    assert g.l2_norm() < 1e-14


def test_rotation_of_degree_one_closed_form(q_small):
    # Y10 is sqrt(3/4pi) z, so x -> Y10(Rx) is sqrt(3/4pi) (R^T e3) . x
    R = axis_angle_matrix([1.0, 2.0, 0.5], 0.8)
    g = rotate_field(harmonic_field(q_small, 1, 0), R)
    expect = math.sqrt(3 / (4 * math.pi)) * q_small.nodes @ R[2]
    assert np.abs(g.values - expect).max() < 1e-13


def test_rotation_preserves_degree_energies(q_default):
    f = random_field(q_default, 6, 2)
    e0 = analyze(f, 6).degree_energies()
    for R in standard_rotations()[::5]:
        e1 = analyze(rotate_field(f, R), 6).degree_energies()
        assert np.abs(e1 - e0).max() < 1e-8 * e0.sum()


def test_rotate_field_rejects_non_orthogonal(q_small):
    with pytest.raises(ValueError):
        rotate_field(SphereField.constant(q_small), np.diag([1.0, 1.0, 1.1]))


def test_standard_rotations_published_set():
    rots = standard_rotations()
    assert len(rots) == 20
    d = [rotation_distance(R) for R in rots]
    assert all(np.allclose(R @ R.T, np.eye(3), atol=1e-14) for R in rots)
    assert d == sorted(d) and d[0] > 0


def test_rotation_modulus(q_small, rand_field):
    assert rotation_modulus(SphereField.constant(q_small), 0.5) < 1e-12
    f = rand_field(q_small, 3, 1)
    assert rotation_modulus(f, 0.5) > 0
    with pytest.raises(ValueError):
        rotation_modulus(f, 1.0)


def test_modulus_dominates(q_small):
    f = random_field(q_small, 3, 9)
    a = modulus(f)
    assert np.allclose(a.values, np.abs(f.values))
    pts = np.random.default_rng(1).normal(size=(40, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    assert np.all(np.abs(f.evaluate(pts)) <= a.evaluate(pts) + 1e-12)


def test_evaluate_reproduces_node_values(q_small):
    f = random_field(q_small, 4, 4)
    assert np.abs(f.evaluate(q_small.nodes) - f.values).max() < 1e-12


def test_spectrum_csv_roundtrip(tmp_path, q_small):
    s = analyze(random_field(q_small, 4, 8), 4)
    p = tmp_path / "s.csv"
    write_spectrum_csv(s, p)
    assert p.read_text().splitlines()[0] == "l,m,re,im"
    back = read_spectrum_csv(p)
    assert back.L == s.L and np.array_equal(back.coefficients, s.coefficients)


def test_integral_of_harmonic(q_small):
    assert abs(integrate_sphere(q_small, harmonic_field(q_small, 2, 1).values)) < 1e-14
    assert integrate_sphere(q_small, harmonic_field(q_small, 0, 0).values) == pytest.approx(
        math.sqrt(4 * math.pi))
