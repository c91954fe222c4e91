"""Convolution of surface measures on S^2.

For 0 < |z| < 2 the pairs (x, x') on S^2 x S^2 with x + x' = z form a
circle of radius sqrt(1 - |z|^2/4) centred at z/2, and

    (f sigma * g sigma)(z) = c0 / |z| * mean over the circle of f(x) g(x'),

with c0 = 2 pi (so that sigma * sigma = 2 pi / |z|).  The circle mean is
discretised by the trapezoid rule, which is exact for band-limited f, g
once ``n_circle`` exceeds the sum of their band limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .harmonics import SphereField, n_coeffs, real_sph_harm
from .quadrature import BALL_RADIUS, BallGrid, integrate_ball

C0 = 2.0 * math.pi
DEFAULT_N_CIRCLE = 64


def circle_frame(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (e1, e2) of the plane orthogonal to each z.

    e1 comes from Gram-Schmidt on the coordinate axis least aligned with z
    (ties to the smallest axis index); e2 = zhat x e1.
    """
    z = np.asarray(z, dtype=float)
    zh = z / np.linalg.norm(z, axis=-1, keepdims=True)
    axis = np.argmin(np.abs(zh), axis=-1)
    a = np.zeros_like(zh)
    np.put_along_axis(a, axis[..., None], 1.0, axis=-1)
    e1 = a - np.sum(a * zh, axis=-1, keepdims=True) * zh
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(zh, e1)
    return e1, e2


def _circle(z: np.ndarray, n: int) -> np.ndarray:
    """Circle points x(theta_k) for every z in a batch: shape (..., n, 3)."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    rho = np.sqrt(np.maximum(1.0 - r2 / 4.0, 0.0))
    e1, e2 = circle_frame(z)
    th = 2.0 * np.pi * np.arange(n) / n
    w = (np.cos(th)[:, None] * e1[..., None, :] + np.sin(th)[:, None] * e2[..., None, :])
    return 0.5 * z[..., None, :] + rho[..., None, None] * w


def circle_points(z, n: int) -> tuple[np.ndarray, np.ndarray]:
    """The n equispaced pairs (x, x') with x + x' = z, both on S^2."""
    z = np.asarray(z, dtype=float)
    if z.shape != (3,):
        raise ValueError("z must be a 3-vector")
    r = float(np.linalg.norm(z))
    if not 0.0 < r < BALL_RADIUS:
        raise ValueError(f"|z| = {r} lies outside (0, 2)")
    if n < 4:
        raise ValueError("need at least 4 circle points")
    x = _circle(z, int(n))
    return x, z[None, :] - x


@dataclass(frozen=True, eq=False)
class BallField:
    """Samples of f sigma * g sigma on a ball grid.

    The factors are retained so the convolution can be re-evaluated exactly
    at any point of the ball (no interpolation between grid nodes).
    """

    grid: BallGrid
    values: np.ndarray = field(repr=False)
    f: SphereField | None = field(default=None, repr=False)
    g: SphereField | None = field(default=None, repr=False)
    n_circle: int = DEFAULT_N_CIRCLE
    scale: complex = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def scaled(self, c: complex) -> "BallField":
        return BallField(self.grid, c * self.values, self.f, self.g, self.n_circle,
                         c * self.scale)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Recompute the circle integral at arbitrary points (..., 3).

        Points with |z| outside (0, 2) give 0 (outside the support, or the
        measure-zero origin).
        """
        if self.f is None or self.g is None:
            raise ValueError("ball field has no retained factors; cannot evaluate off-grid")
        pts = np.asarray(points, dtype=float)
        lead = pts.shape[:-1]
        pts = pts.reshape(-1, 3)
        r = np.linalg.norm(pts, axis=1)
        inside = (r > 0.0) & (r < BALL_RADIUS)
        out = np.zeros(pts.shape[0], dtype=complex)
        if np.any(inside):
            z = pts[inside]
            x = _circle(z, self.n_circle)
            fv = self.f.evaluate(x)
            gv = self.g.evaluate(z[:, None, :] - x)
            out[inside] = self.scale * C0 / r[inside] * np.mean(fv * gv, axis=-1)
        return out.reshape(lead)


def _band(f: SphereField) -> int:
    return f.effective_band_limit()


def _pair_means(f: SphereField, g: SphereField, z_templates: np.ndarray, n_circle: int,
                alphas: np.ndarray) -> np.ndarray:
    """mean_k f(x_k) g(x'_k) on the circle of R_z(alpha_j) z, per template z.

    z_templates: (K, 3).  Returns (K, len(alphas)).  For even ``n_circle``
    the partner x' = z - x of the k-th point is the point half a turn
    away, so g reuses the evaluations made for f.
    """
    x = _circle(z_templates, n_circle)
    K = x.shape[0]
    Lmax = max(_band(f), _band(g))
    Y = real_sph_harm(Lmax, x.reshape(-1, 3))
    fv = f.evaluate_rotated(Y, alphas).reshape(K, n_circle, -1)
    if n_circle % 2 == 0:
        gv = fv if g is f else g.evaluate_rotated(Y, alphas).reshape(K, n_circle, -1)
        gv = np.roll(gv, -(n_circle // 2), axis=1)
    else:
        xp = z_templates[:, None, :] - x
        gv = g.evaluate_rotated(real_sph_harm(Lmax, xp.reshape(-1, 3)), alphas)
        gv = gv.reshape(K, n_circle, -1)
    return np.mean(fv * gv, axis=1)


def convolve_pair(f: SphereField, g: SphereField, grid: BallGrid,
                  n_circle: int = DEFAULT_N_CIRCLE) -> BallField:
    """f sigma * g sigma sampled at every node of ``grid``."""
    if n_circle < 8:
        raise ValueError("n_circle must be >= 8")
    ang = grid.angular
    alphas = ang.azimuths
    rings = ang.ring_nodes()
    values = np.empty(grid.shape, dtype=complex)
    for k, r in enumerate(grid.radial_nodes):
        means = _pair_means(f, g, r * rings, n_circle, alphas)  # (n_polar, n_az)
        values[k] = (C0 / r) * means.reshape(-1)
    return BallField(grid, values, f, g, int(n_circle))


def calibrate_n_circle(grid: BallGrid, n_circle: int = DEFAULT_N_CIRCLE,
                       rtol: float = 1e-8, max_n: int = 4096) -> int:
    """Double n_circle until sigma * sigma matches 2 pi / |z| on the grid."""
    from .harmonics import SphereField

    one = SphereField.constant(grid.angular)
    exact = C0 / grid.radial_nodes[:, None]
    while True:
        b = convolve_pair(one, one, grid, n_circle)
        if np.max(np.abs(b.values - exact) / exact) <= rtol or n_circle >= max_n:
            return n_circle
        n_circle *= 2


def inner_order(total_band: int) -> int:
    """Size of the local polar/azimuthal rule used by triple_restrict."""
    return max(total_band + 2, 4)


def triple_restrict(h: SphereField, pair: BallField, n_inner: int | None = None) -> SphereField:
    """x -> integral over y in S^2 of h(y) * pair(x - y), on h's nodes.

    The y-integral uses coordinates centred at x: y at chordal distance 2u
    from x and azimuth p about x.  In these coordinates the 1/|x - y|
    singularity cancels against the area element (dsigma = 4u du dp), so a
    Gauss-Legendre rule in u and a trapezoid rule in p integrate
    band-limited data exactly.
    """
    if pair.f is None or pair.g is None:
        raise ValueError("pair has no retained factors; cannot evaluate off-grid")
    return _triple(h, pair.f, pair.g, pair.n_circle, pair.scale, n_inner)


def _triple(h: SphereField, f: SphereField, g: SphereField, n_circle: int,
            scale: complex = 1.0, n_inner: int | None = None) -> SphereField:
    q = h.quadrature
    Lh, Lf, Lg = _band(h), _band(f), _band(g)
    n = n_inner or inner_order(Lh + Lf + Lg)
    u, wu = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    p = 2.0 * np.pi * np.arange(n) / n
    wp = 2.0 * np.pi / n
    alphas = q.azimuths
    rings = q.ring_nodes()
    out = np.empty((q.n_polar, q.n_azimuthal), dtype=complex)
    # weight: dsigma / |x - y| * c0 = 4u du dp * c0 / (2u)
    w = (2.0 * C0 * wp) * np.repeat(wu, n)
    s2 = 2.0 * u * np.sqrt(1.0 - u * u)
    cu = 1.0 - 2.0 * u * u
    for i, x in enumerate(rings):
        t1 = np.array([x[2], 0.0, -x[0]])
        t2 = np.array([0.0, 1.0, 0.0])
        tang = np.cos(p)[:, None] * t1 + np.sin(p)[:, None] * t2
        y = cu[:, None, None] * x + s2[:, None, None] * tang[None, :, :]  # (n, n, 3)
        y = y.reshape(-1, 3)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        z = x[None, :] - y
        means = _pair_means(f, g, z, n_circle, alphas)  # (n*n, n_az)
        hv = h.evaluate_rotated(real_sph_harm(Lh, y), alphas)
        out[i] = scale * (w @ (hv * means))
    return SphereField(q, out.reshape(-1), h.band_limit)


def euler_lagrange_map(f: SphereField, n_circle: int = DEFAULT_N_CIRCLE) -> SphereField:
    """T(f) = (f sigma * f sigma * f sigma) restricted to S^2, on f's nodes."""
    return trilinear(f, f, f, n_circle)


def trilinear(u: SphereField, v: SphereField, w: SphereField,
              n_circle: int = DEFAULT_N_CIRCLE) -> SphereField:
    """T3(u, v, w) = triple_restrict(w, convolve_pair(u, v)) without the ball grid."""
    if n_circle < 8:
        raise ValueError("n_circle must be >= 8")
    return _triple(w, u, v, n_circle)


def l2_norm_ball(b: BallField) -> float:
    return math.sqrt(float(integrate_ball(b.grid, np.abs(b.values) ** 2)))


def write_ball_csv(b: BallField, path) -> None:
    """Diagnostic dump: one row per grid node, ``r,theta_index,phi_index,re,im``."""
    q = b.grid.angular
    nr, na = b.values.shape
    r = np.repeat(b.grid.radial_nodes, na)
    ti = np.tile(np.repeat(np.arange(q.n_polar), q.n_azimuthal), nr)
    pj = np.tile(np.tile(np.arange(q.n_azimuthal), q.n_polar), nr)
    v = b.values.ravel()
    with open(path, "w") as fh:
        fh.write("r,theta_index,phi_index,re,im\n")
        for row in zip(r, ti, pj, v.real, v.imag):
            fh.write(f"{row[0]:.17g},{row[1]},{row[2]},{row[3]:.17g},{row[4]:.17g}\n")
