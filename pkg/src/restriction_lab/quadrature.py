"""Quadrature rules on the unit sphere and on the ball of radius 2.

The sphere rule is a tensor product of Gauss-Legendre nodes in the polar
cosine and equispaced nodes in azimuth.  The ball rule adds a Gauss-Legendre
radial factor on (0, 2) whose weights already carry the r**2 Jacobian, so
integrands behaving like |z|**-1 or |z|**-2 near the origin stay bounded
after weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BALL_RADIUS = 2.0


def compensated_sum(terms: np.ndarray, axis: int | None = None) -> np.ndarray | complex:
    """Pairwise sum along ``axis`` in a fixed order (bit-reproducible)."""
    a = np.asarray(terms)
    if axis is None:
        a = a.reshape(-1)
        axis = 0
    a = np.moveaxis(a, axis, 0)
    while a.shape[0] > 1:
        n = a.shape[0]
        half = n // 2
        paired = a[: 2 * half : 2] + a[1 : 2 * half : 2]
        if n % 2:
            paired = np.concatenate([paired, a[-1:]], axis=0)
        a = paired
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:], dtype=a.dtype)
    return a[0]


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Gauss-Legendre x uniform product rule on S^2.

    Nodes are ordered ring by ring: index ``i * n_azimuthal + j`` holds the
    polar node ``i`` at azimuth ``2*pi*j/n_azimuthal``.
    """

    n_polar: int
    n_azimuthal: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    cos_theta: np.ndarray = field(repr=False)
    ring_weights: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return min(2 * self.n_polar - 1, self.n_azimuthal - 1)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def azimuths(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_azimuthal) / self.n_azimuthal

    def ring_nodes(self) -> np.ndarray:
        """Representative node of each polar ring (azimuth 0), shape (n_polar, 3)."""
        s = np.sqrt(1.0 - self.cos_theta**2)
        return np.stack([s, np.zeros_like(s), self.cos_theta], axis=1)

    def __repr__(self) -> str:
        return (f"SphereQuadrature(n_polar={self.n_polar}, "
                f"n_azimuthal={self.n_azimuthal}, degree={self.degree})")


def build_sphere_quadrature(n_polar: int, n_azimuthal: int) -> SphereQuadrature:
    if int(n_polar) != n_polar or int(n_azimuthal) != n_azimuthal:
        raise ValueError("quadrature sizes must be integers")
    if n_polar < 2 or n_azimuthal < 4:
        raise ValueError(
            f"need n_polar >= 2 and n_azimuthal >= 4, got {n_polar}, {n_azimuthal}")
    n_polar, n_azimuthal = int(n_polar), int(n_azimuthal)
    t, w = np.polynomial.legendre.leggauss(n_polar)
    # descending cosine: north ring first
    t, w = t[::-1].copy(), w[::-1].copy()
    phi = 2.0 * np.pi * np.arange(n_azimuthal) / n_azimuthal
    s = np.sqrt(1.0 - t**2)
    nodes = np.empty((n_polar, n_azimuthal, 3))
    nodes[..., 0] = s[:, None] * np.cos(phi)[None, :]
    nodes[..., 1] = s[:, None] * np.sin(phi)[None, :]
    nodes[..., 2] = t[:, None]
    nodes = nodes.reshape(-1, 3)
    # renormalise away the last ulp so |node| == 1 to 1e-16
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    ring_w = w * (2.0 * np.pi / n_azimuthal)
    weights = np.repeat(ring_w, n_azimuthal)
    for a in (nodes, weights, t, ring_w):
        a.setflags(write=False)
    return SphereQuadrature(n_polar, n_azimuthal, nodes, weights, t, ring_w)


def integrate_sphere(q: SphereQuadrature, values) -> complex:
    v = np.asarray(values)
    if v.shape != (q.size,):
        raise ValueError(f"expected {q.size} values, got shape {v.shape}")
    total = compensated_sum(q.weights * v)
    return complex(total) if np.iscomplexobj(v) else float(total)


@dataclass(frozen=True, eq=False)
class BallGrid:
    """Radial Gauss-Legendre rule on (0, 2) times a sphere rule.

    ``radial_weights`` include the r**2 Jacobian.  Values on the grid have
    shape ``(n_radial, angular.size)``.
    """

    radial_nodes: np.ndarray = field(repr=False)
    radial_weights: np.ndarray = field(repr=False)
    angular: SphereQuadrature

    @property
    def n_radial(self) -> int:
        return self.radial_nodes.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_radial, self.angular.size)

    def points(self) -> np.ndarray:
        """All grid points, shape (n_radial, n_angular, 3)."""
        return self.radial_nodes[:, None, None] * self.angular.nodes[None, :, :]


def build_ball_grid(n_radial: int, angular: SphereQuadrature) -> BallGrid:
    if int(n_radial) != n_radial or n_radial < 4:
        raise ValueError(f"need integer n_radial >= 4, got {n_radial}")
    t, w = np.polynomial.legendre.leggauss(int(n_radial))
    r = 0.5 * BALL_RADIUS * (t + 1.0)
    wr = 0.5 * BALL_RADIUS * w * r**2
    for a in (r, wr):
        a.setflags(write=False)
    return BallGrid(r, wr, angular)


def integrate_ball(g: BallGrid, values) -> complex:
    v = np.asarray(values)
    if v.shape != g.shape:
        raise ValueError(f"expected values of shape {g.shape}, got {v.shape}")
    terms = g.radial_weights[:, None] * g.angular.weights[None, :] * v
    total = compensated_sum(terms.reshape(-1))
    return complex(total) if np.iscomplexobj(v) else float(total)


def ball_volume() -> float:
    return 4.0 * math.pi * BALL_RADIUS**3 / 3.0
