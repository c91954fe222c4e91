"""Real spherical harmonics, fields sampled on sphere quadratures, and the
spectral norms used to diagnose smoothness.

Coefficients are stored flat with index ``l*l + l + m``.  The real basis is
orthonormal on S^2: ``Y[l,0]`` is the zonal harmonic, ``Y[l,m]`` (m > 0)
carries ``cos(m*phi)`` and ``Y[l,-m]`` carries ``sin(m*phi)``; no
Condon-Shortley phase.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .quadrature import SphereQuadrature, compensated_sum, integrate_sphere

FOUR_PI = 4.0 * math.pi
TRIM_RTOL = 1e-15


class ResolutionError(ValueError):
    """Requested accuracy is not reachable at the working band limit."""


def n_coeffs(L: int) -> int:
    return (L + 1) ** 2


def lm_index(l: int, m: int) -> int:
    return l * l + l + m


def degrees(L: int) -> np.ndarray:
    """Degree l of every flat coefficient index up to band limit L."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(L + 1)])


def real_sph_harm(L: int, points: np.ndarray) -> np.ndarray:
    """Evaluate all real orthonormal harmonics of degree <= L.

    ``points`` are unit vectors of shape (..., 3); the result has shape
    (..., (L+1)**2).  Works from Cartesian coordinates so the poles need no
    special casing.
    """
    p = np.asarray(points, dtype=float)
    lead = p.shape[:-1]
    p = p.reshape(-1, 3)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    # filled row-per-harmonic; returned transposed (Fortran order)
    out = np.empty((n_coeffs(L), p.shape[0]))
    # (x + i y)**m split into real/imag parts, built incrementally
    cm = np.ones_like(x)
    sm = np.zeros_like(x)
    qmm = math.sqrt(1.0 / FOUR_PI)
    for m in range(L + 1):
        if m > 0:
            cm, sm = cm * x - sm * y, cm * y + sm * x
            qmm *= math.sqrt((2 * m + 1) / (2.0 * m))
            cm2, sm2 = math.sqrt(2.0) * cm, math.sqrt(2.0) * sm
        # q_l^m(z): normalised associated Legendre with sin**m factored out
        q_prev2 = None
        q_prev = np.full_like(z, qmm)
        for l in range(m, L + 1):
            if l == m:
                q = q_prev
            elif l == m + 1:
                q = math.sqrt(2 * m + 3) * z * q_prev
            else:
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                q = a * (z * q_prev - b * q_prev2)
            if l > m:
                q_prev2, q_prev = q_prev, q
            if m == 0:
                out[lm_index(l, 0)] = q
            else:
                np.multiply(q, cm2, out=out[lm_index(l, m)])
                np.multiply(q, sm2, out=out[lm_index(l, -m)])
    return out.T.reshape(lead + (n_coeffs(L),))


def rotate_coeffs_about_z(coeffs: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Coefficients of ``x -> f(R_z(alpha) x)`` for each alpha.

    Returns shape ((L+1)**2, len(alphas)).
    """
    c = np.asarray(coeffs)
    L = int(round(math.sqrt(c.shape[0]))) - 1
    alphas = np.asarray(alphas, dtype=float)
    out = np.empty((c.shape[0], alphas.shape[0]), dtype=np.result_type(c, float))
    for l in range(L + 1):
        out[lm_index(l, 0)] = c[lm_index(l, 0)]
        for m in range(1, l + 1):
            cos, sin = np.cos(m * alphas), np.sin(m * alphas)
            ap, am = c[lm_index(l, m)], c[lm_index(l, -m)]
            out[lm_index(l, m)] = cos * ap + sin * am
            out[lm_index(l, -m)] = cos * am - sin * ap
    return out


@lru_cache(maxsize=32)
def _node_basis(q: SphereQuadrature, L: int) -> np.ndarray:
    Y = real_sph_harm(L, q.nodes)
    Y.setflags(write=False)
    return Y


@dataclass(frozen=True)
class HarmonicSpectrum:
    band_limit: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (n_coeffs(self.band_limit),):
            raise ValueError(
                f"band limit {self.band_limit} needs {n_coeffs(self.band_limit)} "
                f"coefficients, got {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def L(self) -> int:
        return self.band_limit

    def coeff(self, l: int, m: int) -> complex:
        return complex(self.coefficients[lm_index(l, m)])

    def degree_energies(self) -> np.ndarray:
        """Energy sum_m |a_lm|^2 for each degree l = 0..L."""
        e = np.abs(self.coefficients) ** 2
        return np.array([e[l * l:(l + 1) ** 2].sum() for l in range(self.L + 1)])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def truncated(self, L: int) -> "HarmonicSpectrum":
        if L >= self.L:
            c = np.zeros(n_coeffs(L), dtype=complex)
            c[: self.coefficients.size] = self.coefficients
            return HarmonicSpectrum(L, c)
        return HarmonicSpectrum(L, self.coefficients[: n_coeffs(L)].copy())

    def trimmed(self, rtol: float = TRIM_RTOL) -> "HarmonicSpectrum":
        """Drop trailing degrees whose amplitude is below ``rtol`` of the total."""
        e = self.degree_energies()
        total = e.sum()
        if total == 0.0:
            return self.truncated(0)
        keep = np.nonzero(e > (rtol**2) * total)[0]
        return self.truncated(int(keep[-1]) if keep.size else 0)

    @classmethod
    def from_dict(cls, entries: dict[tuple[int, int], complex], L: int | None = None):
        if L is None:
            L = max(l for l, _ in entries)
        c = np.zeros(n_coeffs(L), dtype=complex)
        for (l, m), v in entries.items():
            if abs(m) > l or l > L:
                raise ValueError(f"invalid index (l={l}, m={m}) for band limit {L}")
            c[lm_index(l, m)] = v
        return cls(L, c)


@dataclass(frozen=True, eq=False)
class SphereField:
    """Complex samples of a function on the nodes of a sphere quadrature.

    Off-node values come from the degree <= ``band_limit`` harmonic
    interpolant.  A field derived pointwise from another field (the modulus
    ``|f|``) keeps a reference to its source and evaluates as
    ``pointwise(source(x))``, which preserves pointwise inequalities.
    """

    quadrature: SphereQuadrature
    values: np.ndarray = field(repr=False)
    band_limit: int | None = None
    source: "SphereField | None" = field(default=None, repr=False)
    pointwise: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    _spectrum: HarmonicSpectrum | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).reshape(-1)
        if v.shape[0] != self.quadrature.size:
            raise ValueError(
                f"field has {v.shape[0]} values for {self.quadrature.size} nodes")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.band_limit is None:
            object.__setattr__(self, "band_limit", self.quadrature.degree // 2)

    # -- construction -------------------------------------------------
    @classmethod
    def from_function(cls, q: SphereQuadrature, fn: Callable[[np.ndarray], np.ndarray],
                      band_limit: int | None = None) -> "SphereField":
        return cls(q, np.broadcast_to(fn(q.nodes), (q.size,)), band_limit)

    @classmethod
    def constant(cls, q: SphereQuadrature, value: complex = 1.0) -> "SphereField":
        spec = HarmonicSpectrum(0, np.array([value * math.sqrt(FOUR_PI)]))
        return cls(q, np.full(q.size, value, dtype=complex), 0, _spectrum=spec)

    def with_values(self, values, band_limit: int | None = None) -> "SphereField":
        """New field on the same nodes; band limit defaults to the rule's maximum."""
        return SphereField(self.quadrature, values, band_limit)

    def scaled(self, c: complex) -> "SphereField":
        spec = None
        if self._spectrum is not None and self.source is None:
            spec = HarmonicSpectrum(self._spectrum.L, c * self._spectrum.coefficients)
        return SphereField(self.quadrature, c * self.values, self.band_limit, _spectrum=spec)

    def conjugate(self) -> "SphereField":
        return SphereField(self.quadrature, np.conj(self.values), self.band_limit)

    # -- spectral view --------------------------------------------------
    def spectrum(self) -> HarmonicSpectrum:
        if self._spectrum is None:
            object.__setattr__(self, "_spectrum", analyze(self, self.band_limit))
        return self._spectrum

    def effective_band_limit(self) -> int:
        if self.source is not None:
            return self.source.effective_band_limit()
        return self.spectrum().trimmed().L

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Interpolated values at arbitrary unit vectors of shape (..., 3)."""
        if self.source is not None:
            return self.pointwise(self.source.evaluate(points))
        spec = self.spectrum().trimmed()
        Y = real_sph_harm(spec.L, points)
        return Y @ spec.coefficients

    def evaluate_rotated(self, Y: np.ndarray, alphas: np.ndarray) -> np.ndarray:
        """Values at ``R_z(alpha_j) p_k`` given the basis ``Y`` at template points.

        ``Y`` has shape (K, (L'+1)**2) for any L' >= effective band limit;
        the result has shape (K, len(alphas)).
        """
        if self.source is not None:
            return self.pointwise(self.source.evaluate_rotated(Y, alphas))
        spec = self.spectrum().trimmed()
        nc = n_coeffs(spec.L)
        if Y.shape[1] < nc:
            raise ValueError("template basis is below the field's band limit")
        A = rotate_coeffs_about_z(spec.coefficients, alphas)
        Yl = Y if Y.shape[1] == nc else np.ascontiguousarray(Y[:, :nc])
        # contiguous real operands keep the product on the BLAS fast path
        out = np.empty((Y.shape[0], A.shape[1]), dtype=complex)
        out.real = Yl @ np.ascontiguousarray(A.real)
        if np.any(A.imag != 0.0):
            out.imag = Yl @ np.ascontiguousarray(A.imag)
        else:
            out.imag = 0.0
        return out

    # -- norms ------------------------------------------------------------
    def inner(self, other: "SphereField") -> complex:
        """<self, other> = integral of self * conj(other)."""
        return complex(integrate_sphere(self.quadrature, self.values * np.conj(other.values)))

    def l2_norm(self) -> float:
        return math.sqrt(float(integrate_sphere(self.quadrature, np.abs(self.values) ** 2)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def modulus(f: SphereField) -> SphereField:
    """The field |f|, evaluated off-node as the modulus of f's interpolant."""
    return SphereField(f.quadrature, np.abs(f.values), f.band_limit,
                       source=f, pointwise=np.abs)


def analyze(f: SphereField, L: int) -> HarmonicSpectrum:
    q = f.quadrature
    if L < 0:
        raise ValueError("band limit must be nonnegative")
    if q.degree < 2 * L:
        raise ResolutionError(
            f"quadrature degree {q.degree} cannot resolve band limit {L} (needs {2 * L})")
    Y = _node_basis(q, L)
    coeffs = Y.T @ (q.weights * f.values)
    return HarmonicSpectrum(L, coeffs)


def synthesize(s: HarmonicSpectrum, q: SphereQuadrature) -> SphereField:
    values = real_sph_harm(s.L, q.nodes) @ s.coefficients
    return SphereField(q, values, s.L, _spectrum=s)


def harmonic_field(q: SphereQuadrature, l: int, m: int, amplitude: complex = 1.0) -> SphereField:
    return synthesize(HarmonicSpectrum.from_dict({(l, m): amplitude}, L=l), q)


def sobolev_norm(s: HarmonicSpectrum, order: float) -> float:
    if order < 0:
        raise ValueError(f"Sobolev order must be >= 0, got {order}")
    l = degrees(s.L)
    w = (1.0 + l * (l + 1.0)) ** order
    return math.sqrt(float(compensated_sum(w * np.abs(s.coefficients) ** 2)))


def rotate_field(f: SphereField, rotation: np.ndarray) -> SphereField:
    """The field ``x -> f(R x)`` sampled on f's own nodes."""
    R = np.asarray(rotation, dtype=float)
    _check_orthogonal(R)
    vals = f.evaluate(f.quadrature.nodes @ R.T)
    return SphereField(f.quadrature, vals, f.band_limit)


def _check_orthogonal(R: np.ndarray, tol: float = 1e-12) -> None:
    if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValueError("rotation matrix is not orthogonal")


def rotation_distance(R: np.ndarray) -> float:
    """Frobenius distance from R to the identity."""
    return float(np.linalg.norm(np.asarray(R) - np.eye(3)))


def axis_angle_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def standard_rotations(n: int = 20) -> list[np.ndarray]:
    """Fixed diagnostic rotations: Fibonacci-lattice axes, log-spaced angles in [1e-3, 1]."""
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    angles = np.logspace(-3.0, 0.0, n)
    out = []
    for k in range(n):
        zc = 1.0 - (2.0 * k + 1.0) / n
        phi = 2.0 * math.pi * k / golden
        r = math.sqrt(1.0 - zc * zc)
        out.append(axis_angle_matrix((r * math.cos(phi), r * math.sin(phi), zc), angles[k]))
    return out


def rotation_modulus(f: SphereField, order: float,
                     rotations: Iterable[np.ndarray] | None = None) -> float:
    """Sampled lower bound for the rotation-modulus seminorm of order ``order``."""
    if not 0.0 < order < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {order}")
    rotations = standard_rotations() if rotations is None else list(rotations)
    best = 0.0
    for R in rotations:
        R = np.asarray(R, dtype=float)
        _check_orthogonal(R)
        d = rotation_distance(R)
        if d == 0.0:
            continue
        diff = rotate_field(f, R).values - f.values
        nrm = math.sqrt(float(integrate_sphere(f.quadrature, np.abs(diff) ** 2)))
        best = max(best, nrm / d**order)
    return best


def smooth_split(f: SphereField, eps: float) -> tuple[SphereField, SphereField]:
    """Split f = phi + g with phi the lowest-degree truncation leaving ||g|| < eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    q = f.quadrature
    spec = f.spectrum()
    Y = _node_basis(q, spec.L)
    for l in range(spec.L + 1):
        part = HarmonicSpectrum(l, spec.coefficients[: n_coeffs(l)].copy())
        phi_vals = Y[:, : n_coeffs(l)] @ part.coefficients
        g_vals = f.values - phi_vals
        g_norm = math.sqrt(float(integrate_sphere(q, np.abs(g_vals) ** 2)))
        if g_norm < eps:
            phi = SphereField(q, phi_vals, l, _spectrum=part)
            return phi, SphereField(q, g_vals, f.band_limit)
    raise ResolutionError(
        f"remainder norm {g_norm:.3e} >= eps={eps:g} even at band limit {spec.L}")


def write_spectrum_csv(s: HarmonicSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "m", "re", "im"])
        for l in range(s.L + 1):
            for m in range(-l, l + 1):
                c = s.coefficients[lm_index(l, m)]
                w.writerow([l, m, f"{c.real:.17g}", f"{c.imag:.17g}"])


def read_spectrum_csv(path) -> HarmonicSpectrum:
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["l", "m", "re", "im"]:
            raise ValueError(f"{path}: expected header l,m,re,im")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                l, m = int(row[0]), int(row[1])
                entries[(l, m)] = complex(float(row[2]), float(row[3]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if l < 0 or abs(m) > l:
                raise ValueError(f"{path}:{lineno}: invalid index l={l}, m={m}")
    if not entries:
        raise ValueError(f"{path}: no coefficients")
    return HarmonicSpectrum.from_dict(entries)
