"""Variational quantities of the extension functional.

``Lambda(f) = ||(f sigma)^||_4^4 / ||f||_2^4`` is computed on the
convolution side through Plancherel, ``||(f sigma)^||_4^4 = (2 pi)^3 ||f sigma * f sigma||_2^2``
(Fourier transform without 2 pi in the exponent).  ``lambda_oracle``
evaluates the same number directly from the Fourier transform.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .convolution import DEFAULT_N_CIRCLE, convolve_pair, euler_lagrange_map, l2_norm_ball
from .harmonics import SphereField
from .quadrature import build_ball_grid, build_sphere_quadrature, compensated_sum

PLANCHEREL = (2.0 * math.pi) ** 3


def default_n_radial(f: SphereField) -> int:
    return max(16, 2 * f.effective_band_limit() + 8)


def _nonzero_norm(f: SphereField) -> float:
    n = f.l2_norm()
    if n == 0.0:
        raise ValueError("field is identically zero")
    return n


def self_convolution_norm(f: SphereField, n_radial: int | None = None,
                          n_circle: int = DEFAULT_N_CIRCLE) -> float:
    """||f sigma * f sigma||_{L^2(R^3)} on a ball grid sharing f's angular rule."""
    grid = build_ball_grid(n_radial or default_n_radial(f), f.quadrature)
    return l2_norm_ball(convolve_pair(f, f, grid, n_circle))


def q_value(f: SphereField, n_radial: int | None = None,
            n_circle: int = DEFAULT_N_CIRCLE) -> float:
    nf = _nonzero_norm(f)
    return self_convolution_norm(f, n_radial, n_circle) / nf**2


def lambda_value(f: SphereField, n_radial: int | None = None,
                 n_circle: int = DEFAULT_N_CIRCLE) -> float:
    nf = _nonzero_norm(f)
    conv = self_convolution_norm(f, n_radial, n_circle)
    return PLANCHEREL * conv**2 / nf**4


def multiplier_estimate(f: SphereField, Tf: SphereField | None = None,
                        n_circle: int = DEFAULT_N_CIRCLE) -> float:
    """Re <T(f), f> / ||f||^4; equals lambda at a critical point."""
    nf = _nonzero_norm(f)
    if Tf is None:
        Tf = euler_lagrange_map(f, n_circle)
    return Tf.inner(f).real / nf**4


def el_residual(f: SphereField, lam: float, Tf: SphereField | None = None,
                n_circle: int = DEFAULT_N_CIRCLE) -> float:
    """||T(f) - lam ||f||^2 f|| / (lam ||f||^3)."""
    if not lam > 0:
        raise ValueError(f"multiplier must be positive, got {lam}")
    nf = _nonzero_norm(f)
    if Tf is None:
        Tf = euler_lagrange_map(f, n_circle)
    diff = Tf.with_values(Tf.values - lam * nf**2 * f.values)
    return diff.l2_norm() / (lam * nf**3)


@dataclass
class FunctionalReport:
    q_value: float
    lambda_value: float
    multiplier_estimate: float
    el_residual_rel: float
    norms: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def functional_report(f: SphereField, n_radial: int | None = None,
                      n_circle: int = DEFAULT_N_CIRCLE) -> FunctionalReport:
    nf = _nonzero_norm(f)
    conv = self_convolution_norm(f, n_radial, n_circle)
    q = conv / nf**2
    Tf = euler_lagrange_map(f, n_circle)
    lam = multiplier_estimate(f, Tf)
    res = el_residual(f, lam, Tf) if lam > 0 else float("nan")
    return FunctionalReport(
        q_value=q,
        lambda_value=PLANCHEREL * conv**2 / nf**4,
        multiplier_estimate=lam,
        el_residual_rel=res,
        norms={"l2_f": nf, "l2_conv": conv},
    )


# -- Fourier side --------------------------------------------------------

def transform_quadrature_degree(xi_max: float, band_limit: int) -> int:
    """Sphere-rule degree resolving exp(-i x.xi) f(x) for |xi| <= xi_max."""
    return int(math.ceil(xi_max + 12.0 * max(xi_max, 1.0) ** (1.0 / 3.0))) + band_limit + 10


def extension_transform(f: SphereField, xis: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """(f sigma)^(xi) = integral of exp(-i x.xi) f(x) dsigma(x) for xi of shape (..., 3).

    f is resampled (through its interpolant) on a rule fine enough for the
    largest |xi| requested.
    """
    xis = np.asarray(xis, dtype=float)
    lead = xis.shape[:-1]
    xis = xis.reshape(-1, 3)
    xi_max = float(np.max(np.linalg.norm(xis, axis=1))) if xis.size else 0.0
    deg = transform_quadrature_degree(xi_max, f.effective_band_limit())
    fine = build_sphere_quadrature(deg // 2 + 1, deg + 1)
    fw = fine.weights * f.evaluate(fine.nodes)
    out = np.empty(xis.shape[0], dtype=complex)
    for s in range(0, xis.shape[0], chunk):
        phase = xis[s:s + chunk] @ fine.nodes.T
        out[s:s + chunk] = np.exp(-1j * phase) @ fw
    return out.reshape(lead)


@dataclass
class OracleResult:
    value: float
    tail_bound: float
    xi_max: float
    n_xi: int


def lambda_oracle(f: SphereField, xi_max: float = 40.0, n_xi: int = 128) -> OracleResult:
    """Lambda(f) from a radial x angular quadrature of |(f sigma)^|^4 on |xi| < xi_max.

    On a sphere of radius r the transform is band-limited in direction to
    f's band limit, so an angular rule of degree 4L is exact.  The omitted
    region |xi| > xi_max is bounded with the large-|xi| envelope
    |(f sigma)^(r w)| <= (2 pi / r)(|f(w)| + |f(-w)|), giving
    tail <= (2 pi)^4 / xi_max * integral of (|f(w)| + |f(-w)|)^4 dsigma(w).
    """
    if xi_max < 20:
        raise ValueError("xi_max must be >= 20")
    if n_xi < 32:
        raise ValueError("n_xi must be >= 32")
    nf = _nonzero_norm(f)
    L = f.effective_band_limit()
    ang = build_sphere_quadrature(2 * L + 2, 4 * L + 4)
    t, w = np.polynomial.legendre.leggauss(n_xi)
    r = 0.5 * xi_max * (t + 1.0)
    wr = 0.5 * xi_max * w * r**2
    xis = r[:, None, None] * ang.nodes[None, :, :]
    amp4 = np.abs(extension_transform(f, xis)) ** 4
    total = compensated_sum((wr[:, None] * ang.weights[None, :] * amp4).reshape(-1))
    env = (np.abs(f.evaluate(ang.nodes)) + np.abs(f.evaluate(-ang.nodes))) ** 4
    tail = (2.0 * math.pi) ** 4 / xi_max * float(compensated_sum(ang.weights * env))
    return OracleResult(float(total) / nf**4, tail / nf**4, float(xi_max), int(n_xi))
