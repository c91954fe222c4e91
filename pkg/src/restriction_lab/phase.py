"""Modulation symmetry and fitting complex fields by c * exp(i x.xi) * |f|.

The fit never unwraps arg(f): for fixed xi the best unimodular c is the
phase of <f, exp(i x.xi) |f|>, so the misfit reduces to maximising
|G(xi)|, G(xi) = sum_k w_k f_k |f_k| exp(-i x_k.xi).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .functional import extension_transform
from .harmonics import SphereField

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TIE_RTOL = 1e-12


def modulate(f: SphereField, xi) -> SphereField:
    """Multiply by the character exp(i x.xi) node-wise."""
    xi = np.asarray(xi, dtype=float)
    return f.with_values(f.values * np.exp(1j * (f.quadrature.nodes @ xi)))


def _golden_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def extension_argmax(f: SphereField, xi_max: float = 10.0, n_coarse: int = 10,
                     tol: float = 1e-6, max_sweeps: int = 20) -> tuple[np.ndarray, float]:
    """Maximiser of |(f sigma)^| over [-xi_max, xi_max]^3.

    Coarse lattice of spacing xi_max/n_coarse (ties to the lexicographically
    smallest node), then coordinate-wise golden-section ascent.
    """
    if f.l2_norm() == 0.0:
        raise ValueError("field is identically zero")
    h = xi_max / n_coarse
    ax = h * np.arange(-n_coarse, n_coarse + 1)
    lattice = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    amp = np.abs(extension_transform(f, lattice))
    top = amp.max()
    # meshgrid in ij order enumerates lattice nodes lexicographically
    best_idx = int(np.nonzero(amp >= top * (1.0 - TIE_RTOL))[0][0])
    zeta = lattice[best_idx].copy()
    value = float(amp[best_idx])

    def amp_at(x):
        return float(np.abs(extension_transform(f, np.asarray(x)[None, :]))[0])

    for _ in range(max_sweeps):
        moved = 0.0
        for k in range(3):
            def along(t, k=k):
                p = zeta.copy()
                p[k] = t
                return amp_at(p)
            lo = max(zeta[k] - h, -xi_max)
            hi = min(zeta[k] + h, xi_max)
            t, v = _golden_max(along, lo, hi, tol)
            if v > value:
                moved = max(moved, abs(t - zeta[k]))
                zeta[k] = t
                value = v
        if moved < tol:
            break
    return zeta, value


@dataclass
class CharacterFit:
    xi: np.ndarray
    c: complex
    residual_rel: float
    argmax_value: float

    def to_dict(self) -> dict:
        return {
            "xi": [float(v) for v in self.xi],
            "c_re": float(self.c.real),
            "c_im": float(self.c.imag),
            "residual_rel": float(self.residual_rel),
            "argmax_value": float(self.argmax_value),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def character_residual(f: SphereField, xi, c: complex) -> float:
    """||f - c exp(i x.xi) |f||| / ||f||, straight from the nodes."""
    F = np.abs(f.values)
    model = c * np.exp(1j * (f.quadrature.nodes @ np.asarray(xi, dtype=float))) * F
    return f.with_values(f.values - model).l2_norm() / f.l2_norm()


def fit_character(f: SphereField, xi_max: float = 10.0, n_coarse: int = 10) -> CharacterFit:
    F = np.abs(f.values)
    if not np.any(F > 0):
        raise ValueError("|f| vanishes identically")
    nodes = f.quadrature.nodes
    coef = f.quadrature.weights * f.values * F

    def parts(xi):
        e = coef * np.exp(-1j * (nodes @ xi))
        G = e.sum()
        dG = -1j * (nodes.T @ e)
        d2G = -(nodes.T * e) @ nodes
        return G, dG, d2G

    def fun(xi):
        G, dG, _ = parts(xi)
        return -abs(G) ** 2, -2.0 * np.real(np.conj(G) * dG)

    def hess(xi):
        G, dG, d2G = parts(xi)
        return -2.0 * np.real(np.outer(np.conj(dG), dG) + np.conj(G) * d2G)

    zeta, value = extension_argmax(f, xi_max, n_coarse)
    opt = minimize(fun, zeta, jac=True, hess=hess, method="trust-exact",
                   options={"gtol": 1e-14, "maxiter": 200})
    xi = opt.x if -opt.fun >= abs(parts(zeta)[0]) ** 2 else zeta
    G = parts(xi)[0]
    c = G / abs(G) if abs(G) > 0 else 1.0 + 0j
    return CharacterFit(np.asarray(xi, dtype=float), complex(c),
                        character_residual(f, xi, c), value)


def factorization_defect(f: SphereField, xi_max: float = 10.0) -> float:
    return fit_character(f, xi_max).residual_rel
