"""Numerical search for critical points of the extension functional.

``power_iterate`` runs the normalised fixed-point map f <- T(f)/||T(f)||,
whose fixed points are exactly the solutions of T(f) = lambda ||f||^2 f.
``contraction_solve`` replays the smooth/small decomposition argument: the
remainder g is recovered as the fixed point of
h <- L(phi, g) + N(phi, h) inside a ball around L(phi, g).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .convolution import euler_lagrange_map, trilinear
from .functional import el_residual, multiplier_estimate, q_value
from .harmonics import (HarmonicSpectrum, SphereField, analyze, degrees, n_coeffs,
                        smooth_split, synthesize)
from .quadrature import SphereQuadrature, build_sphere_quadrature

log = logging.getLogger(__name__)

STAGNATION_WINDOW = 25
STAGNATION_RTOL = 1e-15


class DegenerateIterate(ArithmeticError):
    """T(f) vanished numerically, so the normalised map is undefined."""


@dataclass(frozen=True)
class Resolution:
    n_polar: int = 18
    n_azimuthal: int = 36
    n_radial: int = 24
    n_circle: int = 64
    L: int = 8

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("band limit must be >= 0")
        if self.n_circle < 8:
            raise ValueError("n_circle must be >= 8")
        if min(2 * self.n_polar - 1, self.n_azimuthal - 1) < 2 * self.L:
            raise ValueError(
                f"sphere rule {self.n_polar}x{self.n_azimuthal} cannot resolve band limit {self.L}")

    def quadrature(self) -> SphereQuadrature:
        return build_sphere_quadrature(self.n_polar, self.n_azimuthal)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200
    tol_residual: float = 1e-8
    eps_split: float = 0.05
    ball_radius_exponent: float = 0.75
    seed: int = 0
    resolution: Resolution = field(default_factory=Resolution)

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0 < self.eps_split <= 1:
            raise ValueError("eps_split must lie in (0, 1]")
        if not 0 < self.ball_radius_exponent < 1:
            raise ValueError("ball_radius_exponent must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CriticalPointReport:
    final_field: SphereField
    lam: float
    q: float
    residual_history: list[float]
    spectrum_tail: list[float]
    evenness_defect: float
    min_value: float
    converged: bool
    iterations: int = 0
    q_history: list[float] = field(default_factory=list)
    lambda_history: list[float] = field(default_factory=list)
    stop_reason: str = ""
    contraction: dict | None = None

    def tail_fraction(self, from_degree: int) -> float:
        """Share of spectral energy at degrees > from_degree."""
        e = np.asarray(self.spectrum_tail)
        total = e.sum()
        return float(e[from_degree + 1:].sum() / total) if total > 0 else 0.0

    def to_dict(self) -> dict:
        spec = self.final_field.spectrum()
        d = {
            "lambda": self.lam,
            "q": self.q,
            "converged": self.converged,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "residual_history": list(self.residual_history),
            "q_history": list(self.q_history),
            "lambda_history": list(self.lambda_history),
            "spectrum_tail": list(self.spectrum_tail),
            "evenness_defect": self.evenness_defect,
            "min_value": self.min_value,
            "final_field": {
                "band_limit": spec.L,
                "coefficients_re": spec.coefficients.real.tolist(),
                "coefficients_im": spec.coefficients.imag.tolist(),
            },
        }
        if self.contraction is not None:
            d["contraction"] = self.contraction
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "residual", "q", "lambda"])
            for k, res in enumerate(self.residual_history):
                q = self.q_history[k] if k < len(self.q_history) else float("nan")
                lam = self.lambda_history[k] if k < len(self.lambda_history) else float("nan")
                w.writerow([k, f"{res:.17g}", f"{q:.17g}", f"{lam:.17g}"])


def evenness_defect(f: SphereField) -> float:
    """||f - f(-.)|| / ||f||."""
    flipped = f.evaluate(-f.quadrature.nodes)
    return f.with_values(f.values - flipped).l2_norm() / f.l2_norm()


def project(f: SphereField, L: int) -> SphereField:
    return synthesize(analyze(f, L), f.quadrature)


def _normalized(f: SphereField) -> SphereField:
    n = f.l2_norm()
    return f.scaled(1.0 / n)


def _report(f, lam, q, history, q_hist, lam_hist, converged, iters, reason, L):
    spec = f.spectrum().truncated(L)
    return CriticalPointReport(
        final_field=f,
        lam=lam,
        q=q,
        residual_history=history,
        spectrum_tail=spec.degree_energies().tolist(),
        evenness_defect=evenness_defect(f),
        min_value=float(np.min(f.values.real)),
        converged=converged,
        iterations=iters,
        q_history=q_hist,
        lambda_history=lam_hist,
        stop_reason=reason,
    )


def power_iterate(f0: SphereField, cfg: SolverConfig) -> CriticalPointReport:
    res = cfg.resolution
    L = res.L
    if f0.l2_norm() == 0.0:
        raise ValueError("initial field is zero")
    f = _normalized(project(f0, L))
    history: list[float] = []
    q_hist: list[float] = []
    lam_hist: list[float] = []
    best, best_at = math.inf, 0
    converged, reason = False, "max_iters"
    iters = 0
    while True:
        Tf = euler_lagrange_map(f, res.n_circle)
        tnorm = Tf.l2_norm()
        if not tnorm > 1e-300:
            raise DegenerateIterate("T(f) is numerically zero")
        lam = multiplier_estimate(f, Tf)
        r = el_residual(f, lam, Tf) if lam > 0 else math.inf
        history.append(r)
        lam_hist.append(lam)
        q_hist.append(q_value(f, res.n_radial, res.n_circle))
        log.debug("iter %d residual %.3e lambda %.12g", iters, r, lam)
        if r < cfg.tol_residual:
            converged, reason = True, "tolerance"
            break
        if iters >= cfg.max_iters:
            break
        if r < best * (1.0 - STAGNATION_RTOL):
            best, best_at = r, iters
        elif iters - best_at >= STAGNATION_WINDOW:
            reason = "stagnation"
            break
        f = _normalized(project(Tf, L))
        iters += 1
    return _report(f, lam, q_hist[-1], history, q_hist, lam_hist, converged, iters, reason, L)


def contraction_solve(f: SphereField, cfg: SolverConfig, max_picard: int = 50,
                      floor: float = 1e-13) -> CriticalPointReport:
    """Recover the small part of an approximate critical point by Picard iteration.

    Writes f = phi + g (hard spectral truncation, ||g|| < eps), sets
    a = 1/(lambda ||f||^2) and iterates h <- L(phi, g) + N(phi, h) from h = 0,
    recording the increments and whether every iterate stays within
    eps**ball_radius_exponent of L(phi, g).
    """
    res = cfg.resolution
    nc = res.n_circle
    eps = cfg.eps_split
    phi, g = smooth_split(f, eps)
    g = project(g, res.L) if g.l2_norm() > 0 else g.with_values(np.zeros_like(g.values), 0)
    lam = multiplier_estimate(f, n_circle=nc)
    a = 1.0 / (lam * f.l2_norm() ** 2)
    T_ppp = trilinear(phi, phi, phi, nc)
    lin = -phi.values + a * T_ppp.values
    if g.l2_norm() > 0:
        lin = lin + 3.0 * a * trilinear(phi, phi, g, nc).values
    L_field = f.with_values(lin)
    radius = eps ** cfg.ball_radius_exponent

    def N(h: SphereField) -> np.ndarray:
        if h.l2_norm() == 0.0:
            return np.zeros_like(h.values)
        return 3.0 * a * trilinear(phi, h, h, nc).values + a * trilinear(h, h, h, nc).values

    h = f.with_values(np.zeros_like(f.values), res.L)
    increments: list[float] = []
    distances: list[float] = []
    inside = True
    scale = max(phi.l2_norm(), 1e-300)
    for _ in range(max_picard):
        new = project(f.with_values(L_field.values + N(h)), res.L)
        step = new.with_values(new.values - h.values).l2_norm()
        h = new
        increments.append(step)
        dist = h.with_values(h.values - L_field.values).l2_norm()
        distances.append(dist)
        inside = inside and dist <= radius
        if step <= floor * scale:
            break
    ratios = [increments[k + 1] / increments[k] for k in range(len(increments) - 1)
              if increments[k] > floor * scale]
    refined = f.with_values(phi.values + h.values, res.L)
    rep = _report(refined, multiplier_estimate(refined, n_circle=nc),
                  q_value(refined, res.n_radial, nc),
                  [el_residual(refined, lam, n_circle=nc)], [], [], True, len(increments),
                  "picard", res.L)
    rep.converged = bool(inside and (not ratios or max(ratios) < 1.0))
    rep.contraction = {
        "eps": eps,
        "ball_radius": radius,
        "phi_degree": phi.band_limit,
        "g_norm": g.l2_norm(),
        "linear_term_norm": L_field.l2_norm(),
        "increments": increments,
        "distances_from_center": distances,
        "ratios": ratios,
        "contraction_factor": max(ratios) if ratios else 0.0,
        "stayed_in_ball": inside,
        "h_minus_g": h.with_values(h.values - g.values).l2_norm(),
    }
    return rep


def random_even_perturbation(q: SphereQuadrature, L: int, seed: int) -> SphereField:
    """Real field with random coefficients on even degrees 2..L, L2 norm sqrt(4 pi)."""
    rng = np.random.default_rng(seed)
    c = np.zeros(n_coeffs(L))
    mask = (degrees(L) % 2 == 0) & (degrees(L) > 0)
    c[mask] = rng.standard_normal(int(mask.sum()))
    nrm = np.linalg.norm(c)
    if nrm > 0:
        c *= math.sqrt(4.0 * math.pi) / nrm
    return synthesize(HarmonicSpectrum(L, c), q)


def perturbed_constant(q: SphereQuadrature, L: int, amplitude: float, seed: int) -> SphereField:
    p = random_even_perturbation(q, L, seed)
    c = amplitude * p.spectrum().coefficients
    c[0] += math.sqrt(4.0 * math.pi)
    return synthesize(HarmonicSpectrum(p.spectrum().L, c), q)


def perturbation_study(n_trials: int, amplitude: float, cfg: SolverConfig) -> list[CriticalPointReport]:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    q = cfg.resolution.quadrature()
    reports = []
    for k in range(n_trials):
        f0 = perturbed_constant(q, cfg.resolution.L, amplitude, cfg.seed + k)
        rep = power_iterate(f0, cfg)
        rep.contraction = None
        reports.append(rep)
    return reports


def pairwise_distances(reports: list[CriticalPointReport]) -> np.ndarray:
    fields = [r.final_field for r in reports]
    n = len(fields)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = fields[i].with_values(fields[i].values - fields[j].values).l2_norm()
    return d
