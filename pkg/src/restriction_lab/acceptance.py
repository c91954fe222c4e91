"""Acceptance suite: the exit criteria of the lab, runnable from pytest or the CLI."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .convolution import convolve_pair, euler_lagrange_map, trilinear
from .functional import el_residual, lambda_oracle, lambda_value, multiplier_estimate, q_value
from .harmonics import (HarmonicSpectrum, SphereField, axis_angle_matrix, degrees, modulus,
                        n_coeffs, rotate_field, sobolev_norm, synthesize, analyze)
from .phase import factorization_defect, fit_character, modulate
from .quadrature import build_ball_grid, build_sphere_quadrature
from .solver import (Resolution, SolverConfig, contraction_solve, perturbed_constant,
                     power_iterate)

TWO_PI = 2.0 * math.pi

# Largest trilinear ratios over the 100 seeded triples of criterion 10,
# measured once at the default resolution.  Both equal 2 pi, attained by a
# triple of constants (T(1, 1, 1) = 8 pi^2 against ||1||^3 = (4 pi)^{3/2}).
TRILINEAR_BASELINE = {0.0: 6.283185307179586, 0.5: 6.283185307179586}
TRILINEAR_SLACK = 1.05
TRILINEAR_SEED = 20100617


@dataclass
class CriterionResult:
    number: int
    name: str
    expected: str
    actual: str
    tolerance: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number:2d}. {self.name}: expected {self.expected}, "
                f"actual {self.actual}, tol {self.tolerance} ({self.seconds:.1f}s)")

    def to_dict(self) -> dict:
        return asdict(self)


class Context:
    """Shared fixtures: resolutions and the converged critical point."""

    def __init__(self, quick: bool = False):
        self.quick = quick
        self.resolution = Resolution(10, 20, 16, 16, 4) if quick else Resolution()
        self.q = self.resolution.quadrature()
        self.ball = build_ball_grid(self.resolution.n_radial, self.q)
        self._converged = None

    def solver_config(self, **kw) -> SolverConfig:
        return SolverConfig(resolution=self.resolution, seed=7, **kw)

    def initial_perturbed(self) -> SphereField:
        return perturbed_constant(self.q, self.resolution.L, 0.05, 7)

    def converged(self):
        if self._converged is None:
            self._converged = power_iterate(self.initial_perturbed(), self.solver_config())
        return self._converged


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def sample_fields(q, complex_fields: bool = True, n: int = 5, L: int = 4) -> list[SphereField]:
    """Five fixed fields: constant, a real zonal bump, and seeded random spectra."""
    fields = [SphereField.constant(q)]
    zonal = HarmonicSpectrum.from_dict({(0, 0): math.sqrt(4 * math.pi), (2, 0): 0.6}, L=2)
    fields.append(synthesize(zonal, q))
    rng = np.random.default_rng(1234)
    while len(fields) < n:
        decay = np.exp(-0.35 * degrees(L))
        c = rng.standard_normal(n_coeffs(L)) * decay
        if complex_fields:
            c = c + 1j * rng.standard_normal(n_coeffs(L)) * decay
        c[0] += 2.0
        fields.append(synthesize(HarmonicSpectrum(L, c), q))
    return fields


# -- criteria -----------------------------------------------------------------

def criterion_constant_density(ctx: Context) -> CriterionResult:
    one = SphereField.constant(ctx.q)
    b = convolve_pair(one, one, ctx.ball, n_circle=64)
    exact = TWO_PI / ctx.ball.radial_nodes[:, None]
    err = float(np.max(np.abs(b.values - exact) / exact))
    # Monte Carlo: z = x + x' for independent uniform x, x'; if the density of
    # sigma*sigma is c/|z|, |z| has density c r / (4 pi) on (0, 2), so
    # E|z| = 2c / (3 pi) and Var|z| = 2 - (4/3)^2 when c = 2 pi.
    n = 10**6 if ctx.quick else 10**7
    rng = np.random.default_rng(42)
    total, chunk = 0.0, 10**6
    hist = np.zeros(20)
    for s in range(0, n, chunk):
        m = min(chunk, n - s)
        x = rng.standard_normal((m, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        y = rng.standard_normal((m, 3))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        r = np.linalg.norm(x + y, axis=1)
        total += r.sum()
        hist += np.histogram(r, bins=20, range=(0.0, 2.0))[0]
    c_hat = 1.5 * math.pi * total / n
    c_se = 1.5 * math.pi * math.sqrt((2.0 - 16.0 / 9.0) / n)
    edges = np.linspace(0.0, 2.0, 21)
    expected = n * (edges[1:] ** 2 - edges[:-1] ** 2) / 4.0
    chi2 = float(np.sum((hist - expected) ** 2 / expected))
    mc_ok = abs(c_hat - TWO_PI) < 5.0 * c_se and chi2 < 60.0  # 19 dof
    return CriterionResult(
        1, "constant-density law 2pi/|z|", "rel err <= 1e-8; MC c0 = 2pi",
        f"rel err {err:.2e}; MC c0 {c_hat:.5f} +- {c_se:.1e}, chi2 {chi2:.1f}",
        "1e-8; 5 sigma", err <= 1e-8 and mc_ok,
        details={"max_rel_err": err, "c0_mc": c_hat, "c0_se": c_se, "chi2": chi2})


def criterion_constant_critical_point(ctx: Context) -> CriterionResult:
    one = SphereField.constant(ctx.q)
    T = euler_lagrange_map(one, 64)
    target = 8.0 * math.pi**2
    dev = float(np.max(np.abs(T.values - target)) / target)
    res = el_residual(one, TWO_PI, T)
    lam = multiplier_estimate(one, T)
    ok = dev <= 1e-6 and res <= 1e-6 and abs(lam - TWO_PI) <= 1e-6
    return CriterionResult(
        2, "constant critical point T(1) = 8pi^2",
        "dev<=1e-6, residual<=1e-6, lambda=2pi",
        f"dev {dev:.2e}, residual {res:.2e}, lambda {lam:.12f}", "1e-6", ok,
        details={"deviation": dev, "residual": res, "multiplier": lam})


def criterion_functional_values(ctx: Context) -> CriterionResult:
    one = SphereField.constant(ctx.q)
    q = q_value(one, ctx.resolution.n_radial, 64)
    lam = lambda_value(one, ctx.resolution.n_radial, 64)
    exact_lam = 16.0 * math.pi**4
    oracle = lambda_oracle(one, 40.0, 64 if ctx.quick else 128)
    gap = abs(oracle.value - lam)
    ok = (abs(q - math.sqrt(TWO_PI)) <= 1e-6 and abs(lam / exact_lam - 1.0) <= 1e-4
          and gap <= oracle.tail_bound)
    return CriterionResult(
        3, "functional values at the constant",
        f"q={_fmt(math.sqrt(TWO_PI))}, Lambda={_fmt(exact_lam)}, oracle within tail",
        f"q={q:.10f}, Lambda={lam:.6f}, oracle gap {gap:.3g} <= tail {oracle.tail_bound:.3g}",
        "1e-6 abs; 1e-4 rel; tail bound", ok,
        details={"q": q, "lambda": lam, "oracle": oracle.value, "tail": oracle.tail_bound})


def criterion_symmetries(ctx: Context) -> CriterionResult:
    q = ctx.q if ctx.quick else build_sphere_quadrature(34, 68)
    fields = sample_fields(q, n=3 if ctx.quick else 5)
    rotations = [axis_angle_matrix((1, 2, 3), 0.7), axis_angle_matrix((0, 1, 0), 2.1),
                 axis_angle_matrix((-1, 0.5, 0.2), 4.0)]
    worst, where = 0.0, ""
    for k, f in enumerate(fields):
        base = lambda_value(f)
        variants = {"scale": f.scaled(2.5 - 1.25j), "conj": f.conjugate(),
                    "antipodal": rotate_field(f, -np.eye(3))}
        for j, R in enumerate(rotations):
            variants[f"rot{j}"] = rotate_field(f, R)
        for xi in [(1.0, 0.0, 0.0), (0.0, 2.0, 0.0)]:
            variants[f"mod{xi}"] = modulate(f, xi)
        for name, g in variants.items():
            rel = abs(lambda_value(g) / base - 1.0)
            if rel > worst:
                worst, where = rel, f"field {k} {name}"
    return CriterionResult(
        4, "Lambda symmetry suite", "invariant", f"max rel dev {worst:.2e} ({where})",
        "1e-6 rel", worst <= 1e-6, details={"max_rel_dev": worst})


def criterion_domination(ctx: Context) -> CriterionResult:
    worst = -math.inf
    for f in sample_fields(ctx.q, complex_fields=True)[2:] + _extra_complex(ctx.q):
        F = modulus(f)
        lhs = np.abs(convolve_pair(f, f, ctx.ball, 64).values)
        rhs = convolve_pair(F, F, ctx.ball, 64).values.real
        worst = max(worst, float(np.max(lhs - rhs)))
    return CriterionResult(
        5, "pointwise domination |f*f| <= |f|*|f|", "excess <= 1e-10",
        f"max excess {worst:.2e}", "1e-10", worst <= 1e-10, details={"max_excess": worst})


def _extra_complex(q) -> list[SphereField]:
    rng = np.random.default_rng(99)
    out = []
    for _ in range(2):
        c = rng.standard_normal(n_coeffs(3)) + 1j * rng.standard_normal(n_coeffs(3))
        out.append(synthesize(HarmonicSpectrum(3, c), q))
    return out


def criterion_solver(ctx: Context) -> CriterionResult:
    rep = ctx.converged()
    L = ctx.resolution.L
    tail = rep.tail_fraction(L // 2)
    final_res = rep.residual_history[-1]
    ok = (rep.converged and final_res < 1e-8 and rep.iterations <= 200 and tail < 1e-10
          and rep.min_value >= 1e-3 and rep.evenness_defect < 1e-8)
    return CriterionResult(
        6, "power iteration from perturbed constant",
        "residual<1e-8 in <=200 it, tail<1e-10, min>=1e-3, evenness<1e-8",
        f"residual {final_res:.2e} in {rep.iterations} it, tail {tail:.1e}, "
        f"min {rep.min_value:.4f}, evenness {rep.evenness_defect:.1e}",
        "as stated", ok,
        details={"residual": final_res, "iterations": rep.iterations, "tail": tail,
                 "min_value": rep.min_value, "evenness": rep.evenness_defect,
                 "q": rep.q, "lambda": rep.lam})


def criterion_contraction(ctx: Context) -> CriterionResult:
    rep = ctx.converged()
    c = contraction_solve(rep.final_field, ctx.solver_config(eps_split=0.05)).contraction
    ok = c["contraction_factor"] < 1.0 and c["stayed_in_ball"] and len(c["ratios"]) >= 1
    return CriterionResult(
        7, "contraction on the eps^(3/4) ball", "ratio < 1, stays in ball",
        f"ratio {c['contraction_factor']:.2e}, max dist {max(c['distances_from_center']):.1e} "
        f"<= radius {c['ball_radius']:.3f}", "strict", ok, details=c)


def criterion_phase(ctx: Context) -> CriterionResult:
    F = ctx.converged().final_field
    xi0 = np.array([0.0, 2.0, 0.0])
    m = modulate(F, xi0)
    fit = fit_character(m)
    xi_err = float(np.max(np.abs(fit.xi - xi0)))
    d1 = fit.residual_rel
    d2 = factorization_defect(modulate(m, (1.0, 1.0, 0.0)))
    ok = xi_err <= 1e-3 and d1 < 1e-6 and abs(d1 - d2) <= 1e-8
    return CriterionResult(
        8, "phase factorization c e^{ix.xi} F", "xi=(0,2,0), residual<1e-6, invariant defect",
        f"xi err {xi_err:.1e}, residual {d1:.1e}, defect shift {abs(d1 - d2):.1e}",
        "1e-3; 1e-6; 1e-8", ok, details={"xi": fit.xi.tolist(), "residual": d1, "defect2": d2})


def criterion_oracle(ctx: Context) -> CriterionResult:
    rng = np.random.default_rng(2024)
    worst = -math.inf
    n = 1 if ctx.quick else 3
    rows = []
    for _ in range(n):
        c = rng.standard_normal(n_coeffs(4)) + 1j * rng.standard_normal(n_coeffs(4))
        f = synthesize(HarmonicSpectrum(4, c), ctx.q)
        lv = lambda_value(f)
        o = lambda_oracle(f, 40.0, 128)
        slack = o.tail_bound + 1e-4 * lv - abs(lv - o.value)
        rows.append((lv, o.value, o.tail_bound))
        worst = max(worst, -slack)
    return CriterionResult(
        9, "Plancherel oracle agreement (L=4)", "|diff| <= tail + 1e-4 rel",
        f"worst margin {-worst:.3g}", "tail + 1e-4 rel", worst <= 0.0,
        details={"rows": rows})


def trilinear_ratios(q, n_triples: int = 100, seed: int = TRILINEAR_SEED,
                     n_circle: int = 32) -> dict[float, np.ndarray]:
    rng = np.random.default_rng(seed)
    out = {0.0: [], 0.5: []}
    for _ in range(n_triples):
        hs = []
        for _ in range(3):
            L = int(rng.integers(0, 9))
            c = rng.standard_normal(n_coeffs(L)) + 1j * rng.standard_normal(n_coeffs(L))
            hs.append(synthesize(HarmonicSpectrum(L, c), q))
        h1, h2, h3 = hs
        T = trilinear(h2, h3, h1, n_circle)
        sT = analyze(T, q.degree // 2)
        for s in out:
            denom = math.prod(sobolev_norm(h.spectrum(), s) for h in hs)
            out[s].append(sobolev_norm(sT, s) / denom)
    return {s: np.array(v) for s, v in out.items()}


def criterion_trilinear(ctx: Context) -> CriterionResult:
    ratios = trilinear_ratios(ctx.q, 10 if ctx.quick else 100)
    maxima = {s: float(r.max()) for s, r in ratios.items()}
    ok = all(maxima[s] <= TRILINEAR_BASELINE[s] * TRILINEAR_SLACK for s in maxima)
    return CriterionResult(
        10, "trilinear H^s bound regression",
        f"max ratio <= 1.05 x baseline {TRILINEAR_BASELINE}",
        ", ".join(f"s={s}: {v:.6g}" for s, v in maxima.items()), "x1.05", ok,
        details={"maxima": {str(k): v for k, v in maxima.items()}})


CRITERIA: dict[int, Callable[[Context], CriterionResult]] = {
    1: criterion_constant_density,
    2: criterion_constant_critical_point,
    3: criterion_functional_values,
    4: criterion_symmetries,
    5: criterion_domination,
    6: criterion_solver,
    7: criterion_contraction,
    8: criterion_phase,
    9: criterion_oracle,
    10: criterion_trilinear,
}
QUICK = (1, 2, 3, 5, 6, 7, 8)
# wall-clock budget per criterion, seconds
RUNTIME_LIMITS = {1: 10, 2: 30, 3: 120, 4: 120, 5: 60, 6: 180, 7: 120, 8: 60, 9: 180, 10: 180}


def run_criterion(number: int, ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    result = CRITERIA[number](ctx)
    result.seconds = time.perf_counter() - t
    limit = RUNTIME_LIMITS[number]
    if result.seconds >= limit:
        result.passed = False
        result.details["runtime_limit_exceeded"] = limit
    return result


def run_acceptance(quick: bool = False, numbers=None) -> list[CriterionResult]:
    ctx = Context(quick)
    numbers = numbers or (QUICK if quick else tuple(CRITERIA))
    return [run_criterion(n, ctx) for n in numbers]
