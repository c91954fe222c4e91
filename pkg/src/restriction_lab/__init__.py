"""Numerical laboratory for the adjoint Fourier restriction functional on S^2."""

from .convolution import (BallField, circle_points, convolve_pair, euler_lagrange_map,
                          l2_norm_ball, triple_restrict, trilinear)
from .functional import (FunctionalReport, el_residual, functional_report, lambda_oracle,
                         lambda_value, multiplier_estimate, q_value)
from .harmonics import (HarmonicSpectrum, SphereField, analyze, modulus, rotation_modulus,
                        smooth_split, sobolev_norm, synthesize)
from .phase import (CharacterFit, extension_argmax, factorization_defect, fit_character,
                    modulate)
from .quadrature import (BallGrid, SphereQuadrature, build_ball_grid, build_sphere_quadrature,
                         integrate_ball, integrate_sphere)
from .solver import (CriticalPointReport, Resolution, SolverConfig, contraction_solve,
                     perturbation_study, power_iterate)

__version__ = "0.1.0"
