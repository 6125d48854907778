"""
Lab Utilities
Flux analysis, Riemann solver, front tracking, characteristics, variation
functionals, verification harness and artifact writers
"""

from .flux_analysis import Flux
from .front_tracking import StepFunction, Trajectory, discretize_initial, evolve
from .riemann import PiecewiseAffineFlux, WaveFan, affine_interpolant, solve_riemann

__all__ = [
    'Flux',
    'PiecewiseAffineFlux',
    'StepFunction',
    'Trajectory',
    'WaveFan',
    'affine_interpolant',
    'discretize_initial',
    'evolve',
    'solve_riemann',
]
