"""Weighted grid solvers for the Kolmogorov operator and their monitors."""

from .grid import SpaceTimeGrid, Weight
from .monitors import (
    EnergyReport,
    FactoredSource,
    FellerReport,
    energy_report,
    feller_convergence,
    gaussian,
    heat_gaussian,
    lp_contraction_check,
    lp_norm,
    max_relative_error,
    smoothing_exponent_fit,
    zero_drift_calibration,
)
from .solver import GridSolution, product_source, solve_backward_terminal, solve_forward_cauchy
