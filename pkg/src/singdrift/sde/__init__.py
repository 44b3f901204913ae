"""Stochastic paths driven by bounded (mollified) drifts and their functionals."""

from .functionals import (
    FunctionalReport,
    drift_integral_pde,
    duality_check,
    expected_drift_integral,
    krylov_functional,
    marginal_distance,
    modulus_of_continuity,
    occupation_near_origin,
    spacetime_lattice_norm,
)
from .rng import BRIDGE_DOMAIN, STEP_DOMAIN, bridge_normals, path_generator, path_key, step_normals, stream_id
from .simulate import MICRO_NOISE_BUDGET, PathEnsemble, SimConfig, simulate_euler

__all__ = [
    "BRIDGE_DOMAIN", "STEP_DOMAIN", "MICRO_NOISE_BUDGET",
    "FunctionalReport", "PathEnsemble", "SimConfig",
    "bridge_normals", "drift_integral_pde", "duality_check", "expected_drift_integral",
    "krylov_functional", "marginal_distance", "modulus_of_continuity", "occupation_near_origin",
    "path_generator", "path_key", "simulate_euler", "spacetime_lattice_norm", "step_normals", "stream_id",
]
