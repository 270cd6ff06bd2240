"""Boundary-control wave system: forward solver, operators, model and recovery."""
from .model import ModelOperator, PotentialEstimate, extract_potential, model_from_factorization, unitary_equivalence_check
from .operators import connecting_direct, connecting_from_response, control_operator, response_operator
from .scenario import Scenario, run_forward, run_inverse
from .system import Control, Potential, WaveField, WaveSystem, solve_wave

__all__ = [
    "Control",
    "ModelOperator",
    "Potential",
    "PotentialEstimate",
    "Scenario",
    "WaveField",
    "WaveSystem",
    "connecting_direct",
    "connecting_from_response",
    "control_operator",
    "extract_potential",
    "model_from_factorization",
    "response_operator",
    "run_forward",
    "run_inverse",
    "solve_wave",
]
