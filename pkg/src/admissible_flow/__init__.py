"""Admissible Kahler classes, their GQE profiles and the reduced flow toward them."""
from .admissible import (
    AdmissibleData,
    BaseFactor,
    InvariantBundle,
    build_invariants,
    fano_parameters,
    fano_residual,
    koiso_data,
    single_root_check,
)
from .flow import FlowConfig, InitialSpec, decay_fit, init_state, run, step
from .gqe import build_profile, mt, solve_k0, verify_profile
from .polycalc import Polynomial
from .stability import q_function

__version__ = "0.1.0"

__all__ = [
    "AdmissibleData",
    "BaseFactor",
    "InvariantBundle",
    "Polynomial",
    "FlowConfig",
    "InitialSpec",
    "build_invariants",
    "build_profile",
    "decay_fit",
    "fano_parameters",
    "fano_residual",
    "init_state",
    "koiso_data",
    "mt",
    "q_function",
    "run",
    "single_root_check",
    "solve_k0",
    "step",
    "verify_profile",
]
