"""Staggered finite-volume solver for the compressible Euler equations.

Density and internal energy live on primal cells, velocity on faces (and
their diamond dual cells).  A corrective source built from the kinetic
energy remainder makes the scheme conservative for the total energy.
"""
from . import kernels
from .errors import ConfigError, MeshError, NonFiniteError, PositivityError, StagError, VacuumError
from .fluxes import FluxSet, InterpolantChoice, compute_fluxes
from .mesh import StaggeredMesh, build_mesh, mesh_from_nodes, regularity, solve_xi_coefficients
from .scheme import CorrectiveSource, RunResult, StepConfig, compute_dt, run, step
from .state import GasConfig, State, apply_eos, initialize

__all__ = [
    "ConfigError",
    "CorrectiveSource",
    "FluxSet",
    "GasConfig",
    "InterpolantChoice",
    "MeshError",
    "NonFiniteError",
    "PositivityError",
    "RunResult",
    "StagError",
    "StaggeredMesh",
    "State",
    "StepConfig",
    "VacuumError",
    "apply_eos",
    "build_mesh",
    "compute_dt",
    "compute_fluxes",
    "initialize",
    "kernels",
    "mesh_from_nodes",
    "regularity",
    "run",
    "solve_xi_coefficients",
    "step",
]
