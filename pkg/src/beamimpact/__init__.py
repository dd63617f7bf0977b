"""Sphere-on-beam impact with massless-boundary reduced models.

The package assembles finite-element beam models, reduces them with
residual-flexibility component modes, couples them to a sphere through
frictionless unilateral contact and post-processes the modal response.
"""

from .assembly import (AssembledModel, BeamGeometry, MaterialSpec, ModelError, SphereSpec,
                       assemble_beam, assemble_rod, assemble_sphere)
from .cms import ModalBasis, ReducedModel, ReductionError, build_rom, solve_modes
from .contact import ContactProblem, ContactSolverError, CoupledSystem, InstabilityError
from .scenario import ConfigError, Scenario, load_bundled, parse_scenario
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "AssembledModel", "BeamGeometry", "MaterialSpec", "ModelError", "SphereSpec",
    "assemble_beam", "assemble_rod", "assemble_sphere", "ModalBasis", "ReducedModel",
    "ReductionError", "build_rom", "solve_modes", "ContactProblem", "ContactSolverError",
    "CoupledSystem", "InstabilityError", "ConfigError", "Scenario", "load_bundled",
    "parse_scenario", "Trajectory",
]
