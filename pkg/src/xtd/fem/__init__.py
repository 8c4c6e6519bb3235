"""Small-strain elastoplastic FE kernel on structured hexahedral meshes."""

from .material import (
    LinearHardening,
    PowerHardening,
    Material,
    PlasticState,
    return_mapping,
    return_map_batch,
    von_mises,
)
from .mesh import StructuredHexMesh
from .problem import DirichletBC, SurfaceLoad, ThermalLoad, FeProblem, ParamBinding
from .assembly import FeSystem, assemble_stiffness, assemble_forces
from .solve import newton_solve_increment, solve_history, fe_parametric_sweep, SweepResult

__all__ = [
    "LinearHardening",
    "PowerHardening",
    "Material",
    "PlasticState",
    "return_mapping",
    "return_map_batch",
    "von_mises",
    "StructuredHexMesh",
    "DirichletBC",
    "SurfaceLoad",
    "ThermalLoad",
    "FeProblem",
    "ParamBinding",
    "FeSystem",
    "assemble_stiffness",
    "assemble_forces",
    "newton_solve_increment",
    "solve_history",
    "fe_parametric_sweep",
    "SweepResult",
]
