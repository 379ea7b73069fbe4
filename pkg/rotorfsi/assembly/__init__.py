from __future__ import annotations

from rotorfsi.assembly.dofs import BoundaryCondition
from rotorfsi.assembly.dofs import build_constraints
from rotorfsi.assembly.dofs import build_dofmap
from rotorfsi.assembly.dofs import DirichletSet
from rotorfsi.assembly.dofs import DofMap
from rotorfsi.assembly.dofs import InconsistentConstraint
from rotorfsi.assembly.elements import QuadratureOnInvertedElement
from rotorfsi.assembly.stvk import linearization_consistency_check
from rotorfsi.assembly.system import apply_master_slave_and_dirichlet
from rotorfsi.assembly.system import assemble_fluid_blocks
from rotorfsi.assembly.system import assemble_structure_blocks
from rotorfsi.assembly.system import assemble_system
from rotorfsi.assembly.system import AssemblyOptions
from rotorfsi.assembly.system import DegenerateSystem
from rotorfsi.assembly.system import FieldSet
from rotorfsi.assembly.system import FullSystem
from rotorfsi.assembly.system import MaterialParams
from rotorfsi.assembly.system import MonolithicSystem

__all__ = [
    "apply_master_slave_and_dirichlet",
    "assemble_fluid_blocks",
    "assemble_structure_blocks",
    "assemble_system",
    "AssemblyOptions",
    "BoundaryCondition",
    "build_constraints",
    "build_dofmap",
    "DegenerateSystem",
    "DirichletSet",
    "DofMap",
    "FieldSet",
    "FullSystem",
    "InconsistentConstraint",
    "linearization_consistency_check",
    "MaterialParams",
    "MonolithicSystem",
    "QuadratureOnInvertedElement",
]
