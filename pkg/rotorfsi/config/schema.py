"""Sections, keys, defaults and validators of a run configuration.

A key with no entry in :data:`DEFAULTS` is required. The order of
:data:`SECTIONS` and of every key list is the serialization order.
"""
from __future__ import annotations

from rotorfsi.ale import ALE_OPERATORS
from rotorfsi.ale import MATCHING_RULES
from rotorfsi.assembly.dofs import CORNER_POLICIES
from rotorfsi.assembly.system import COUPLINGS
from rotorfsi.assembly.system import LINEARIZATIONS
from rotorfsi.config.validator import Validator
from rotorfsi.linsolve.monolithic import METHODS
from rotorfsi.linsolve.monolithic import PRECONDITIONERS

SECTIONS: dict[str, tuple[str, ...]] = {
    "geometry": (
        "length",
        "width",
        "arm_length",
        "arm_width",
        "buffer_radius",
        "center",
        "axis_radius",
    ),
    "materials": (
        "fluid_density",
        "fluid_viscosity",
        "solid_density",
        "young_modulus",
        "poisson_ratio",
    ),
    "loop": (
        "dt",
        "t_end",
        "relaxation",
        "tolerance",
        "newton_tolerance",
        "max_sweeps",
        "max_newton",
        "coupling",
    ),
    "rotation": ("angular_velocity", "schedule", "initial_angle"),
    "inflow": ("peak_velocity", "ramp_time"),
    "discretization": (
        "h",
        "ring_nodes",
        "grading",
        "pressure_stabilization",
        "supg",
        "viscous_factor",
        "linearization",
        "convection",
        "corner_policy",
    ),
    "ale": ("operator", "matching"),
    "solver": (
        "method",
        "tolerance",
        "restart",
        "max_iterations",
        "preconditioner",
        "inner_tolerance",
        "inner_max_iterations",
        "inner_sweeps",
        "lu_fallback",
        "dump_matrices",
        "residual_history",
    ),
    "output": ("directory", "vtk_every", "checkpoint_every", "probe"),
    "sweep": ("moduli",),
}

DEFAULTS: dict[str, object] = {
    "loop.relaxation": 0.7,
    "loop.tolerance": 1e-6,
    "loop.newton_tolerance": 1e-8,
    "loop.max_sweeps": 50,
    "loop.max_newton": 10,
    "loop.coupling": "fsi",
    "rotation.schedule": [],
    "rotation.initial_angle": 0.0,
    "inflow.ramp_time": 0.2,
    "discretization.ring_nodes": 0,
    "discretization.grading": 0.3,
    "discretization.pressure_stabilization": 0.1,
    "discretization.supg": 1.0,
    "discretization.viscous_factor": 2.0,
    "discretization.linearization": "newton",
    "discretization.convection": True,
    "discretization.corner_policy": "priority",
    "ale.operator": "harmonic",
    "ale.matching": "forward",
    "solver.method": "fgmres",
    "solver.tolerance": 1e-8,
    "solver.restart": 50,
    "solver.max_iterations": 500,
    "solver.preconditioner": "block",
    "solver.inner_tolerance": 1e-2,
    "solver.inner_max_iterations": 100,
    "solver.inner_sweeps": 1,
    "solver.lu_fallback": True,
    "solver.dump_matrices": False,
    "solver.residual_history": False,
    "output.directory": "out",
    "output.vtk_every": 0.1,
    "output.checkpoint_every": 0,
    "output.probe": "tip",
    "sweep.moduli": [2.5e4, 2.5e5, 2.5e6, 2.5e7, 2.5e8, 2.5e9],
}

# keys that may stay unset after validation
OPTIONAL = ("rotation.angular_velocity",)

REQUIRED = tuple(
    f"{section}.{key}"
    for section, keys in SECTIONS.items()
    for key in keys
    if f"{section}.{key}" not in DEFAULTS
    and f"{section}.{key}" not in OPTIONAL
)


def _floats(value):
    return [float(item) for item in value]


def _schedule(value):
    return [[float(start), float(omega)] for start, omega in value]


def _increasing(value):
    return all(b > a for a, b in zip(value, value[1:]))


def _poisson(value):
    return 0.0 < value < 0.5


def _positive_all(value):
    return all(item > 0 for item in value)


def _schedule_starts(value):
    return _increasing([start for start, _ in value])


def _positive(*names: str, **extra) -> Validator:
    return Validator(*names, cast=float, gt=0, **extra)


def build_validators() -> list[Validator]:
    """Validators in the order their failures are reported"""
    required = Validator(*REQUIRED, must_exist=True)
    rotation = Validator(
        "rotation.angular_velocity", must_exist=True
    ) | Validator("rotation.schedule", len_min=1)
    return [
        required,
        _positive(
            "geometry.length",
            "geometry.width",
            "geometry.arm_length",
            "geometry.arm_width",
            "geometry.buffer_radius",
            "geometry.axis_radius",
        ),
        Validator("geometry.center", cast=_floats, len_eq=2),
        _positive(
            "materials.fluid_density",
            "materials.fluid_viscosity",
            "materials.solid_density",
            "materials.young_modulus",
        ),
        Validator(
            "materials.poisson_ratio",
            cast=float,
            condition=_poisson,
            messages={"condition": "ν must satisfy 0 < ν < 0.5"},
        ),
        _positive("loop.dt"),
        Validator("loop.t_end", cast=float, gte=0),
        Validator("loop.relaxation", cast=float, gt=0, lte=1),
        _positive("loop.tolerance", "loop.newton_tolerance"),
        Validator(
            "loop.max_sweeps", "loop.max_newton", is_type_of=int, gte=1
        ),
        Validator("loop.coupling", is_in=COUPLINGS),
        rotation,
        Validator("rotation.angular_velocity", cast=float),
        Validator(
            "rotation.schedule",
            cast=_schedule,
            condition=_schedule_starts,
            messages={
                "condition": "rotation.schedule start times must increase"
            },
        ),
        Validator("rotation.initial_angle", cast=float),
        Validator("inflow.peak_velocity", cast=float, gte=0),
        Validator("inflow.ramp_time", cast=float, gte=0),
        _positive("discretization.h"),
        Validator("discretization.ring_nodes", is_type_of=int, gte=0),
        Validator("discretization.grading", cast=float, gte=0, lte=1),
        Validator(
            "discretization.pressure_stabilization",
            "discretization.supg",
            cast=float,
            gte=0,
        ),
        _positive("discretization.viscous_factor"),
        Validator("discretization.linearization", is_in=LINEARIZATIONS),
        Validator("discretization.convection", is_type_of=bool),
        Validator("discretization.corner_policy", is_in=CORNER_POLICIES),
        Validator("ale.operator", is_in=ALE_OPERATORS),
        Validator("ale.matching", is_in=MATCHING_RULES),
        Validator("solver.method", is_in=METHODS),
        _positive("solver.tolerance", "solver.inner_tolerance"),
        Validator(
            "solver.restart",
            "solver.max_iterations",
            "solver.inner_max_iterations",
            "solver.inner_sweeps",
            is_type_of=int,
            gte=1,
        ),
        Validator("solver.preconditioner", is_in=PRECONDITIONERS),
        Validator(
            "solver.lu_fallback",
            "solver.dump_matrices",
            "solver.residual_history",
            is_type_of=bool,
        ),
        Validator("output.directory", is_type_of=str, len_min=1),
        Validator("output.vtk_every", cast=float, gte=0),
        Validator("output.checkpoint_every", is_type_of=int, gte=0),
        Validator("output.probe", is_in=("tip",)),
        Validator(
            "sweep.moduli",
            cast=_floats,
            len_min=1,
            condition=_ascending_positive,
            messages={
                "condition": "sweep.moduli must be positive and ascending"
            },
        ),
    ]


def _ascending_positive(value):
    return _positive_all(value) and _increasing(value)
