"""Prescribed rotor rotation and the rotation/deformation split.

A structure displacement ``u_s`` is written as::

    u_s = (R - I)(x - x0) + R u_d

where the first term is the rigid rotational part and ``u_d`` is the
deformation seen in the co-rotating frame. All functions here work on
nodal arrays of shape ``(n, 2)`` (a single point ``(2,)`` is accepted
too) and never reduce the angle modulo 2*pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class RotationSpec:
    """Active rotation about ``center`` with a piecewise constant
    angular velocity.

    :param center: rotation center in meters.
    :param schedule: ``(t_start, omega)`` pairs with strictly increasing
        start times; ``omega`` holds from its start until the next one.
    :param initial_angle: angle at t = 0 in radians.
    """

    center: tuple[float, float]
    schedule: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    initial_angle: float = 0.0

    def __post_init__(self):
        schedule = tuple(
            (float(start), float(omega)) for start, omega in self.schedule
        )
        if not schedule:
            raise ValueError("rotation schedule cannot be empty")
        starts = [start for start, _ in schedule]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule start times must increase strictly")
        if not all(math.isfinite(w) for _, w in schedule):
            raise ValueError("angular velocities must be finite")
        object.__setattr__(self, "schedule", schedule)
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )
        object.__setattr__(self, "initial_angle", float(self.initial_angle))

    @classmethod
    def constant(
        cls,
        center: Sequence[float],
        omega: float,
        initial_angle: float = 0.0,
    ) -> RotationSpec:
        return cls(
            center=(center[0], center[1]),
            schedule=((0.0, omega),),
            initial_angle=initial_angle,
        )

    def angular_velocity(self, t: float) -> float:
        """omega(t), taken from the right at schedule breakpoints"""
        omega = self.schedule[0][1]
        for start, value in self.schedule:
            if start <= t:
                omega = value
            else:
                break
        return omega

    def angle(self, t: float) -> float:
        """theta(t) = theta(0) + integral of omega, exact per segment"""
        theta = self.initial_angle
        first_start, first_omega = self.schedule[0]
        # before the first segment the first rate is extrapolated
        if t <= first_start:
            return theta + first_omega * t
        theta += first_omega * first_start
        for index, (start, omega) in enumerate(self.schedule):
            if start >= t:
                break
            if index + 1 < len(self.schedule):
                stop = min(t, self.schedule[index + 1][0])
            else:
                stop = t
            theta += omega * (stop - start)
        return theta

    def direction(self, t: float) -> int:
        """+1 for counterclockwise (or no) rotation, -1 for clockwise"""
        return -1 if self.angular_velocity(t) < 0 else 1

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_matrix_derivative(theta: float) -> np.ndarray:
    """dR/dtheta"""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-s, -c], [c, -s]])


def _as_points(points) -> tuple[np.ndarray, bool]:
    array = np.asarray(points, dtype=float)
    single = array.ndim == 1
    return np.atleast_2d(array), single


def _restore(values: np.ndarray, single: bool) -> np.ndarray:
    return values[0] if single else values


def rotational_displacement(points, spec: RotationSpec, t: float):
    """(R(theta(t)) - I)(x - x0) for every reference point"""
    array, single = _as_points(points)
    rotation = rotation_matrix(spec.angle(t))
    offset = array - spec.origin
    return _restore(offset @ rotation.T - offset, single)


def decompose_displacement(displacement, points, spec: RotationSpec, t: float):
    """Deformation part u_d = R^T (u_s - u_theta)"""
    u_s, single = _as_points(displacement)
    rotation = rotation_matrix(spec.angle(t))
    u_theta = np.atleast_2d(rotational_displacement(points, spec, t))
    # row-wise R^T x is x @ R
    return _restore((u_s - u_theta) @ rotation, single)


def recompose_displacement(deformation, points, spec: RotationSpec, t: float):
    """u_s = R u_d + u_theta, inverse of :func:`decompose_displacement`"""
    u_d, single = _as_points(deformation)
    rotation = rotation_matrix(spec.angle(t))
    u_theta = np.atleast_2d(rotational_displacement(points, spec, t))
    return _restore(u_d @ rotation.T + u_theta, single)


def dirichlet_velocity_on_axis(spec: RotationSpec, t: float, points):
    """Velocity of the prescribed rotation, omega R'(theta)(x - x0).

    The derivative of the rotational displacement; tangential to the
    circle through the rotated point.
    """
    array, single = _as_points(points)
    omega = spec.angular_velocity(t)
    derivative = rotation_matrix_derivative(spec.angle(t))
    return _restore(omega * (array - spec.origin) @ derivative.T, single)
