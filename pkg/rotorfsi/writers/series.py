"""CSV time series: tip probe, stiffness sweep and solver histories.

Every file is comma separated with LF line ends and a header row. Floats
use ``.12e`` so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Iterable
from typing import Sequence

import numpy as np

from rotorfsi.errors import IoError
from rotorfsi.mesh import Mesh
from rotorfsi.mesh import Subdomain
from rotorfsi.rotation import decompose_displacement
from rotorfsi.rotation import RotationSpec

logger = logging.getLogger(__name__)

PROBE_HEADER = ("t", "ud_x", "ud_y", "|ud|")
SWEEP_HEADER = ("E", "t", "ud_x", "ud_y", "|ud|")


def format_number(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".12e")


def write_csv(
    path: str | os.PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence],
) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="ascii") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(value) for value in row])
    except OSError as error:
        raise IoError(f"cannot write {path}: {error}") from error
    return path


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Header and a float array of the rows"""
    path = Path(path)
    try:
        with path.open(newline="", encoding="ascii") as stream:
            rows = list(csv.reader(stream))
    except (OSError, UnicodeDecodeError) as error:
        raise IoError(f"cannot read {path}: {error}") from error
    if not rows:
        raise IoError(f"{path} is empty")
    try:
        body = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    except ValueError as error:
        raise IoError(f"malformed CSV {path}: {error}") from error
    return rows[0], body


def select_tip_node(mesh: Mesh, spec: RotationSpec, arm_width: float):
    """Structure node farthest along the +x arm of the reference rotor"""
    nodes = mesh.nodes_of(Subdomain.STRUCTURE)
    offset = mesh.reference_coords[nodes] - spec.origin
    on_arm = np.abs(offset[:, 1]) <= 0.5 * arm_width * (1 + 1e-9)
    if not np.any(on_arm):
        raise ValueError("no structure node lies on the +x arm")
    candidates = nodes[on_arm]
    return int(candidates[np.argmax(offset[on_arm, 0])])


@dataclass
class ProbeSeries:
    """Deformation displacement of one structure node over time"""

    probe_id: str
    node: int
    location: str
    times: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def tip(
        cls, mesh: Mesh, spec: RotationSpec, arm_width: float
    ) -> ProbeSeries:
        node = select_tip_node(mesh, spec, arm_width)
        x, y = mesh.reference_coords[node]
        return cls(
            probe_id="tip",
            node=node,
            location=f"blade tip node {node} at ({x:.6e}, {y:.6e})",
        )

    def sample(
        self, t: float, displacement: np.ndarray, mesh: Mesh, spec
    ) -> np.ndarray:
        """Record ``u_d`` at the probe node; one sample per time"""
        if self.times and t <= self.times[-1]:
            raise ValueError(
                f"probe times must increase, got {t} after {self.times[-1]}"
            )
        point = mesh.reference_coords[self.node]
        deformation = decompose_displacement(
            displacement[self.node], point, spec, t
        )
        self.times.append(float(t))
        self.values.append(np.asarray(deformation, dtype=float))
        return deformation

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [
            (t, value[0], value[1], float(np.hypot(value[0], value[1])))
            for t, value in zip(self.times, self.values)
        ]

    def write_csv(self, path: str | os.PathLike) -> Path:
        return write_csv(path, PROBE_HEADER, self.rows())


def write_sweep_csv(
    path: str | os.PathLike, series: dict[float, ProbeSeries]
) -> Path:
    rows = [
        (modulus, *row)
        for modulus in sorted(series)
        for row in series[modulus].rows()
    ]
    return write_csv(path, SWEEP_HEADER, rows)
