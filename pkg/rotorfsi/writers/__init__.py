from __future__ import annotations

from rotorfsi.writers.checkpoint import Checkpoint
from rotorfsi.writers.checkpoint import checkpoint_from_state
from rotorfsi.writers.checkpoint import read_checkpoint
from rotorfsi.writers.checkpoint import write_checkpoint
from rotorfsi.writers.series import ProbeSeries
from rotorfsi.writers.series import read_csv
from rotorfsi.writers.series import select_tip_node
from rotorfsi.writers.series import write_csv
from rotorfsi.writers.series import write_sweep_csv
from rotorfsi.writers.vtk import read_vtk
from rotorfsi.writers.vtk import VtkSnapshot
from rotorfsi.writers.vtk import write_vtk
from rotorfsi.writers.vtk import write_vtk_snapshot

__all__ = [
    "Checkpoint",
    "checkpoint_from_state",
    "ProbeSeries",
    "read_checkpoint",
    "read_csv",
    "read_vtk",
    "select_tip_node",
    "VtkSnapshot",
    "write_checkpoint",
    "write_csv",
    "write_sweep_csv",
    "write_vtk",
    "write_vtk_snapshot",
]
