"""A complete run from a configuration: mesh, time loop and outputs.

The output directory receives

* ``progress.log``: run header and one line per accepted step,
* ``config.toml``: the configuration actually used,
* ``vtk/step_NNNNNN.vtk``: snapshots at the configured time cadence,
* ``probe_tip.csv``: tip deformation displacement after every step,
* ``checkpoints/step_NNNNNN.rfsi`` when checkpoints are enabled,
* ``matrices/`` and ``residuals.csv`` when solver dumps are enabled.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rotorfsi import __version__
from rotorfsi.assembly import BoundaryCondition
from rotorfsi.config import RunConfig
from rotorfsi.config import serialize_config
from rotorfsi.linsolve import write_matrix_market
from rotorfsi.mesh import BoundaryTag
from rotorfsi.mesh import build_rotor_channel_mesh
from rotorfsi.mesh import ChannelRotorGeometry
from rotorfsi.mesh import Mesh
from rotorfsi.timeloop import Simulation
from rotorfsi.timeloop import State
from rotorfsi.timeloop import StepReport
from rotorfsi.writers import checkpoint_from_state
from rotorfsi.writers import ProbeSeries
from rotorfsi.writers import read_checkpoint
from rotorfsi.writers import write_checkpoint
from rotorfsi.writers import write_csv
from rotorfsi.writers import write_vtk_snapshot
from rotorfsi.writers.series import format_number

logger = logging.getLogger(__name__)

PROGRESS_LOGGER = "rotorfsi.progress"
RESIDUAL_HEADER = ("step", "solve", "iteration", "residual")


def cosine_ramp(t: float, ramp_time: float) -> float:
    """Smooth 0 to 1 start, ``(1 - cos(pi t / T)) / 2`` up to ``T``"""
    if ramp_time <= 0 or t >= ramp_time:
        return 1.0
    if t <= 0:
        return 0.0
    return 0.5 * (1.0 - math.cos(math.pi * t / ramp_time))


def channel_conditions(
    geometry: ChannelRotorGeometry, peak_velocity: float, ramp_time: float
) -> list[BoundaryCondition]:
    """Parabolic ramped inflow and no-slip walls; the outlet is free"""
    width = geometry.width

    def inflow(points: np.ndarray, t: float) -> np.ndarray:
        y = points[:, 1]
        profile = 4.0 * peak_velocity * y * (width - y) / width**2
        values = np.zeros_like(points)
        values[:, 0] = profile * cosine_ramp(t, ramp_time)
        return values

    def no_slip(points: np.ndarray, t: float) -> np.ndarray:
        return np.zeros_like(points)

    return [
        BoundaryCondition(BoundaryTag.INLET, inflow),
        BoundaryCondition(BoundaryTag.WALL, no_slip),
    ]


def build_mesh(config: RunConfig, seed: int = 0) -> Mesh:
    section = config["discretization"]
    return build_rotor_channel_mesh(
        config.geometry(),
        section["h"],
        ring_nodes=section["ring_nodes"] or None,
        seed=seed,
        grading=section["grading"],
    )


def build_simulation(config: RunConfig, mesh: Mesh) -> Simulation:
    inflow = config["inflow"]
    return Simulation(
        mesh,
        config.materials(),
        config.rotation(),
        config.loop(),
        options=config.assembly_options(),
        solver=config.solver(),
        conditions=channel_conditions(
            config.geometry(),
            inflow["peak_velocity"],
            inflow["ramp_time"],
        ),
        corner_policy=config["discretization"]["corner_policy"],
        ale_operator=config["ale"]["operator"],
        matching=config["ale"]["matching"],
    )


@dataclass
class RunResult:
    state: State
    probe: ProbeSeries
    reports: list[StepReport]
    directory: Path
    snapshots: list[Path]


def _progress_logger(path: Path) -> tuple[logging.Logger, logging.Handler]:
    progress = logging.getLogger(PROGRESS_LOGGER)
    progress.setLevel(logging.INFO)
    progress.propagate = False
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    progress.addHandler(handler)
    return progress, handler


def _header(config: RunConfig, mesh: Mesh, probe: ProbeSeries) -> list[str]:
    loop = config["loop"]
    return [
        f"# rotorfsi {__version__}",
        f"# nodes {mesh.n_nodes} triangles {mesh.n_triangles} "
        f"ring nodes {mesh.ring_size}",
        "# viscous factor "
        f"{format_number(config['discretization']['viscous_factor'])}",
        f"# matching {config['ale']['matching']}",
        "# fixed-point metric: max-norm interface displacement change "
        "relative to max(1, max-norm displacement)",
        f"# relaxation {format_number(loop['relaxation'])} "
        f"tolerance {format_number(loop['tolerance'])}",
        f"# probe {probe.location}",
        "# step time sweeps newton krylov min_angle",
    ]


def progress_line(report: StepReport) -> str:
    return " ".join(
        [
            str(report.step),
            format_number(report.time),
            str(report.sweeps),
            str(sum(report.newton_iterations)),
            str(report.krylov_iterations),
            format_number(report.min_angle),
        ]
    )


def snapshot_stride(config: RunConfig) -> int:
    """Steps between VTK snapshots, 0 when disabled"""
    every = config["output"]["vtk_every"]
    if every <= 0:
        return 0
    return max(1, int(round(every / config["loop"]["dt"])))


def run_simulation(
    config: RunConfig,
    out_dir: str | os.PathLike | None = None,
    *,
    steps: int | None = None,
    seed: int = 0,
    restart: str | os.PathLike | None = None,
) -> RunResult:
    """Run the time loop and write every output file.

    :param steps: stop after this many steps, at most the configured
        end time.
    :param restart: checkpoint file to resume from.
    """
    directory = Path(out_dir or config["output"]["directory"])
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.toml").write_text(
        serialize_config(config), encoding="utf-8"
    )
    mesh = build_mesh(config, seed)
    simulation = build_simulation(config, mesh)
    spec = config.rotation()
    probe = ProbeSeries.tip(mesh, spec, config["geometry"]["arm_width"])

    solver_section = config["solver"]
    residual_rows: list[tuple] = []
    current = {"step": 0, "solve": 0}

    def record_solve(system, result):
        current["solve"] += 1
        if solver_section["residual_history"]:
            residual_rows.extend(
                (current["step"], current["solve"], index, value)
                for index, value in enumerate(result.residuals)
            )
        if solver_section["dump_matrices"] and current["solve"] == 1:
            prefix = directory / "matrices" / f"step_{current['step']:06d}"
            prefix.parent.mkdir(parents=True, exist_ok=True)
            for name in ("A", "B", "C"):
                write_matrix_market(
                    f"{prefix}_{name}",
                    getattr(system, name),
                    f"block {name} of step {current['step']}",
                )

    simulation.solve_hook = record_solve

    if restart is not None:
        saved = read_checkpoint(restart)
        state = simulation.restore_state(
            saved.step, saved.time, **saved.arrays
        )
        logger.info("restarting from step %d", saved.step)
    else:
        state = simulation.initial_state()

    n_steps = simulation.loop.n_steps
    if steps is not None:
        n_steps = min(n_steps, state.step + steps)
    stride = snapshot_stride(config)
    checkpoint_every = config["output"]["checkpoint_every"]

    progress, handler = _progress_logger(directory / "progress.log")
    snapshots: list[Path] = []
    reports: list[StepReport] = []
    try:
        for line in _header(config, mesh, probe):
            progress.info(line)
        probe.sample(state.time, state.displacement, mesh, spec)
        if stride and state.step % stride == 0:
            snapshots.append(
                write_vtk_snapshot(
                    state,
                    state.mesh,
                    directory / "vtk" / f"step_{state.step:06d}.vtk",
                )
            )
        while state.step < n_steps:
            current["step"], current["solve"] = state.step + 1, 0
            try:
                state, report = simulation.advance(state)
            except Exception as error:
                progress.info(
                    f"# failed at step {current['step']}: {error}"
                )
                raise
            reports.append(report)
            progress.info(progress_line(report))
            probe.sample(state.time, state.displacement, mesh, spec)
            if stride and state.step % stride == 0:
                snapshots.append(
                    write_vtk_snapshot(
                        state,
                        state.mesh,
                        directory / "vtk" / f"step_{state.step:06d}.vtk",
                    )
                )
            if checkpoint_every and state.step % checkpoint_every == 0:
                write_checkpoint(
                    directory / "checkpoints" / f"step_{state.step:06d}.rfsi",
                    checkpoint_from_state(state),
                )
    finally:
        probe.write_csv(directory / "probe_tip.csv")
        if solver_section["residual_history"]:
            write_csv(
                directory / "residuals.csv", RESIDUAL_HEADER, residual_rows
            )
        progress.removeHandler(handler)
        handler.close()
    return RunResult(state, probe, reports, directory, snapshots)
