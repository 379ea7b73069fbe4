"""Checkpoint files for restarting a run.

Layout::

    RFSI1\n
    {"step": ..., "time": ..., "ring_shift": ..., "arrays": [...]}\n
    raw little-endian float64 payloads, in header order
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import NamedTuple

import numpy as np

from rotorfsi.errors import IoError

logger = logging.getLogger(__name__)

MAGIC = b"RFSI1"
DTYPE = "<f8"
ARRAYS = (
    "fluid_velocity",
    "structure_velocity",
    "pressure",
    "displacement",
    "mesh_displacement",
    "mesh_velocity",
)


class Checkpoint(NamedTuple):
    step: int
    time: float
    ring_shift: int
    arrays: dict[str, np.ndarray]


def checkpoint_from_state(state) -> Checkpoint:
    return Checkpoint(
        step=state.step,
        time=state.time,
        ring_shift=state.ale.shift,
        arrays={
            "fluid_velocity": state.fluid_velocity,
            "structure_velocity": state.structure_velocity,
            "pressure": state.pressure,
            "displacement": state.displacement,
            "mesh_displacement": state.ale.displacement,
            "mesh_velocity": state.ale.velocity,
        },
    )


def write_checkpoint(path: str | os.PathLike, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    missing = [name for name in ARRAYS if name not in checkpoint.arrays]
    if missing:
        raise IoError("checkpoint is missing arrays", details=missing)
    payloads = [
        np.ascontiguousarray(checkpoint.arrays[name], dtype=DTYPE)
        for name in ARRAYS
    ]
    header = {
        "step": int(checkpoint.step),
        "time": float(checkpoint.time),
        "ring_shift": int(checkpoint.ring_shift),
        "arrays": [
            {"name": name, "dtype": DTYPE, "shape": list(array.shape)}
            for name, array in zip(ARRAYS, payloads)
        ],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as stream:
            stream.write(MAGIC + b"\n")
            stream.write(json.dumps(header, sort_keys=True).encode("ascii"))
            stream.write(b"\n")
            for array in payloads:
                stream.write(array.tobytes())
    except OSError as error:
        raise IoError(f"cannot write {path}: {error}") from error
    logger.info("checkpoint step %d written to %s", checkpoint.step, path)
    return path


def read_checkpoint(path: str | os.PathLike) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as error:
        raise IoError(f"cannot read {path}: {error}") from error
    magic, _, rest = data.partition(b"\n")
    if magic != MAGIC:
        raise IoError(f"{path} is not an RFSI1 checkpoint")
    line, _, payload = rest.partition(b"\n")
    try:
        header = json.loads(line.decode("ascii"))
        entries = header["arrays"]
        arrays = {}
        offset = 0
        for entry in entries:
            if entry["dtype"] != DTYPE:
                raise IoError(f"unsupported dtype {entry['dtype']}")
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            size = 8 * count
            if offset + size > len(payload):
                raise IoError(f"{path} is truncated")
            arrays[entry["name"]] = np.frombuffer(
                payload, dtype=DTYPE, count=count, offset=offset
            ).reshape(shape).copy()
            offset += size
        if offset != len(payload):
            raise IoError(f"{path} has trailing bytes")
        return Checkpoint(
            step=int(header["step"]),
            time=float(header["time"]),
            ring_shift=int(header["ring_shift"]),
            arrays=arrays,
        )
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as error:
        raise IoError(f"malformed checkpoint {path}: {error}") from error
