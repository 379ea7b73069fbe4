from __future__ import annotations

import functools
import logging
import os
import sys
from pathlib import Path

import click

from rotorfsi import __version__
from rotorfsi.checks import run_checks
from rotorfsi.config import read_config
from rotorfsi.errors import ConfigError
from rotorfsi.errors import RotorFsiError
from rotorfsi.experiments import run_stiffness_sweep
from rotorfsi.mesh import mesh_quality
from rotorfsi.runner import build_mesh
from rotorfsi.runner import run_simulation
from rotorfsi.writers import write_vtk

os.environ["PYTHONIOENCODING"] = "utf-8"

DEFAULT_CONFIG = "rotor_channel_2d.cfg"

CONFIG_ERROR = 2
RUNTIME_ERROR = 3
CHECK_FAILED = 1


def print_version(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(__version__)
    ctx.exit()


def _fail(message: str, details=None) -> None:
    click.echo(click.style(message, fg="white", bg="red"), err=True)
    for detail in details or ():
        if isinstance(detail, tuple):
            detail = ": ".join(str(part) for part in detail)
        click.echo(f"  {detail}", err=True)


def handle_errors(command):
    """Exit 2 on configuration errors and 3 on any other engine error"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except ConfigError as error:
            _fail(f"configuration error: {error.message}", error.details)
            ctx.exit(CONFIG_ERROR)
        except RotorFsiError as error:
            _fail(f"{type(error).__name__}: {error.message}")
            ctx.exit(RUNTIME_ERROR)

    return wrapper


def config_option(command):
    return click.option(
        "--config",
        "-c",
        "config_path",
        default=DEFAULT_CONFIG,
        show_default=True,
        help="Configuration file, or the name of a shipped preset",
    )(command)


def out_option(command):
    return click.option(
        "--out",
        "-o",
        "out_dir",
        default=None,
        type=click.Path(file_okay=False),
        help="Output directory, defaults to output.directory",
    )(command)


def seed_option(command):
    return click.option(
        "--seed",
        default=0,
        show_default=True,
        type=int,
        help="Mesh generator salt",
    )(command)


def steps_option(command):
    return click.option(
        "--steps",
        default=None,
        type=click.IntRange(min=1),
        help="Stop after this many time steps",
    )(command)


def load(config_path: str):
    return read_config(config_path, environ=os.environ)


@click.group()
@click.option(
    "--version",
    is_flag=True,
    callback=print_version,
    expose_value=False,
    is_eager=True,
    help="Show rotorfsi version",
)
@click.option(
    "--verbose", "-v", count=True, help="Log INFO, or DEBUG when repeated"
)
def main(verbose):
    """rotorfsi - elastic rotor in a channel, monolithic ALE FSI\n
    Every subcommand reads a TOML configuration; ROTORFSI_<SECTION>__<KEY>
    environment variables override single keys.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s"
    )


@main.command()
@config_option
@out_option
@steps_option
@seed_option
@click.option(
    "--restart",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Checkpoint file to resume from",
)
@handle_errors
def run(config_path, out_dir, steps, seed, restart):
    """Run the coupled simulation and write its outputs"""
    config = load(config_path)
    result = run_simulation(
        config, out_dir, steps=steps, seed=seed, restart=restart
    )
    click.echo(
        f"{len(result.reports)} steps to t = {result.state.time:.6g} s, "
        f"outputs in {result.directory}"
    )


@main.command()
@config_option
@out_option
@steps_option
@seed_option
@handle_errors
def sweep(config_path, out_dir, steps, seed):
    """One run per Young's modulus listed in sweep.moduli"""
    config = load(config_path)
    result = run_stiffness_sweep(
        config, out_dir=out_dir, steps=steps, seed=seed
    )
    click.echo(f"{len(result.series)} runs written to {result.csv}")
    if result.failures:
        for modulus, reason in sorted(result.failures.items()):
            _fail(f"E = {modulus:.3e} failed: {reason}")
        sys.exit(RUNTIME_ERROR)


@main.command(name="mesh-only")
@config_option
@out_option
@seed_option
@handle_errors
def mesh_only(config_path, out_dir, seed):
    """Write the mesh and its quality report without solving"""
    config = load(config_path)
    mesh = build_mesh(config, seed)
    directory = Path(out_dir or config["output"]["directory"])
    directory.mkdir(parents=True, exist_ok=True)
    write_vtk(
        directory / "mesh.vtk",
        mesh,
        {},
        {},
        title="rotorfsi mesh",
    )
    lines = [
        f"nodes = {mesh.n_nodes}",
        f"triangles = {mesh.n_triangles}",
        f"ring_nodes = {mesh.ring_size}",
        *mesh_quality(mesh).lines(),
    ]
    (directory / "quality.txt").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )
    for line in lines:
        click.echo(line)


@main.command()
@config_option
@click.option(
    "--skip-slow",
    is_flag=True,
    default=False,
    help="Leave out the revolution and sweep suites",
)
@handle_errors
def check(config_path, skip_slow):
    """Run the invariant suites and report PASS/FAIL per suite"""
    config = load(config_path)
    results = run_checks(config, skip_slow=skip_slow)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        color = "green" if result.passed else "red"
        click.echo(f"{click.style(status, fg=color)} {result.suite}")
        if result.error:
            click.echo(f"    error: {result.error}")
        for name, ok, detail in result.outcomes:
            click.echo(f"    {'ok' if ok else 'failed'} {name}: {detail}")
    failed = [result.suite for result in results if not result.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} suites passed")
    if failed:
        sys.exit(CHECK_FAILED)


def cli_main(argv: list[str] | None = None) -> int:
    """Run the command line and return its exit code"""
    try:
        main.main(args=argv, prog_name="rotorfsi")
    except SystemExit as exit_:
        code = exit_.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    return 0
