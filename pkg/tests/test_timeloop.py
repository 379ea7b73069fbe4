from __future__ import annotations

import numpy as np
import pytest

from rotorfsi.linsolve import KrylovResult
from rotorfsi.mesh import Subdomain
from rotorfsi.runner import build_mesh
from rotorfsi.runner import build_simulation
from rotorfsi.timeloop import advance_time_step
from rotorfsi.timeloop import LoopConfig
from rotorfsi.timeloop import newton_loop
from rotorfsi.timeloop import NewtonDivergence
from rotorfsi.timeloop import relax_interface
from rotorfsi.timeloop import trapezoid_update


class ScalarSystem:
    """Stand-in for a reduced system: the solve maps ``v`` to ``step(v)``"""

    def __init__(self, step):
        self.step = step

    def residual(self, velocity, pressure):
        return float(np.linalg.norm(velocity))

    def reduce(self, velocity, pressure):
        return np.concatenate([velocity, pressure])

    def expand(self, x):
        return self.step(x[:-1]), np.zeros(1)


def passthrough(mocker, iterations=3):
    def solve(system, rhs):
        return rhs, KrylovResult(rhs, iterations, (1.0,), True, 0.0)

    return mocker.Mock(side_effect=solve)


def test_trapezoid_update():
    u = np.array([[1.0, 2.0]])
    v = np.array([[2.0, 0.0]])
    v_old = np.array([[0.0, 4.0]])
    assert np.allclose(trapezoid_update(u, v, v_old, 0.1), [[1.1, 2.2]])


def test_relaxation_weights():
    previous = np.zeros(3)
    new = np.ones(3)
    assert np.allclose(relax_interface(previous, new, 0.7), 0.7)
    full = relax_interface(previous, new, 1.0)
    assert np.array_equal(full, new)
    assert full is not new


@pytest.mark.parametrize("relaxation", [0.0, -0.5, 1.5])
def test_relaxation_range(relaxation):
    with pytest.raises(ValueError):
        relax_interface(np.zeros(2), np.ones(2), relaxation)


@pytest.mark.parametrize(
    "changes",
    [
        {"dt": 0.0},
        {"t_end": -1.0},
        {"relaxation": 0.0},
        {"tolerance": 0.0},
        {"max_sweeps": 0},
    ],
)
def test_invalid_loop_config(changes):
    settings = {"dt": 0.01, "t_end": 1.0}
    settings.update(changes)
    with pytest.raises(ValueError):
        LoopConfig(**settings)


def test_number_of_steps():
    assert LoopConfig(dt=0.01, t_end=2.0).n_steps == 200
    assert LoopConfig(dt=0.3, t_end=1.0).n_steps == 3


def test_newton_stops_on_small_update(mocker):
    target = np.array([0.0, 0.0])
    system = ScalarSystem(lambda v: target)
    solve = passthrough(mocker)
    result = newton_loop(
        lambda v: system, np.array([1.0, 1.0]), np.zeros(1), solve
    )
    assert result.iterations == 1
    assert result.residuals == (pytest.approx(np.sqrt(2.0)), 0.0)
    assert result.krylov_iterations == 3
    assert solve.call_count == 1


def test_newton_converged_start_needs_no_solve(mocker):
    system = ScalarSystem(lambda v: v)
    solve = passthrough(mocker)
    result = newton_loop(lambda v: system, np.zeros(2), np.zeros(1), solve)
    assert result.iterations == 0
    solve.assert_not_called()


def test_newton_divergence(mocker):
    system = ScalarSystem(lambda v: 3.0 * v + 1.0)
    with pytest.raises(NewtonDivergence) as excinfo:
        newton_loop(
            lambda v: system, np.ones(1), np.zeros(1), passthrough(mocker)
        )
    assert excinfo.value.details == [1.0, 4.0, 13.0]


def test_newton_iteration_budget(mocker):
    system = ScalarSystem(lambda v: 0.5 * v)
    with pytest.raises(NewtonDivergence):
        newton_loop(
            lambda v: system,
            np.ones(1),
            np.zeros(1),
            passthrough(mocker),
            tolerance=1e-12,
            max_iterations=2,
        )


@pytest.fixture(scope="module")
def rest_config(desk_config):
    return desk_config.replace(
        rotation__angular_velocity=0.0,
        rotation__schedule=[],
        inflow__peak_velocity=0.0,
    )


@pytest.fixture(scope="module")
def rest_mesh(rest_config):
    return build_mesh(rest_config)


def test_initial_state_rotates_rigidly(desk_config, rest_mesh):
    simulation = build_simulation(desk_config, rest_mesh)
    state = simulation.initial_state()
    structure = simulation.structure_nodes
    assert np.allclose(
        state.displacement[structure],
        simulation.rotation_displacement(0.0)[structure],
    )
    fluid_only = np.setdiff1d(
        rest_mesh.nodes_of(Subdomain.ROT_FLUID), structure
    )
    assert not np.any(state.fluid_velocity[fluid_only])
    assert not np.any(state.pressure)


@pytest.mark.integration
def test_rest_is_a_fixed_point(rest_config, rest_mesh):
    simulation = build_simulation(rest_config, rest_mesh)
    state = simulation.initial_state()
    new, report = advance_time_step(state, simulation)
    assert report.sweeps == 1
    assert new.step == 1
    assert new.time == pytest.approx(rest_config["loop"]["dt"])
    assert np.abs(new.fluid_velocity).max() <= 1e-14
    assert np.abs(new.displacement - state.displacement).max() <= 1e-14


@pytest.mark.integration
def test_structure_steps_keep_the_axis(desk_config, rest_mesh):
    config = desk_config.replace(loop__coupling="structure")
    simulation = build_simulation(config, rest_mesh)
    state = simulation.initial_state()
    axis = simulation.axis_nodes
    for _ in range(3):
        state, report = simulation.advance(state)
        exact = simulation.rotation_displacement(state.time)
        assert np.abs(state.displacement[axis] - exact[axis]).max() <= 1e-12
        assert report.min_angle > 0
    assert not np.any(state.fluid_velocity)


@pytest.mark.integration
def test_solve_hook_sees_every_solve(desk_config, rest_mesh, mocker):
    config = desk_config.replace(loop__coupling="structure")
    simulation = build_simulation(config, rest_mesh)
    simulation.solve_hook = mocker.Mock()
    _, report = simulation.advance(simulation.initial_state())
    assert simulation.solve_hook.call_count == sum(report.newton_iterations)


@pytest.mark.integration
def test_sweeps_start_from_the_previous_iterate(
    desk_config, rest_mesh, mocker
):
    config = desk_config.replace(loop__coupling="structure")
    simulation = build_simulation(config, rest_mesh)
    original = simulation.solve_on_mesh
    calls = []

    def recording(*args):
        dofmap, result = original(*args)
        calls.append((args[4], dofmap.nodal_velocity(result.velocity)))
        return dofmap, result

    mocker.patch.object(simulation, "solve_on_mesh", side_effect=recording)
    _, report = simulation.advance(simulation.initial_state())
    assert report.sweeps == len(calls) >= 2
    assert calls[0][0] is None
    for (_, previous), (start, _) in zip(calls, calls[1:]):
        velocity, pressure = start
        assert np.array_equal(velocity, previous)
        assert pressure.shape == (rest_mesh.n_nodes,)


@pytest.mark.integration
def test_relaxation_does_not_change_the_step(desk_config, rest_mesh):
    states = []
    for relaxation in (1.0, 0.7):
        config = desk_config.replace(loop__relaxation=relaxation)
        simulation = build_simulation(config, rest_mesh)
        state, _ = simulation.advance(simulation.initial_state())
        states.append(state)
    full, relaxed = states
    scale = max(1.0, float(np.abs(full.displacement).max()))
    bound = 10 * simulation.loop.tolerance * scale
    difference = np.abs(full.displacement - relaxed.displacement).max()
    assert difference <= bound
