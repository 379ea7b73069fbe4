from __future__ import annotations

import copy
import os

import pytest

from rotorfsi.checks import DESK_H
from rotorfsi.config import read_config
from rotorfsi.mesh import build_rectangle_mesh
from rotorfsi.mesh import build_rotor_channel_mesh
from rotorfsi.mesh import ChannelRotorGeometry


@pytest.fixture(scope="module")
def geometry():
    return ChannelRotorGeometry()


@pytest.fixture(scope="module")
def desk_mesh(geometry):
    """Default channel and rotor at h = 0.02, shared per module"""
    return build_rotor_channel_mesh(geometry, DESK_H)


@pytest.fixture(scope="module")
def square_mesh():
    return build_rectangle_mesh(8, 8)


@pytest.fixture(scope="module")
def preset():
    """The shipped preset, no environment overrides"""
    return read_config("rotor_channel_2d.cfg")


@pytest.fixture(scope="module")
def desk_config(preset):
    return preset.replace(discretization__h=DESK_H)


@pytest.fixture(scope="module")
def testdir():
    return os.path.dirname(os.path.abspath(__file__))


# each test runs on cwd to its temp dir
@pytest.fixture(autouse=True)
def go_to_tmpdir(request):
    tmpdir = request.getfixturevalue("tmpdir")
    # Chdir only for the duration of the test.
    with tmpdir.as_cwd():
        yield


@pytest.fixture
def clean_env():
    backup = copy.deepcopy(dict(os.environ))
    for key in list(os.environ):
        if key.startswith("ROTORFSI_"):
            del os.environ[key]
    yield
    os.environ.clear()
    os.environ.update(backup)
