from __future__ import annotations

from rotorfsi.mesh.core import BoundaryTag
from rotorfsi.mesh.core import Defect
from rotorfsi.mesh.core import extract_ring
from rotorfsi.mesh.core import FLUID_SUBDOMAINS
from rotorfsi.mesh.core import InterfaceRing
from rotorfsi.mesh.core import is_delaunay
from rotorfsi.mesh.core import Mesh
from rotorfsi.mesh.core import mesh_quality
from rotorfsi.mesh.core import MultipleLoops
from rotorfsi.mesh.core import OpenCurve
from rotorfsi.mesh.core import QualityReport
from rotorfsi.mesh.core import RingSide
from rotorfsi.mesh.core import signed_areas
from rotorfsi.mesh.core import Subdomain
from rotorfsi.mesh.core import validate_conformity
from rotorfsi.mesh.generator import build_rectangle_mesh
from rotorfsi.mesh.generator import build_rotor_channel_mesh
from rotorfsi.mesh.generator import ChannelRotorGeometry
from rotorfsi.mesh.generator import InvalidGeometry
from rotorfsi.mesh.generator import MeshGenerationFailure

__all__ = [
    "BoundaryTag",
    "build_rectangle_mesh",
    "build_rotor_channel_mesh",
    "ChannelRotorGeometry",
    "Defect",
    "extract_ring",
    "FLUID_SUBDOMAINS",
    "InterfaceRing",
    "InvalidGeometry",
    "is_delaunay",
    "Mesh",
    "mesh_quality",
    "MeshGenerationFailure",
    "MultipleLoops",
    "OpenCurve",
    "QualityReport",
    "RingSide",
    "signed_areas",
    "Subdomain",
    "validate_conformity",
]
