from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from enum import IntEnum
from typing import Any
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from rotorfsi.errors import RotorFsiError


class OpenCurve(RotorFsiError):
    """Raised when tagged interface edges do not close into a loop"""


class MultipleLoops(RotorFsiError):
    """Raised when tagged interface edges form more than one loop"""


class Subdomain(IntEnum):
    STRUCTURE = 0
    ROT_FLUID = 1
    STAT_FLUID = 2


class BoundaryTag(IntEnum):
    INLET = 0
    OUTLET = 1
    WALL = 2
    AXIS = 3
    INTERFACE = 4
    SLIDING = 5


# edges that must carry exactly one triangle in a conforming mesh
OUTER_TAGS = (
    BoundaryTag.INLET,
    BoundaryTag.OUTLET,
    BoundaryTag.WALL,
    BoundaryTag.AXIS,
)

FLUID_SUBDOMAINS = (Subdomain.ROT_FLUID, Subdomain.STAT_FLUID)


class RingSide(str, Enum):
    ROTATING = "rotating"
    STATIONARY = "stationary"


def _frozen(array: Any, dtype: Any) -> np.ndarray:
    value = np.array(array, dtype=dtype, copy=True)
    value.setflags(write=False)
    return value


@dataclass(frozen=True, eq=False)
class Mesh:
    """Multi-subdomain triangulation.

    Reference coordinates never change. Moving the mesh returns a new
    instance through :meth:`moved`; topology is shared.

    The sliding circle carries two node rings, ``rotating_ring`` and
    ``stationary_ring``, listed counterclockwise from the smallest
    positive angle. ``ring_shift`` is the current cyclic offset K:
    rotating node ``i`` sits on stationary node ``(K + i) % m``.
    """

    reference_coords: np.ndarray
    coords: np.ndarray
    triangles: np.ndarray
    subdomains: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    center: tuple[float, float]
    rotating_ring: np.ndarray
    stationary_ring: np.ndarray
    ring_shift: int = 0

    def __post_init__(self):
        for name, dtype in (
            ("reference_coords", float),
            ("coords", float),
            ("triangles", np.int64),
            ("subdomains", np.int8),
            ("edges", np.int64),
            ("edge_tags", np.int8),
            ("rotating_ring", np.int64),
            ("stationary_ring", np.int64),
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )
        object.__setattr__(self, "ring_shift", int(self.ring_shift))
        if self.rotating_ring.shape != self.stationary_ring.shape:
            raise ValueError("sliding rings must have the same node count")

    @property
    def n_nodes(self) -> int:
        return len(self.reference_coords)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def ring_size(self) -> int:
        return len(self.stationary_ring)

    @property
    def diameter(self) -> float:
        span = self.reference_coords.max(axis=0) - self.reference_coords.min(
            axis=0
        )
        return float(math.hypot(*span))

    def moved(self, coords: np.ndarray, ring_shift: int | None = None) -> Mesh:
        shift = self.ring_shift if ring_shift is None else ring_shift
        return dataclasses.replace(self, coords=coords, ring_shift=shift)

    def triangles_of(self, *subdomains: Subdomain) -> np.ndarray:
        mask = np.isin(self.subdomains, [int(s) for s in subdomains])
        return self.triangles[mask]

    def nodes_of(self, *subdomains: Subdomain) -> np.ndarray:
        return np.unique(self.triangles_of(*subdomains))

    def tagged_edges(self, tag: BoundaryTag) -> np.ndarray:
        return self.edges[self.edge_tags == int(tag)]

    def tagged_nodes(self, tag: BoundaryTag) -> np.ndarray:
        return np.unique(self.tagged_edges(tag))

    def ring_pairing(self, shift: int | None = None) -> np.ndarray:
        """Stationary partner (node id) of every rotating ring node"""
        m = self.ring_size
        if m == 0:
            return np.empty(0, dtype=np.int64)
        shift = self.ring_shift if shift is None else shift
        return self.stationary_ring[(shift + np.arange(m)) % m]

    def canonical_nodes(self, pairing: np.ndarray | None = None) -> np.ndarray:
        """Node id after merging each rotating ring node into its partner"""
        canonical = np.arange(self.n_nodes)
        if self.ring_size:
            if pairing is None:
                pairing = self.ring_pairing()
            canonical[self.rotating_ring] = pairing
        return canonical

    def signed_areas(self, coords: np.ndarray | None = None) -> np.ndarray:
        points = self.coords if coords is None else coords
        return signed_areas(points, self.triangles)


def signed_areas(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = coords[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangle_angles(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles in degrees, shape ``(T, 3)``, vertex order kept"""
    p = coords[triangles]
    angles = np.empty((len(triangles), 3))
    for vertex in range(3):
        a = p[:, (vertex + 1) % 3] - p[:, vertex]
        b = p[:, (vertex + 2) % 3] - p[:, vertex]
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        dot = np.einsum("ij,ij->i", a, b)
        angles[:, vertex] = np.degrees(np.arctan2(cross, dot))
    return angles


@dataclass(frozen=True, eq=False)
class InterfaceRing:
    """Closed node loop ordered counterclockwise about the mesh center"""

    nodes: np.ndarray
    side: RingSide | None
    angles: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        if len(self.nodes) < 3:
            raise ValueError("an interface ring needs at least 3 nodes")
        for name in ("nodes", "angles", "points"):
            object.__setattr__(
                self, name, _frozen(getattr(self, name), None)
            )

    def __len__(self) -> int:
        return len(self.nodes)


def _walk_loops(edges: np.ndarray) -> list[list[int]]:
    neighbours: dict[int, list[int]] = {}
    for a, b in edges.tolist():
        neighbours.setdefault(a, []).append(b)
        neighbours.setdefault(b, []).append(a)
    dangling = sorted(n for n, adj in neighbours.items() if len(adj) != 2)
    if dangling:
        raise OpenCurve(
            f"nodes {dangling[:5]} do not have exactly two ring neighbours",
            details=dangling,
        )
    loops = []
    unvisited = set(neighbours)
    while unvisited:
        start = min(unvisited)
        loop = [start]
        previous, current = start, neighbours[start][0]
        while current != start:
            loop.append(current)
            a, b = neighbours[current]
            previous, current = current, (b if a == previous else a)
        unvisited.difference_update(loop)
        loops.append(loop)
    return loops


def extract_ring(
    mesh: Mesh,
    tag: BoundaryTag,
    side: RingSide | None = None,
    reference: bool = False,
) -> InterfaceRing:
    """Ordered node ring of a closed tagged curve.

    On the sliding circle ``side`` picks the rotating or the stationary
    copy. Angles come from the current coordinates unless ``reference``
    is set; the first node has the smallest positive angle.
    """
    edges = mesh.tagged_edges(tag)
    if tag == BoundaryTag.SLIDING and side is not None:
        on_rotating = np.isin(edges, mesh.rotating_ring).all(axis=1)
        keep = on_rotating if side == RingSide.ROTATING else ~on_rotating
        edges = edges[keep]
    if len(edges) == 0:
        raise OpenCurve(f"no edges tagged {tag.name}")

    loops = _walk_loops(edges)
    if len(loops) > 1:
        raise MultipleLoops(
            f"edges tagged {tag.name} form {len(loops)} loops",
            details=[len(loop) for loop in loops],
        )

    nodes = np.array(loops[0], dtype=np.int64)
    coords = mesh.reference_coords if reference else mesh.coords
    offset = coords[nodes] - np.asarray(mesh.center)
    angles = np.mod(np.arctan2(offset[:, 1], offset[:, 0]), 2.0 * np.pi)
    angles[angles == 0.0] = 2.0 * np.pi
    order = np.argsort(angles, kind="stable")
    return InterfaceRing(
        nodes=nodes[order],
        side=side,
        angles=angles[order],
        points=coords[nodes[order]],
    )


class QualityReport(NamedTuple):
    min_angle: float
    min_area: float
    max_area: float
    area_ratio: float
    max_aspect_ratio: float
    inverted: tuple[int, ...]

    def lines(self) -> list[str]:
        return [
            f"min_angle_deg = {self.min_angle:.12e}",
            f"min_area = {self.min_area:.12e}",
            f"max_area = {self.max_area:.12e}",
            f"area_ratio = {self.area_ratio:.12e}",
            f"max_aspect_ratio = {self.max_aspect_ratio:.12e}",
            f"inverted = {len(self.inverted)}",
        ]


def mesh_quality(
    mesh: Mesh, coords: np.ndarray | None = None
) -> QualityReport:
    """Angle, area and aspect statistics; inverted triangles are listed,
    never raised."""
    points = mesh.coords if coords is None else coords
    areas = signed_areas(points, mesh.triangles)
    angles = triangle_angles(points, mesh.triangles)

    p = points[mesh.triangles]
    lengths = np.stack(
        [
            np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1)
            for k in range(3)
        ],
        axis=1,
    )
    perimeter = lengths.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 for the equilateral triangle
        aspect = lengths.max(axis=1) * perimeter / (4.0 * math.sqrt(3) * areas)
    aspect = np.where(areas > 0, aspect, np.inf)
    max_area = float(areas.max())
    return QualityReport(
        min_angle=float(angles.min()),
        min_area=float(areas.min()),
        max_area=max_area,
        area_ratio=float(areas.min() / max_area) if max_area else 0.0,
        max_aspect_ratio=float(aspect.max()),
        inverted=tuple(int(i) for i in np.flatnonzero(areas <= 0)),
    )


class Defect(NamedTuple):
    kind: str
    entities: tuple[int, ...]
    message: str


def _edge_keys(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    low, high = np.minimum(a, b), np.maximum(a, b)
    return low * n + high


def validate_conformity(
    mesh: Mesh,
    coords: np.ndarray | None = None,
    pairing: np.ndarray | None = None,
) -> list[Defect]:
    """Conformity defects of the mesh with the sliding rings merged.

    ``pairing`` overrides the stationary partner of each rotating ring
    node; by default it follows ``mesh.ring_shift``.
    """
    points = mesh.coords if coords is None else coords
    n = mesh.n_nodes
    tolerance = 1e-12 * mesh.diameter
    defects: list[Defect] = []

    if mesh.ring_size and pairing is None:
        pairing = mesh.ring_pairing()
    canonical = mesh.canonical_nodes(pairing)
    triangles = canonical[mesh.triangles]

    repeated = (
        (triangles[:, 0] == triangles[:, 1])
        | (triangles[:, 1] == triangles[:, 2])
        | (triangles[:, 0] == triangles[:, 2])
    )
    for index in np.flatnonzero(repeated):
        defects.append(
            Defect(
                "degenerate triangle",
                (int(index),),
                f"triangle {index} repeats a node after ring merge",
            )
        )

    keys = np.concatenate(
        [
            _edge_keys(triangles[:, k], triangles[:, (k + 1) % 3], n)
            for k in range(3)
        ]
    )
    unique, counts = np.unique(keys, return_counts=True)
    outer = np.isin(mesh.edge_tags, [int(t) for t in OUTER_TAGS])
    outer_edges = canonical[mesh.edges[outer]]
    outer_keys = np.unique(
        _edge_keys(outer_edges[:, 0], outer_edges[:, 1], n)
    )
    is_outer = np.isin(unique, outer_keys)

    for key in unique[counts > 2]:
        defects.append(
            Defect(
                "nonmanifold edge",
                (int(key // n), int(key % n)),
                f"edge {key // n}-{key % n} has more than two triangles",
            )
        )
    for key in unique[(counts == 1) & ~is_outer]:
        defects.append(
            Defect(
                "hanging edge",
                (int(key // n), int(key % n)),
                f"interior edge {key // n}-{key % n} has one triangle",
            )
        )
    present = dict(zip(unique.tolist(), counts.tolist()))
    for key in outer_keys:
        if present.get(int(key), 0) != 1:
            defects.append(
                Defect(
                    "boundary edge",
                    (int(key // n), int(key % n)),
                    f"boundary edge {key // n}-{key % n} is not on "
                    "exactly one triangle",
                )
            )

    if mesh.ring_size:
        gap = np.linalg.norm(
            points[mesh.rotating_ring] - points[pairing], axis=1
        )
        for i in np.flatnonzero(gap > tolerance):
            defects.append(
                Defect(
                    "sliding node mismatch",
                    (int(mesh.rotating_ring[i]), int(pairing[i])),
                    f"rotating ring node {i} is {gap[i]:.3e} m away "
                    "from its partner",
                )
            )

    used = np.unique(triangles)
    tree = cKDTree(points[used])
    for a, b in sorted(tree.query_pairs(max(tolerance, 1e-300))):
        defects.append(
            Defect(
                "duplicate node",
                (int(used[a]), int(used[b])),
                f"nodes {used[a]} and {used[b]} share coordinates",
            )
        )
    return defects


def is_delaunay(
    mesh: Mesh,
    subdomain: Subdomain | None = None,
    coords: np.ndarray | None = None,
    tolerance: float = 1e-9,
) -> bool:
    """Every interior edge has opposite angles summing to at most pi"""
    points = mesh.coords if coords is None else coords
    if subdomain is None:
        triangles = mesh.triangles
    else:
        triangles = mesh.triangles_of(subdomain)
    angles = triangle_angles(points, triangles)
    n = mesh.n_nodes
    opposite: dict[int, float] = {}
    for k in range(3):
        keys = _edge_keys(
            triangles[:, (k + 1) % 3], triangles[:, (k + 2) % 3], n
        )
        for key, angle in zip(keys.tolist(), angles[:, k].tolist()):
            if key in opposite:
                if opposite[key] + angle > 180.0 + tolerance:
                    return False
            else:
                opposite[key] = angle
    return True
