"""Zero-level set extraction from regular scalar grids.

Marching squares (2D) and marching cubes (3D) with linear interpolation of
the zero crossing along cell edges.  Cells touching any node outside the
coverage mask are skipped.  Vertices are welded exactly by indexing them
with the grid edge they sit on, so shared cell faces produce shared
vertices and the meshes of well-resolved closed surfaces are watertight.

Conventions: a node is "inside" when its value is negative; triangle
winding makes outward face normals point toward positive values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class ScalarGrid:
    """Node values on a regular axis-aligned grid with a coverage mask."""

    origin: np.ndarray  # (d,)
    spacing: np.ndarray  # (d,) positive
    values: np.ndarray  # (n1, ..., nd)
    mask: np.ndarray  # same shape, True where the value is meaningful

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "spacing", np.asarray(self.spacing, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
        if self.values.ndim not in (2, 3):
            raise ValueError("grid must be 2D or 3D")
        if self.mask.shape != self.values.shape:
            raise ValueError("mask shape must match values")
        if any(n < 2 for n in self.values.shape):
            raise ValueError("need at least 2 nodes per axis")
        if np.any(self.spacing <= 0):
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("non-finite values inside the mask")

    @property
    def dim(self):
        return self.values.ndim

    @property
    def dims(self):
        return self.values.shape

    def axis_coords(self, axis):
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangle mesh; vertices (V, 3), triangles (T, 3) indices."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        )
        object.__setattr__(
            self, "triangles", np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        )
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")


def euler_characteristic(mesh: SurfaceMesh) -> int:
    """V - E + F over the vertices/edges actually used by triangles."""
    if mesh.triangles.size == 0:
        return 0
    tris = mesh.triangles
    v = np.unique(tris).size
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    return int(v - len(edges) + len(tris))


def component_count(mesh: SurfaceMesh) -> int:
    """Connected components of the triangle mesh's vertex graph."""
    if mesh.triangles.size == 0:
        return 0
    tris = mesh.triangles
    used = np.unique(tris)
    remap = np.zeros(used.max() + 1, dtype=int)
    remap[used] = np.arange(used.size)
    e = remap[np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])]
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(used.size, used.size))
    return int(connected_components(g, directed=False)[0])


# Cube corner offsets and the edges between them (standard ordering; the
# triangle table below is the classic 256-case lookup for this layout).
_CORNERS = np.array(
    [
        (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
    ]
)
_EDGE_CORNERS = [
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
]
# For each cube edge: offset of its lower corner and the axis it runs along.
_EDGE_LOWER = np.array(
    [_CORNERS[min(a, b, key=lambda c: tuple(_CORNERS[c]))] for a, b in _EDGE_CORNERS]
)
_EDGE_AXIS = np.array(
    [int(np.argmax(_CORNERS[b] != _CORNERS[a])) for a, b in _EDGE_CORNERS]
)

_TRI_TABLE = (
    (),
    (0, 8, 3),
    (0, 1, 9),
    (1, 8, 3, 9, 8, 1),
    (1, 2, 10),
    (0, 8, 3, 1, 2, 10),
    (9, 2, 10, 0, 2, 9),
    (2, 8, 3, 2, 10, 8, 10, 9, 8),
    (3, 11, 2),
    (0, 11, 2, 8, 11, 0),
    (1, 9, 0, 2, 3, 11),
    (1, 11, 2, 1, 9, 11, 9, 8, 11),
    (3, 10, 1, 11, 10, 3),
    (0, 10, 1, 0, 8, 10, 8, 11, 10),
    (3, 9, 0, 3, 11, 9, 11, 10, 9),
    (9, 8, 10, 10, 8, 11),
    (4, 7, 8),
    (4, 3, 0, 7, 3, 4),
    (0, 1, 9, 8, 4, 7),
    (4, 1, 9, 4, 7, 1, 7, 3, 1),
    (1, 2, 10, 8, 4, 7),
    (3, 4, 7, 3, 0, 4, 1, 2, 10),
    (9, 2, 10, 9, 0, 2, 8, 4, 7),
    (2, 10, 9, 2, 9, 7, 2, 7, 3, 7, 9, 4),
    (8, 4, 7, 3, 11, 2),
    (11, 4, 7, 11, 2, 4, 2, 0, 4),
    (9, 0, 1, 8, 4, 7, 2, 3, 11),
    (4, 7, 11, 9, 4, 11, 9, 11, 2, 9, 2, 1),
    (3, 10, 1, 3, 11, 10, 7, 8, 4),
    (1, 11, 10, 1, 4, 11, 1, 0, 4, 7, 11, 4),
    (4, 7, 8, 9, 0, 11, 9, 11, 10, 11, 0, 3),
    (4, 7, 11, 4, 11, 9, 9, 11, 10),
    (9, 5, 4),
    (9, 5, 4, 0, 8, 3),
    (0, 5, 4, 1, 5, 0),
    (8, 5, 4, 8, 3, 5, 3, 1, 5),
    (1, 2, 10, 9, 5, 4),
    (3, 0, 8, 1, 2, 10, 4, 9, 5),
    (5, 2, 10, 5, 4, 2, 4, 0, 2),
    (2, 10, 5, 3, 2, 5, 3, 5, 4, 3, 4, 8),
    (9, 5, 4, 2, 3, 11),
    (0, 11, 2, 0, 8, 11, 4, 9, 5),
    (0, 5, 4, 0, 1, 5, 2, 3, 11),
    (2, 1, 5, 2, 5, 8, 2, 8, 11, 4, 8, 5),
    (10, 3, 11, 10, 1, 3, 9, 5, 4),
    (4, 9, 5, 0, 8, 1, 8, 10, 1, 8, 11, 10),
    (5, 4, 0, 5, 0, 11, 5, 11, 10, 11, 0, 3),
    (5, 4, 8, 5, 8, 10, 10, 8, 11),
    (9, 7, 8, 5, 7, 9),
    (9, 3, 0, 9, 5, 3, 5, 7, 3),
    (0, 7, 8, 0, 1, 7, 1, 5, 7),
    (1, 5, 3, 3, 5, 7),
    (9, 7, 8, 9, 5, 7, 10, 1, 2),
    (10, 1, 2, 9, 5, 0, 5, 3, 0, 5, 7, 3),
    (8, 0, 2, 8, 2, 5, 8, 5, 7, 10, 5, 2),
    (2, 10, 5, 2, 5, 3, 3, 5, 7),
    (7, 9, 5, 7, 8, 9, 3, 11, 2),
    (9, 5, 7, 9, 7, 2, 9, 2, 0, 2, 7, 11),
    (2, 3, 11, 0, 1, 8, 1, 7, 8, 1, 5, 7),
    (11, 2, 1, 11, 1, 7, 7, 1, 5),
    (9, 5, 8, 8, 5, 7, 10, 1, 3, 10, 3, 11),
    (5, 7, 0, 5, 0, 9, 7, 11, 0, 1, 0, 10, 11, 10, 0),
    (11, 10, 0, 11, 0, 3, 10, 5, 0, 8, 0, 7, 5, 7, 0),
    (11, 10, 5, 7, 11, 5),
    (10, 6, 5),
    (0, 8, 3, 5, 10, 6),
    (9, 0, 1, 5, 10, 6),
    (1, 8, 3, 1, 9, 8, 5, 10, 6),
    (1, 6, 5, 2, 6, 1),
    (1, 6, 5, 1, 2, 6, 3, 0, 8),
    (9, 6, 5, 9, 0, 6, 0, 2, 6),
    (5, 9, 8, 5, 8, 2, 5, 2, 6, 3, 2, 8),
    (2, 3, 11, 10, 6, 5),
    (11, 0, 8, 11, 2, 0, 10, 6, 5),
    (0, 1, 9, 2, 3, 11, 5, 10, 6),
    (5, 10, 6, 1, 9, 2, 9, 11, 2, 9, 8, 11),
    (6, 3, 11, 6, 5, 3, 5, 1, 3),
    (0, 8, 11, 0, 11, 5, 0, 5, 1, 5, 11, 6),
    (3, 11, 6, 0, 3, 6, 0, 6, 5, 0, 5, 9),
    (6, 5, 9, 6, 9, 11, 11, 9, 8),
    (5, 10, 6, 4, 7, 8),
    (4, 3, 0, 4, 7, 3, 6, 5, 10),
    (1, 9, 0, 5, 10, 6, 8, 4, 7),
    (10, 6, 5, 1, 9, 7, 1, 7, 3, 7, 9, 4),
    (6, 1, 2, 6, 5, 1, 4, 7, 8),
    (1, 2, 5, 5, 2, 6, 3, 0, 4, 3, 4, 7),
    (8, 4, 7, 9, 0, 5, 0, 6, 5, 0, 2, 6),
    (7, 3, 9, 7, 9, 4, 3, 2, 9, 5, 9, 6, 2, 6, 9),
    (3, 11, 2, 7, 8, 4, 10, 6, 5),
    (5, 10, 6, 4, 7, 2, 4, 2, 0, 2, 7, 11),
    (0, 1, 9, 4, 7, 8, 2, 3, 11, 5, 10, 6),
    (9, 2, 1, 9, 11, 2, 9, 4, 11, 7, 11, 4, 5, 10, 6),
    (8, 4, 7, 3, 11, 5, 3, 5, 1, 5, 11, 6),
    (5, 1, 11, 5, 11, 6, 1, 0, 11, 7, 11, 4, 0, 4, 11),
    (0, 5, 9, 0, 6, 5, 0, 3, 6, 11, 6, 3, 8, 4, 7),
    (6, 5, 9, 6, 9, 11, 4, 7, 9, 7, 11, 9),
    (10, 4, 9, 6, 4, 10),
    (4, 10, 6, 4, 9, 10, 0, 8, 3),
    (10, 0, 1, 10, 6, 0, 6, 4, 0),
    (8, 3, 1, 8, 1, 6, 8, 6, 4, 6, 1, 10),
    (1, 4, 9, 1, 2, 4, 2, 6, 4),
    (3, 0, 8, 1, 2, 9, 2, 4, 9, 2, 6, 4),
    (0, 2, 4, 4, 2, 6),
    (8, 3, 2, 8, 2, 4, 4, 2, 6),
    (10, 4, 9, 10, 6, 4, 11, 2, 3),
    (0, 8, 2, 2, 8, 11, 4, 9, 10, 4, 10, 6),
    (3, 11, 2, 0, 1, 6, 0, 6, 4, 6, 1, 10),
    (6, 4, 1, 6, 1, 10, 4, 8, 1, 2, 1, 11, 8, 11, 1),
    (9, 6, 4, 9, 3, 6, 9, 1, 3, 11, 6, 3),
    (8, 11, 1, 8, 1, 0, 11, 6, 1, 9, 1, 4, 6, 4, 1),
    (3, 11, 6, 3, 6, 0, 0, 6, 4),
    (6, 4, 8, 11, 6, 8),
    (7, 10, 6, 7, 8, 10, 8, 9, 10),
    (0, 7, 3, 0, 10, 7, 0, 9, 10, 6, 7, 10),
    (10, 6, 7, 1, 10, 7, 1, 7, 8, 1, 8, 0),
    (10, 6, 7, 10, 7, 1, 1, 7, 3),
    (1, 2, 6, 1, 6, 8, 1, 8, 9, 8, 6, 7),
    (2, 6, 9, 2, 9, 1, 6, 7, 9, 0, 9, 3, 7, 3, 9),
    (7, 8, 0, 7, 0, 6, 6, 0, 2),
    (7, 3, 2, 6, 7, 2),
    (2, 3, 11, 10, 6, 8, 10, 8, 9, 8, 6, 7),
    (2, 0, 7, 2, 7, 11, 0, 9, 7, 6, 7, 10, 9, 10, 7),
    (1, 8, 0, 1, 7, 8, 1, 10, 7, 6, 7, 10, 2, 3, 11),
    (11, 2, 1, 11, 1, 7, 10, 6, 1, 6, 7, 1),
    (8, 9, 6, 8, 6, 7, 9, 1, 6, 11, 6, 3, 1, 3, 6),
    (0, 9, 1, 11, 6, 7),
    (7, 8, 0, 7, 0, 6, 3, 11, 0, 11, 6, 0),
    (7, 11, 6),
    (7, 6, 11),
    (3, 0, 8, 11, 7, 6),
    (0, 1, 9, 11, 7, 6),
    (8, 1, 9, 8, 3, 1, 11, 7, 6),
    (10, 1, 2, 6, 11, 7),
    (1, 2, 10, 3, 0, 8, 6, 11, 7),
    (2, 9, 0, 2, 10, 9, 6, 11, 7),
    (6, 11, 7, 2, 10, 3, 10, 8, 3, 10, 9, 8),
    (7, 2, 3, 6, 2, 7),
    (7, 0, 8, 7, 6, 0, 6, 2, 0),
    (2, 7, 6, 2, 3, 7, 0, 1, 9),
    (1, 6, 2, 1, 8, 6, 1, 9, 8, 8, 7, 6),
    (10, 7, 6, 10, 1, 7, 1, 3, 7),
    (10, 7, 6, 1, 7, 10, 1, 8, 7, 1, 0, 8),
    (0, 3, 7, 0, 7, 10, 0, 10, 9, 6, 10, 7),
    (7, 6, 10, 7, 10, 8, 8, 10, 9),
    (6, 8, 4, 11, 8, 6),
    (3, 6, 11, 3, 0, 6, 0, 4, 6),
    (8, 6, 11, 8, 4, 6, 9, 0, 1),
    (9, 4, 6, 9, 6, 3, 9, 3, 1, 11, 3, 6),
    (6, 8, 4, 6, 11, 8, 2, 10, 1),
    (1, 2, 10, 3, 0, 11, 0, 6, 11, 0, 4, 6),
    (4, 11, 8, 4, 6, 11, 0, 2, 9, 2, 10, 9),
    (10, 9, 3, 10, 3, 2, 9, 4, 3, 11, 3, 6, 4, 6, 3),
    (8, 2, 3, 8, 4, 2, 4, 6, 2),
    (0, 4, 2, 4, 6, 2),
    (1, 9, 0, 2, 3, 4, 2, 4, 6, 4, 3, 8),
    (1, 9, 4, 1, 4, 2, 2, 4, 6),
    (8, 1, 3, 8, 6, 1, 8, 4, 6, 6, 10, 1),
    (10, 1, 0, 10, 0, 6, 6, 0, 4),
    (4, 6, 3, 4, 3, 8, 6, 10, 3, 0, 3, 9, 10, 9, 3),
    (10, 9, 4, 6, 10, 4),
    (4, 9, 5, 7, 6, 11),
    (0, 8, 3, 4, 9, 5, 11, 7, 6),
    (5, 0, 1, 5, 4, 0, 7, 6, 11),
    (11, 7, 6, 8, 3, 4, 3, 5, 4, 3, 1, 5),
    (9, 5, 4, 10, 1, 2, 7, 6, 11),
    (6, 11, 7, 1, 2, 10, 0, 8, 3, 4, 9, 5),
    (7, 6, 11, 5, 4, 10, 4, 2, 10, 4, 0, 2),
    (3, 4, 8, 3, 5, 4, 3, 2, 5, 10, 5, 2, 11, 7, 6),
    (7, 2, 3, 7, 6, 2, 5, 4, 9),
    (9, 5, 4, 0, 8, 6, 0, 6, 2, 6, 8, 7),
    (3, 6, 2, 3, 7, 6, 1, 5, 0, 5, 4, 0),
    (6, 2, 8, 6, 8, 7, 2, 1, 8, 4, 8, 5, 1, 5, 8),
    (9, 5, 4, 10, 1, 6, 1, 7, 6, 1, 3, 7),
    (1, 6, 10, 1, 7, 6, 1, 0, 7, 8, 7, 0, 9, 5, 4),
    (4, 0, 10, 4, 10, 5, 0, 3, 10, 6, 10, 7, 3, 7, 10),
    (7, 6, 10, 7, 10, 8, 5, 4, 10, 4, 8, 10),
    (6, 9, 5, 6, 11, 9, 11, 8, 9),
    (3, 6, 11, 0, 6, 3, 0, 5, 6, 0, 9, 5),
    (0, 11, 8, 0, 5, 11, 0, 1, 5, 5, 6, 11),
    (6, 11, 3, 6, 3, 5, 5, 3, 1),
    (1, 2, 10, 9, 5, 11, 9, 11, 8, 11, 5, 6),
    (0, 11, 3, 0, 6, 11, 0, 9, 6, 5, 6, 9, 1, 2, 10),
    (11, 8, 5, 11, 5, 6, 8, 0, 5, 10, 5, 2, 0, 2, 5),
    (6, 11, 3, 6, 3, 5, 2, 10, 3, 10, 5, 3),
    (5, 8, 9, 5, 2, 8, 5, 6, 2, 3, 8, 2),
    (9, 5, 6, 9, 6, 0, 0, 6, 2),
    (1, 5, 8, 1, 8, 0, 5, 6, 8, 3, 8, 2, 6, 2, 8),
    (1, 5, 6, 2, 1, 6),
    (1, 3, 6, 1, 6, 10, 3, 8, 6, 5, 6, 9, 8, 9, 6),
    (10, 1, 0, 10, 0, 6, 9, 5, 0, 5, 6, 0),
    (0, 3, 8, 5, 6, 10),
    (10, 5, 6),
    (11, 5, 10, 7, 5, 11),
    (11, 5, 10, 11, 7, 5, 8, 3, 0),
    (5, 11, 7, 5, 10, 11, 1, 9, 0),
    (10, 7, 5, 10, 11, 7, 9, 8, 1, 8, 3, 1),
    (11, 1, 2, 11, 7, 1, 7, 5, 1),
    (0, 8, 3, 1, 2, 7, 1, 7, 5, 7, 2, 11),
    (9, 7, 5, 9, 2, 7, 9, 0, 2, 2, 11, 7),
    (7, 5, 2, 7, 2, 11, 5, 9, 2, 3, 2, 8, 9, 8, 2),
    (2, 5, 10, 2, 3, 5, 3, 7, 5),
    (8, 2, 0, 8, 5, 2, 8, 7, 5, 10, 2, 5),
    (9, 0, 1, 5, 10, 3, 5, 3, 7, 3, 10, 2),
    (9, 8, 2, 9, 2, 1, 8, 7, 2, 10, 2, 5, 7, 5, 2),
    (1, 3, 5, 3, 7, 5),
    (0, 8, 7, 0, 7, 1, 1, 7, 5),
    (9, 0, 3, 9, 3, 5, 5, 3, 7),
    (9, 8, 7, 5, 9, 7),
    (5, 8, 4, 5, 10, 8, 10, 11, 8),
    (5, 0, 4, 5, 11, 0, 5, 10, 11, 11, 3, 0),
    (0, 1, 9, 8, 4, 10, 8, 10, 11, 10, 4, 5),
    (10, 11, 4, 10, 4, 5, 11, 3, 4, 9, 4, 1, 3, 1, 4),
    (2, 5, 1, 2, 8, 5, 2, 11, 8, 4, 5, 8),
    (0, 4, 11, 0, 11, 3, 4, 5, 11, 2, 11, 1, 5, 1, 11),
    (0, 2, 5, 0, 5, 9, 2, 11, 5, 4, 5, 8, 11, 8, 5),
    (9, 4, 5, 2, 11, 3),
    (2, 5, 10, 3, 5, 2, 3, 4, 5, 3, 8, 4),
    (5, 10, 2, 5, 2, 4, 4, 2, 0),
    (3, 10, 2, 3, 5, 10, 3, 8, 5, 4, 5, 8, 0, 1, 9),
    (5, 10, 2, 5, 2, 4, 1, 9, 2, 9, 4, 2),
    (8, 4, 5, 8, 5, 3, 3, 5, 1),
    (0, 4, 5, 1, 0, 5),
    (8, 4, 5, 8, 5, 3, 9, 0, 5, 0, 3, 5),
    (9, 4, 5),
    (4, 11, 7, 4, 9, 11, 9, 10, 11),
    (0, 8, 3, 4, 9, 7, 9, 11, 7, 9, 10, 11),
    (1, 10, 11, 1, 11, 4, 1, 4, 0, 7, 4, 11),
    (3, 1, 4, 3, 4, 8, 1, 10, 4, 7, 4, 11, 10, 11, 4),
    (4, 11, 7, 9, 11, 4, 9, 2, 11, 9, 1, 2),
    (9, 7, 4, 9, 11, 7, 9, 1, 11, 2, 11, 1, 0, 8, 3),
    (11, 7, 4, 11, 4, 2, 2, 4, 0),
    (11, 7, 4, 11, 4, 2, 8, 3, 4, 3, 2, 4),
    (2, 9, 10, 2, 7, 9, 2, 3, 7, 7, 4, 9),
    (9, 10, 7, 9, 7, 4, 10, 2, 7, 8, 7, 0, 2, 0, 7),
    (3, 7, 10, 3, 10, 2, 7, 4, 10, 1, 10, 0, 4, 0, 10),
    (1, 10, 2, 8, 7, 4),
    (4, 9, 1, 4, 1, 7, 7, 1, 3),
    (4, 9, 1, 4, 1, 7, 0, 8, 1, 8, 7, 1),
    (4, 0, 3, 7, 4, 3),
    (4, 8, 7),
    (9, 10, 8, 10, 11, 8),
    (3, 0, 9, 3, 9, 11, 11, 9, 10),
    (0, 1, 10, 0, 10, 8, 8, 10, 11),
    (3, 1, 10, 11, 3, 10),
    (1, 2, 11, 1, 11, 9, 9, 11, 8),
    (3, 0, 9, 3, 9, 11, 1, 2, 9, 2, 11, 9),
    (0, 2, 11, 8, 0, 11),
    (3, 2, 11),
    (2, 3, 8, 2, 8, 10, 10, 8, 9),
    (9, 10, 2, 0, 9, 2),
    (2, 3, 8, 2, 8, 10, 0, 1, 8, 1, 10, 8),
    (1, 10, 2),
    (1, 3, 8, 9, 1, 8),
    (0, 9, 1),
    (0, 3, 8),
    (),)


def _interp_positions(grid, keys):
    """Vertex positions for unique global edge keys (axis * nnodes + node)."""
    dims = np.array(grid.dims)
    nnodes = int(np.prod(dims))
    axis = keys // nnodes
    node = keys % nnodes
    idx = np.array(np.unravel_index(node, grid.dims)).T.astype(float)  # (m, d)
    flat = grid.values.reshape(-1)
    step = np.ones(grid.dim, dtype=int)
    for a in range(grid.dim - 1):
        step[a] = int(np.prod(dims[a + 1 :]))
    v0 = flat[node]
    v1 = flat[node + step[axis]]
    t = v0 / (v0 - v1)
    pos = idx
    pos[np.arange(len(keys)), axis] += t
    return grid.origin + pos * grid.spacing


def _cell_corner(arr, offset):
    sl = tuple(
        slice(o, n - 1 + o) for o, n in zip(offset, arr.shape)
    )
    return arr[sl]


def marching_cubes(grid: ScalarGrid) -> SurfaceMesh:
    """Extract the zero-level set of a 3D grid as a triangle mesh."""
    if grid.dim != 3:
        raise ValueError("marching_cubes needs a 3D grid")
    vals = grid.values
    inside = np.where(grid.mask, vals, np.inf) < 0.0

    case = np.zeros(tuple(n - 1 for n in vals.shape), dtype=np.int32)
    ok = np.ones_like(case, dtype=bool)
    for bit, off in enumerate(_CORNERS):
        case |= _cell_corner(inside, off).astype(np.int32) << bit
        ok &= _cell_corner(grid.mask, off)
    active = ok & (case != 0) & (case != 255)
    ci = np.array(np.nonzero(active)).T  # (ncell, 3), C order = ascending flat index
    if ci.shape[0] == 0:
        return SurfaceMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    cases = case[active]

    cell_ord, slots, edges = [], [], []
    for cval in np.unique(cases):
        row = _TRI_TABLE[cval]
        sel = np.nonzero(cases == cval)[0]
        for s in range(len(row) // 3):
            cell_ord.append(sel)
            slots.append(np.full(sel.size, s))
            edges.append(np.tile(row[3 * s : 3 * s + 3], (sel.size, 1)))
    cell_ord = np.concatenate(cell_ord)
    slots = np.concatenate(slots)
    edges = np.concatenate(edges)
    order = np.lexsort((slots, cell_ord))  # deterministic: by cell, then slot
    cell_ord, edges = cell_ord[order], edges[order]

    nnodes = vals.size
    dims = np.array(vals.shape)
    node_of = np.array([dims[1] * dims[2], dims[2], 1])
    base = ci[cell_ord]  # (T, 3) cell lattice coords
    corner_keys = np.empty((len(base), 3), dtype=np.int64)
    for c in range(3):
        e = edges[:, c]
        node = (base + _EDGE_LOWER[e]) @ node_of
        corner_keys[:, c] = _EDGE_AXIS[e] * nnodes + node

    uniq, inverse = np.unique(corner_keys.reshape(-1), return_inverse=True)
    verts = _interp_positions(grid, uniq)
    tris = inverse.reshape(-1, 3)[:, ::-1]  # flip so normals face positive values

    area = 0.5 * np.linalg.norm(
        np.cross(
            verts[tris[:, 1]] - verts[tris[:, 0]],
            verts[tris[:, 2]] - verts[tris[:, 0]],
        ),
        axis=1,
    )
    tris = tris[area > 1e-12 * float(np.max(grid.spacing)) ** 2]
    return SurfaceMesh(verts, tris)


# Marching squares: corners c0=(i,j), c1=(i+1,j), c2=(i+1,j+1), c3=(i,j+1);
# edges e0=(c0,c1), e1=(c1,c2), e2=(c2,c3), e3=(c3,c0).  Saddle cases 5 and
# 10 are resolved by the sign of the cell-center average.
_SQ_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)],
    11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(0, 3)],
}
_SQ_SADDLE = {
    (5, True): [(0, 1), (2, 3)], (5, False): [(3, 0), (1, 2)],
    (10, True): [(3, 0), (1, 2)], (10, False): [(0, 1), (2, 3)],
}
_SQ_EDGE_LOWER = np.array([(0, 0), (1, 0), (0, 1), (0, 0)])
_SQ_EDGE_AXIS = np.array([0, 1, 0, 1])


def marching_squares(grid: ScalarGrid):
    """Extract the zero-level set of a 2D grid as a list of polylines.

    Closed contours repeat their first vertex at the end.
    """
    if grid.dim != 2:
        raise ValueError("marching_squares needs a 2D grid")
    vals = grid.values
    inside = np.where(grid.mask, vals, np.inf) < 0.0

    case = np.zeros(tuple(n - 1 for n in vals.shape), dtype=np.int32)
    ok = np.ones_like(case, dtype=bool)
    for bit, off in enumerate([(0, 0), (1, 0), (1, 1), (0, 1)]):
        case |= _cell_corner(inside, off).astype(np.int32) << bit
        ok &= _cell_corner(grid.mask, off)
    active = ok & (case != 0) & (case != 15)
    cells = np.array(np.nonzero(active)).T
    if cells.shape[0] == 0:
        return []
    cases = case[active]

    nnodes = vals.size
    node_of = np.array([vals.shape[1], 1])
    segments = []
    for (i, j), cval in zip(cells, cases):
        if cval in (5, 10):
            center = 0.25 * (
                vals[i, j] + vals[i + 1, j] + vals[i + 1, j + 1] + vals[i, j + 1]
            )
            segs = _SQ_SADDLE[(int(cval), bool(center < 0))]
        else:
            segs = _SQ_SEGMENTS[int(cval)]
        for ea, eb in segs:
            ka = _SQ_EDGE_AXIS[ea] * nnodes + (np.array([i, j]) + _SQ_EDGE_LOWER[ea]) @ node_of
            kb = _SQ_EDGE_AXIS[eb] * nnodes + (np.array([i, j]) + _SQ_EDGE_LOWER[eb]) @ node_of
            segments.append((int(ka), int(kb)))
    if not segments:
        return []

    uniq = np.unique(np.array(segments).reshape(-1))
    verts = _interp_positions(grid, uniq)
    index = {int(k): i for i, k in enumerate(uniq)}

    adj = {i: [] for i in range(len(uniq))}
    for ka, kb in segments:
        a, b = index[ka], index[kb]
        adj[a].append(b)
        adj[b].append(a)

    visited_edges = set()
    chains = []

    def walk(start, nxt):
        chain = [start, nxt]
        visited_edges.add((min(start, nxt), max(start, nxt)))
        while True:
            cur, prev = chain[-1], chain[-2]
            options = [
                v
                for v in sorted(adj[cur])
                if (min(cur, v), max(cur, v)) not in visited_edges
            ]
            if not options:
                return chain
            nv = options[0]
            visited_edges.add((min(cur, nv), max(cur, nv)))
            chain.append(nv)

    # open chains first (endpoints of degree 1), then leftover closed loops
    for start in sorted(adj):
        if len(adj[start]) == 1:
            nxt = adj[start][0]
            if (min(start, nxt), max(start, nxt)) not in visited_edges:
                chains.append(walk(start, nxt))
    for start in sorted(adj):
        for nxt in sorted(adj[start]):
            if (min(start, nxt), max(start, nxt)) not in visited_edges:
                chains.append(walk(start, nxt))

    return [verts[np.array(chain)] for chain in chains]
