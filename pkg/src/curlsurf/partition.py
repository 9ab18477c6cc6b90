"""Overlapping ball cover of a point cloud and its partition-of-unity weights.

Patch centers are a greedy farthest-point subsample of the cloud, which is
deterministic and quasi-uniform.  All patches start at the same radius
rho = (1 + delta) * tau / 2, where tau is the largest nearest-neighbor
distance among the centers, and grow geometrically until each patch holds
enough points for its local fit and every cloud point lies strictly inside
at least one patch.

Weights are Shepard normalizations of the C^1 quadratic B-spline bump

    kappa(r) = 1 - 3 r^2        on [0, 1/3]
             = 1.5 (1 - r)^2    on [1/3, 1]
             = 0                outside,

evaluated at r = ||x - center|| / radius, so they sum to one wherever the
cover reaches and vanish on each patch boundary with a continuous gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

GROWTH_FACTOR = 1.25


class UncoveredPointError(ValueError):
    """A query point lies outside every patch."""


class CoverConfigError(ValueError):
    """The requested cover cannot be built (e.g. n_min > number of points)."""


def select_centers(points, m_target: int) -> np.ndarray:
    """Greedy farthest-point subsample; returns indices into the cloud.

    The first center is the point nearest the centroid; each following
    center is the point farthest from all previously chosen ones.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= m_target <= n:
        raise CoverConfigError(f"m_target={m_target} outside 1..{n}")
    first = int(np.argmin(np.linalg.norm(points - points.mean(axis=0), axis=1)))
    chosen = np.empty(m_target, dtype=int)
    chosen[0] = first
    dist = np.linalg.norm(points - points[first], axis=1)
    for i in range(1, m_target):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1), out=dist)
    return chosen


def select_centers_graph(points, m_target: int, k: int = 12) -> np.ndarray:
    """Farthest-point subsample in the k-nearest-neighbor graph metric.

    Shortest-path distances approximate geodesic distances along the
    sampled surface, so folded regions (large surface area in a small
    Euclidean ball) receive their fair share of centers.  Falls back to
    plain Euclidean behavior on well-spread clouds.  Same seeding rule as
    select_centers.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= m_target <= n:
        raise CoverConfigError(f"m_target={m_target} outside 1..{n}")
    k = min(k, n - 1)
    dist_nn, idx_nn = cKDTree(points).query(points, k=k + 1)
    rows = np.repeat(np.arange(n), k)
    graph = csr_matrix(
        (dist_nn[:, 1:].reshape(-1), (rows, idx_nn[:, 1:].reshape(-1))), shape=(n, n)
    )
    graph = graph.maximum(graph.T)

    first = int(np.argmin(np.linalg.norm(points - points.mean(axis=0), axis=1)))
    chosen = np.empty(m_target, dtype=int)
    chosen[0] = first
    dist = dijkstra(graph, indices=first, min_only=True)
    for i in range(1, m_target):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        np.minimum(dist, dijkstra(graph, indices=nxt, min_only=True), out=dist)
    return chosen


def _strict_members(tree, points, center, radius):
    idx = np.array(sorted(tree.query_ball_point(center, radius)), dtype=int)
    if idx.size == 0:
        return idx
    d = np.linalg.norm(points[idx] - center, axis=1)
    return idx[d < radius]


def compute_radii(centers, points, delta: float, n_min: int):
    """Radii and strict membership lists for patches at the given centers.

    Initial radius (1 + delta) * tau / 2 everywhere; any patch with fewer
    than n_min members grows by GROWTH_FACTOR until satisfied, and any
    cloud point left uncovered grows its nearest patch the same way.  For
    a single center tau is taken as 2 * max||x - center|| / (1 + delta) so
    the initial ball just reaches the farthest point.
    """
    centers = np.asarray(centers, dtype=float)
    points = np.asarray(points, dtype=float)
    m = centers.shape[0]
    if m < 1:
        raise CoverConfigError("no centers")
    if delta <= 0:
        raise CoverConfigError("delta must be > 0")
    if n_min > points.shape[0]:
        raise CoverConfigError(
            f"n_min={n_min} exceeds the number of cloud points {points.shape[0]}"
        )

    if m >= 2:
        tau = float(np.max(cKDTree(centers).query(centers, k=2)[0][:, 1]))
    else:
        tau = 2.0 * float(np.max(np.linalg.norm(points - centers[0], axis=1)))
        tau /= 1.0 + delta
    if tau <= 0:
        raise CoverConfigError("coincident centers give zero spacing")

    radii = np.full(m, (1.0 + delta) * tau / 2.0)
    tree = cKDTree(points)
    members = [_strict_members(tree, points, centers[k], radii[k]) for k in range(m)]

    for k in range(m):
        while members[k].size < n_min:
            radii[k] *= GROWTH_FACTOR
            members[k] = _strict_members(tree, points, centers[k], radii[k])

    covered = np.zeros(points.shape[0], dtype=bool)
    for k in range(m):
        covered[members[k]] = True
    center_tree = cKDTree(centers)
    while not covered.all():
        p = int(np.argmin(covered))  # lowest uncovered index
        k = int(center_tree.query(points[p])[1])
        # grow until the membership test itself admits p (the strict
        # membership distance may differ from a direct gap computation by
        # an ulp, so testing against a separately computed gap can loop)
        while True:
            members[k] = _strict_members(tree, points, centers[k], radii[k])
            covered[members[k]] = True
            if covered[p]:
                break
            radii[k] *= GROWTH_FACTOR

    return radii, members


@dataclass
class PatchCover:
    """Centers, radii, and membership of the overlapping ball cover."""

    centers: np.ndarray  # (M, d)
    radii: np.ndarray  # (M,)
    members: list  # list of index arrays into the cloud
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        if self.centers.shape[0] != self.radii.shape[0]:
            raise ValueError("centers and radii length mismatch")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        self._tree = cKDTree(self.centers)

    @property
    def size(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def max_radius(self):
        return float(np.max(self.radii))


def build_cover(points, m_target, delta, n_min, center_metric="euclidean") -> PatchCover:
    if center_metric == "euclidean":
        idx = select_centers(points, m_target)
    elif center_metric == "graph":
        idx = select_centers_graph(points, m_target)
    else:
        raise CoverConfigError(f"unknown center metric {center_metric!r}")
    centers = np.asarray(points, dtype=float)[idx]
    radii, members = compute_radii(centers, points, delta, n_min)
    return PatchCover(centers=centers, radii=radii, members=members)


def covering_patches(cover: PatchCover, x) -> np.ndarray:
    """Indices m with ||x - center_m|| < radius_m, ascending."""
    x = np.asarray(x, dtype=float)
    cand = np.array(sorted(cover._tree.query_ball_point(x, cover.max_radius)), dtype=int)
    if cand.size == 0:
        return cand
    d = np.linalg.norm(cover.centers[cand] - x, axis=1)
    return cand[d < cover.radii[cand]]


def kappa(r):
    """The C^1 quadratic B-spline bump on [0, 1)."""
    r = np.asarray(r, dtype=float)
    inner = 1.0 - 3.0 * r**2
    outer = 1.5 * (1.0 - r) ** 2
    return np.where(r <= 1.0 / 3.0, inner, np.where(r <= 1.0, outer, 0.0))


def weight(cover: PatchCover, m: int, x) -> float:
    """Shepard weight of patch m at x; zero outside patch m.

    Raises UncoveredPointError when x lies outside the whole cover.
    """
    x = np.asarray(x, dtype=float)
    cov = covering_patches(cover, x)
    if cov.size == 0:
        raise UncoveredPointError(f"point {x} is outside the cover")
    if m not in cov:
        return 0.0
    d = np.linalg.norm(cover.centers[cov] - x, axis=1)
    k = kappa(d / cover.radii[cov])
    return float(k[np.searchsorted(cov, m)] / np.sum(k))


def max_overlap(cover: PatchCover, points) -> int:
    """Largest number of patches covering any of the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return max(covering_patches(cover, p).size for p in points)
