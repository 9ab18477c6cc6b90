"""Point cloud input/output, normal estimation, and synthetic normal noise.

Supported inputs: whitespace-separated xyz text ("x y z [nx ny nz]" per line,
or "x y [nx ny]" for planar clouds), ASCII ply with per-vertex x y z and
optionally nx ny nz, and Wavefront obj v/vn records.  Meshes are written as
obj or ASCII ply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial import cKDTree


class CloudParseError(ValueError):
    """Malformed or unusable point cloud file."""


class DegenerateNeighborhoodError(ValueError):
    """A point's neighborhood carries no spatial extent (co-located duplicates)."""


@dataclass(frozen=True)
class OrientedPointCloud:
    """Positions plus (optionally) one normal per point."""

    points: np.ndarray  # (N, d), d in {2, 3}
    normals: np.ndarray | None = None  # (N, d) or None when absent

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3) or pts.shape[0] < 1:
            raise ValueError(f"points must be (N>=1, 2 or 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        if self.normals is not None:
            nr = np.atleast_2d(np.asarray(self.normals, dtype=float))
            if nr.shape != pts.shape:
                raise ValueError("normals must match points in shape")
            if not np.all(np.isfinite(nr)):
                raise ValueError("non-finite normals")
            object.__setattr__(self, "normals", nr)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def has_normals(self):
        return self.normals is not None

    def normalized(self) -> "OrientedPointCloud":
        """Copy with unit normals."""
        if self.normals is None:
            raise ValueError("cloud has no normals")
        norms = np.linalg.norm(self.normals, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero-length normal cannot be normalized")
        return OrientedPointCloud(self.points, self.normals / norms)


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt.lower()
    suffix = str(path).rsplit(".", 1)[-1].lower()
    if suffix in ("xyz", "ply", "obj"):
        return suffix
    raise CloudParseError(f"cannot infer format from {path!r}; pass format=")


def load_cloud(path, fmt=None) -> OrientedPointCloud:
    """Load a cloud from an xyz, ply, or obj file."""
    fmt = _infer_format(path, fmt)
    if fmt == "xyz":
        return _load_xyz(path)
    if fmt == "ply":
        return _load_ply(path)
    if fmt == "obj":
        return _load_obj(path)
    raise CloudParseError(f"unsupported format {fmt!r}")


def _parse_floats(tokens, path, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise CloudParseError(f"{path}:{lineno}: malformed number") from exc
    if not all(np.isfinite(vals)):
        raise CloudParseError(f"{path}:{lineno}: non-finite value")
    return vals


def _load_xyz(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            vals = _parse_floats(tokens, path, lineno)
            if width is None:
                width = len(vals)
                if width not in (2, 3, 4, 6):
                    raise CloudParseError(
                        f"{path}:{lineno}: expected 2, 3, 4, or 6 columns, got {width}"
                    )
            elif len(vals) != width:
                raise CloudParseError(
                    f"{path}:{lineno}: mixed column counts ({len(vals)} vs {width})"
                )
            rows.append(vals)
    if not rows:
        raise CloudParseError(f"{path}: empty file")
    data = np.array(rows)
    if width in (2, 3):
        return OrientedPointCloud(data)
    d = width // 2
    return OrientedPointCloud(data[:, :d], data[:, d:])


def _load_ply(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudParseError(f"{path}: missing ply magic")
    elements = []  # (name, count, [property names])
    body_start = None
    i = 1
    while i < len(lines):
        tokens = lines[i].split()
        i += 1
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] != "ascii":
                raise CloudParseError(f"{path}: only ascii ply is supported")
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise CloudParseError(f"{path}: property before element")
            elements[-1][2].append((tokens[1], tokens[-1]))
        elif tokens[0] == "end_header":
            body_start = i
            break
    if body_start is None:
        raise CloudParseError(f"{path}: unterminated ply header")

    points = normals = None
    row = body_start
    for name, count, props in elements:
        if name == "vertex":
            prop_names = [p[1] for p in props if p[0] != "list"]
            try:
                ix = [prop_names.index(c) for c in ("x", "y", "z")]
            except ValueError as exc:
                raise CloudParseError(f"{path}: vertex element lacks x/y/z") from exc
            has_n = all(c in prop_names for c in ("nx", "ny", "nz"))
            in_ = [prop_names.index(c) for c in ("nx", "ny", "nz")] if has_n else None
            pts, nrm = [], []
            for j in range(count):
                if row + j >= len(lines):
                    raise CloudParseError(f"{path}: truncated vertex data")
                vals = _parse_floats(lines[row + j].split(), path, row + j + 1)
                pts.append([vals[k] for k in ix])
                if has_n:
                    nrm.append([vals[k] for k in in_])
            points = np.array(pts)
            normals = np.array(nrm) if has_n else None
        row += count
    if points is None or points.size == 0:
        raise CloudParseError(f"{path}: no vertex data")
    return OrientedPointCloud(points, normals)


def _load_obj(path):
    pts, nrm = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                pts.append(_parse_floats(tokens[1:4], path, lineno))
            elif tokens[0] == "vn":
                nrm.append(_parse_floats(tokens[1:4], path, lineno))
    if not pts:
        raise CloudParseError(f"{path}: no vertices")
    points = np.array(pts)
    # vn records pair with vertices only when counts agree (point-cloud obj);
    # face-indexed normals are not reconstructed.
    normals = np.array(nrm) if len(nrm) == len(pts) else None
    return OrientedPointCloud(points, normals)


def estimate_normals(cloud: OrientedPointCloud, k: int = 10) -> OrientedPointCloud:
    """Per-point PCA normals with MST-propagated consistent orientation.

    The normal at each point is the smallest-eigenvalue eigenvector of the
    distance-weighted covariance of its k nearest neighbors (plus the
    point itself).  Signs are then
    propagated along a Euclidean minimum spanning tree (built over the
    k-nearest-neighbor graph) so every tree edge has positive normal dot
    product; each tree root is oriented away from the cloud centroid.
    """
    pts = cloud.points
    n, d = pts.shape
    if not d <= k < n:
        raise ValueError(f"need dim <= k < N, got k={k}, N={n}, dim={d}")

    tree = cKDTree(pts)
    dist, idx = tree.query(pts, k=k + 1)
    hoods = pts[idx]  # (n, k+1, d), the point itself first
    # Gaussian distance weights de-emphasize the far edge of the
    # neighborhood; this noticeably reduces the curvature-induced tilt of
    # the PCA plane on curved surfaces
    sig = np.maximum(dist[:, 1:].mean(axis=1), 1e-300)
    wgt = np.exp(-((dist / sig[:, None]) ** 2))
    wc = (wgt[:, :, None] * hoods).sum(axis=1) / wgt.sum(axis=1)[:, None]
    centered = hoods - wc[:, None, :]
    cov = np.einsum("nk,nkd,nke->nde", wgt, centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)

    scale = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    tiny = (1e-12 * max(scale, 1.0)) ** 2
    if np.any(eigvals[:, -1] <= tiny):
        bad = int(np.argmax(eigvals[:, -1] <= tiny))
        raise DegenerateNeighborhoodError(
            f"point {bad} has a zero-extent neighborhood (duplicate points?)"
        )
    normals = eigvecs[:, :, 0].copy()

    rows = np.repeat(np.arange(n), k)
    cols = idx[:, 1:].reshape(-1)
    graph = csr_matrix((dist[:, 1:].reshape(-1), (rows, cols)), shape=(n, n))
    graph = graph.maximum(graph.T)
    mst = minimum_spanning_tree(graph)
    mst = mst + mst.T

    centroid = pts.mean(axis=0)
    seen = np.zeros(n, dtype=bool)
    order_by_dist = np.argsort(-np.linalg.norm(pts - centroid, axis=1))
    for root in order_by_dist:
        if seen[root]:
            continue
        if normals[root] @ (pts[root] - centroid) < 0:
            normals[root] *= -1
        order, pred = breadth_first_order(mst, int(root), directed=False)
        seen[order] = True
        for node in order[1:]:
            if normals[pred[node]] @ normals[node] < 0:
                normals[node] *= -1
    return OrientedPointCloud(pts, normals)


def perturb_normals(cloud: OrientedPointCloud, sigma: float, seed: int) -> OrientedPointCloud:
    """Add componentwise N(0, sigma^2) noise to the normals.

    The result is deliberately not re-normalized; the noisy vector field is
    what gets fitted.  Deterministic for a fixed seed.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if cloud.normals is None:
        raise ValueError("cloud has no normals to perturb")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=cloud.normals.shape)
    return OrientedPointCloud(cloud.points, cloud.normals + noise)


def write_mesh(mesh, path, fmt=None):
    """Write a triangle mesh as obj or ascii ply (17 significant digits)."""
    fmt = _infer_format(path, fmt)
    verts = np.atleast_2d(np.asarray(mesh.vertices, dtype=float))
    tris = np.asarray(mesh.triangles, dtype=int).reshape(-1, 3)
    if verts.size == 0:
        verts = verts.reshape(0, 3)
    if tris.size and (tris.min() < 0 or tris.max() >= verts.shape[0]):
        raise ValueError("triangle indices out of range")
    if fmt == "obj":
        with open(path, "w") as fh:
            for v in verts:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for t in tris:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
    elif fmt == "ply":
        with open(path, "w") as fh:
            fh.write("ply\nformat ascii 1.0\n")
            fh.write(f"element vertex {verts.shape[0]}\n")
            fh.write("property double x\nproperty double y\nproperty double z\n")
            fh.write(f"element face {tris.shape[0]}\n")
            fh.write("property list uchar int vertex_indices\nend_header\n")
            for v in verts:
                fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for t in tris:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
    else:
        raise ValueError(f"unsupported mesh format {fmt!r}")


def write_cloud_xyz(cloud: OrientedPointCloud, path):
    """Write a cloud as xyz text (normals appended as columns when present)."""
    data = cloud.points
    if cloud.has_normals:
        data = np.hstack([cloud.points, cloud.normals])
    np.savetxt(path, data, fmt="%.17g")


def write_polylines_obj(polylines, path):
    """Write 2D polylines as obj v/l records (z = 0)."""
    with open(path, "w") as fh:
        offset = 1
        for poly in polylines:
            poly = np.atleast_2d(np.asarray(poly, dtype=float))
            for v in poly:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} 0\n")
            ids = " ".join(str(offset + i) for i in range(poly.shape[0]))
            fh.write(f"l {ids}\n")
            offset += poly.shape[0]
