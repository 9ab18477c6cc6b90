import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial import cKDTree

from curlsurf.cloud import (
    CloudParseError,
    DegenerateNeighborhoodError,
    OrientedPointCloud,
    estimate_normals,
    load_cloud,
    perturb_normals,
    write_cloud_xyz,
    write_mesh,
    write_polylines_obj,
)
from curlsurf.isosurface import SurfaceMesh
from curlsurf.synthetic import sphere, trefoil_pipe


def test_cloud_validation():
    with pytest.raises(ValueError):
        OrientedPointCloud(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        OrientedPointCloud(np.array([[np.nan, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        OrientedPointCloud(np.zeros((3, 3)), np.zeros((2, 3)))
    c = OrientedPointCloud(np.zeros((2, 3)) + np.arange(2)[:, None])
    assert not c.has_normals and c.dim == 3 and c.n == 2


def test_normalized():
    c = OrientedPointCloud(np.zeros((2, 2)) + np.arange(2)[:, None], [[3.0, 4.0], [0.0, 2.0]])
    n = c.normalized()
    np.testing.assert_allclose(np.linalg.norm(n.normals, axis=1), 1.0, atol=1e-12)


def test_load_xyz_with_normals(tmp_path):
    p = tmp_path / "pts.xyz"
    p.write_text("1 0 0 1 0 0\n0 1 0 0 1 0\n0 0 1 0 0 1\n")
    c = load_cloud(p)
    assert c.n == 3 and c.dim == 3 and c.has_normals
    np.testing.assert_array_equal(c.points, np.eye(3))
    np.testing.assert_array_equal(c.normals, np.eye(3))


def test_load_xyz_2d(tmp_path):
    p = tmp_path / "pts.xyz"
    p.write_text("0.5 0.5 1 0\n-0.5 0.5 0 1\n")
    c = load_cloud(p)
    assert c.dim == 2 and c.has_normals


def test_load_xyz_errors(tmp_path):
    p = tmp_path / "bad.xyz"
    p.write_text("1 2 three\n")
    with pytest.raises(CloudParseError):
        load_cloud(p)
    p.write_text("1 2 3\n1 2\n")
    with pytest.raises(CloudParseError, match="mixed"):
        load_cloud(p)
    p.write_text("1 2 inf\n")
    with pytest.raises(CloudParseError, match="non-finite"):
        load_cloud(p)
    p.write_text("")
    with pytest.raises(CloudParseError, match="empty"):
        load_cloud(p)
    p.write_text("1 2 3 4 5\n")
    with pytest.raises(CloudParseError, match="columns"):
        load_cloud(p)


def test_load_ply_with_normals(tmp_path):
    p = tmp_path / "pts.ply"
    p.write_text(
        "ply\nformat ascii 1.0\ncomment test\n"
        "element vertex 2\n"
        "property double x\nproperty double y\nproperty double z\n"
        "property double nx\nproperty double ny\nproperty double nz\n"
        "end_header\n"
        "0 0 1 0 0 1\n1 0 0 1 0 0\n"
    )
    c = load_cloud(p)
    assert c.n == 2 and c.has_normals
    np.testing.assert_array_equal(c.points, [[0, 0, 1], [1, 0, 0]])
    np.testing.assert_array_equal(c.normals, [[0, 0, 1], [1, 0, 0]])


def test_load_ply_rejects_binary(tmp_path):
    p = tmp_path / "pts.ply"
    p.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(CloudParseError, match="ascii"):
        load_cloud(p)


def test_load_obj_vertices_only_flags_missing_normals(tmp_path):
    p = tmp_path / "pts.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    c = load_cloud(p)
    assert c.n == 3 and not c.has_normals


def test_load_obj_with_matching_normals(tmp_path):
    p = tmp_path / "pts.obj"
    p.write_text("v 0 0 0\nvn 0 0 1\nv 1 0 0\nvn 1 0 0\n")
    c = load_cloud(p)
    assert c.has_normals
    np.testing.assert_array_equal(c.normals, [[0, 0, 1], [1, 0, 0]])


def test_estimate_normals_sphere_within_5_degrees():
    cloud, _ = sphere(200)
    bare = OrientedPointCloud(cloud.points)
    est = estimate_normals(bare, k=10)
    radial = cloud.points / np.linalg.norm(cloud.points, axis=1, keepdims=True)
    dots = np.einsum("nd,nd->n", est.normals, radial)
    assert np.all(dots > 0)  # oriented outward
    angles = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    assert angles.max() <= 5.0


def test_estimate_normals_mst_edges_consistent():
    cloud, _ = trefoil_pipe(400)
    est = estimate_normals(OrientedPointCloud(cloud.points), k=8)
    pts = est.points
    n = pts.shape[0]
    # oracle MST over the k-nearest-neighbor graph, rebuilt independently
    dist, idx = cKDTree(pts).query(pts, k=9)
    rows = np.repeat(np.arange(n), 8)
    g = csr_matrix((dist[:, 1:].reshape(-1), (rows, idx[:, 1:].reshape(-1))), shape=(n, n))
    mst = minimum_spanning_tree(g.maximum(g.T))
    order, pred = breadth_first_order(mst + mst.T, 0, directed=False)
    for node in order[1:]:
        assert est.normals[pred[node]] @ est.normals[node] > 0


def test_estimate_normals_collinear_2d():
    pts = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    est = estimate_normals(OrientedPointCloud(pts), k=2)
    line = np.array([1.0, 2.0]) / np.sqrt(5.0)
    for nr in est.normals:
        assert abs(nr @ line) < 1e-12
        assert abs(np.linalg.norm(nr) - 1.0) < 1e-12


def test_estimate_normals_duplicate_neighborhood_raises():
    rng = np.random.default_rng(0)
    pts = np.concatenate([np.zeros((5, 3)), rng.normal(size=(10, 3)) + 5.0])
    with pytest.raises(DegenerateNeighborhoodError):
        estimate_normals(OrientedPointCloud(pts), k=4)


def test_estimate_normals_k_bounds():
    cloud, _ = sphere(20)
    with pytest.raises(ValueError):
        estimate_normals(cloud, k=20)
    with pytest.raises(ValueError):
        estimate_normals(cloud, k=2)


def test_perturb_zero_sigma_identity():
    cloud, _ = sphere(50)
    out = perturb_normals(cloud, 0.0, seed=1)
    np.testing.assert_array_equal(out.normals, cloud.normals)
    np.testing.assert_array_equal(out.points, cloud.points)


def test_perturb_noise_statistics():
    cloud, _ = trefoil_pipe(23064)
    out = perturb_normals(cloud, 0.3, seed=2)
    eps = out.normals - cloud.normals
    sd = eps.std(axis=0)
    np.testing.assert_allclose(sd, 0.3, rtol=0.02)
    assert np.abs(eps.mean(axis=0)).max() < 0.01


def test_perturb_deterministic():
    cloud, _ = sphere(100)
    a = perturb_normals(cloud, 0.3, seed=42)
    b = perturb_normals(cloud, 0.3, seed=42)
    np.testing.assert_array_equal(a.normals, b.normals)
    c = perturb_normals(cloud, 0.3, seed=43)
    assert not np.array_equal(a.normals, c.normals)


def test_perturb_rejects_negative_sigma():
    cloud, _ = sphere(10)
    with pytest.raises(ValueError):
        perturb_normals(cloud, -0.1, seed=0)


def test_write_mesh_single_triangle_obj(tmp_path):
    mesh = SurfaceMesh(np.eye(3), np.array([[0, 1, 2]]))
    p = tmp_path / "tri.obj"
    write_mesh(mesh, p)
    lines = p.read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 3
    assert sum(ln.startswith("f ") for ln in lines) == 1


def test_write_mesh_empty(tmp_path):
    mesh = SurfaceMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    for name in ("empty.obj", "empty.ply"):
        p = tmp_path / name
        write_mesh(mesh, p)
        assert p.exists()
    assert "element vertex 0" in (tmp_path / "empty.ply").read_text()
    assert (tmp_path / "empty.obj").read_text() == ""


def test_write_mesh_roundtrip_10k(tmp_path):
    rng = np.random.default_rng(3)
    verts = rng.normal(size=(5000, 3)) * 100
    tris = rng.integers(0, 5000, size=(10000, 3))
    mesh = SurfaceMesh(verts, tris)
    for fmt in ("obj", "ply"):
        p = tmp_path / f"mesh.{fmt}"
        write_mesh(mesh, p)
        back = load_cloud(p)
        assert np.abs(back.points - verts).max() <= 1e-8


def test_write_mesh_index_out_of_range(tmp_path):
    mesh = SurfaceMesh.__new__(SurfaceMesh)
    object.__setattr__(mesh, "vertices", np.eye(3))
    object.__setattr__(mesh, "triangles", np.array([[0, 1, 5]]))
    with pytest.raises(ValueError):
        write_mesh(mesh, tmp_path / "bad.obj")


def test_load_write_load_idempotent(tmp_path):
    # a point cloud written as a vertex-only mesh survives a round trip
    cloud, _ = sphere(128)
    mesh = SurfaceMesh(cloud.points, np.zeros((0, 3), dtype=int))
    p1 = tmp_path / "a.obj"
    write_mesh(mesh, p1)
    c1 = load_cloud(p1)
    p2 = tmp_path / "b.obj"
    write_mesh(SurfaceMesh(c1.points, np.zeros((0, 3), dtype=int)), p2)
    c2 = load_cloud(p2)
    assert np.abs(c2.points - cloud.points).max() <= 1e-8


def test_write_cloud_xyz_roundtrip(tmp_path):
    cloud, _ = sphere(64)
    p = tmp_path / "c.xyz"
    write_cloud_xyz(cloud, p)
    back = load_cloud(p)
    assert np.abs(back.points - cloud.points).max() <= 1e-12
    assert np.abs(back.normals - cloud.normals).max() <= 1e-12


def test_write_polylines_obj(tmp_path):
    p = tmp_path / "lines.obj"
    write_polylines_obj([np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])], p)
    lines = p.read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 3
    assert any(ln.startswith("l 1 2 3") for ln in lines)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=30), st.booleans(), st.integers(0, 2**31 - 1))
def test_xyz_roundtrip_property(n, with_normals, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3)) * 10
    cloud = OrientedPointCloud(pts, rng.normal(size=(n, 3)) if with_normals else None)
    import io, os, tempfile

    fd, path = tempfile.mkstemp(suffix=".xyz")
    os.close(fd)
    try:
        write_cloud_xyz(cloud, path)
        back = load_cloud(path)
        assert back.has_normals == with_normals
        assert np.abs(back.points - pts).max() <= 1e-12
    finally:
        os.unlink(path)
