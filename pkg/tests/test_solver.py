import numpy as np
import pytest

from curlsurf.kernels import RadialKernel, poly_basis
from curlsurf.solver import (
    CurlFreeFit,
    DegenerateGeometryError,
    GcvDegenerateDataWarning,
    assemble,
    eval_field,
    eval_potential,
    eval_residual,
    fit_curlfree,
    fit_residual,
    gcv_select,
    gcv_select_residual,
    gcv_value,
    gcv_value_residual,
    solve_interp,
    solve_smoothed,
)
from curlsurf.synthetic import cassini

PHS1 = RadialKernel("phs_odd", 1)
PHS2 = RadialKernel("phs_odd", 2)


def random_patch(n, d, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    nrm = rng.normal(size=(n, d))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    if noise:
        nrm = nrm + rng.normal(0.0, noise, size=nrm.shape)
    return pts, nrm


def misfit(A, P, u, lam):
    c, b, _ = solve_smoothed(A, P, u, lam)
    fitted = A @ c + P @ b
    return float(np.sum((fitted - u) ** 2))


def brute_force_gcv(A, P, u, lam):
    """Hat matrix column by column from unit-data smoothed solves."""
    dn = A.shape[0]
    H = np.empty((dn, dn))
    for i in range(dn):
        e = np.zeros(dn)
        e[i] = 1.0
        c, b, _ = solve_smoothed(A, P, e, lam)
        H[:, i] = A @ c + P @ b
    r = (np.eye(dn) - H) @ u
    return dn * float(r @ r) / np.trace(np.eye(dn) - H) ** 2


def test_assemble_shapes_and_symmetry():
    pts, nrm = random_patch(10, 3, seed=1)
    A, P, u = assemble(pts, nrm, PHS2)
    assert A.shape == (30, 30)
    assert P.shape == (30, 9)
    assert u.shape == (30,)
    np.testing.assert_array_equal(A, A.T)


def test_assemble_single_point_zero_block():
    pts = np.zeros((1, 3))
    nrm = np.array([[0.0, 0.0, 1.0]])
    A, _, _ = assemble(pts, nrm, PHS1)
    np.testing.assert_array_equal(A, np.zeros((3, 3)))


def test_assemble_two_points_offdiag_block():
    from curlsurf.kernels import curlfree_matrix

    pts = np.array([[0.0, 0.0], [1.0, 0.5]])
    nrm = np.array([[1.0, 0.0], [0.0, 1.0]])
    A, _, _ = assemble(pts, nrm, RadialKernel("phs_even", 2))
    np.testing.assert_array_equal(
        A[:2, 2:], curlfree_matrix(RadialKernel("phs_even", 2), pts[0], pts[1])
    )


def test_assemble_rejects_duplicates():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    nrm = np.ones((3, 2))
    with pytest.raises(DegenerateGeometryError):
        assemble(pts, nrm, PHS1)


def test_polynomial_gradient_reproduction():
    # data from the gradient of a degree-2 polynomial: c = 0, exact field
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(12, 3))
    basis = poly_basis(2, 3)
    coef = rng.normal(size=basis.size)
    u = np.einsum("ndk,k->nd", basis.eval_gradient(pts), coef)
    f = fit_curlfree(pts, u, PHS2)
    scale = np.linalg.norm(f.b)
    assert np.linalg.norm(f.c) <= 1e-8 * scale
    test_pts = rng.normal(size=(7, 3))
    want = np.einsum("ndk,k->nd", basis.eval_gradient(test_pts), coef)
    np.testing.assert_allclose(eval_field(f, test_pts), want, atol=1e-8 * scale)


def test_zero_data_zero_coefficients():
    pts, _ = random_patch(8, 2, seed=5)
    A, P, u = assemble(pts, np.zeros_like(pts), PHS1)
    c, b, _ = solve_interp(A, P, np.zeros_like(u))
    assert np.linalg.norm(c) == 0.0
    assert np.linalg.norm(b) == 0.0


def test_cassini_interpolation():
    cloud, _ = cassini(30)
    f = fit_curlfree(cloud.points, cloud.normals, RadialKernel("phs_even", 2))
    got = eval_field(f, cloud.points)
    assert np.abs(got - cloud.normals).max() < 1e-8
    assert f.kkt_residual <= 1e-10  # reported residual, well-conditioned patch


def test_smoothed_lambda_zero_equals_interp():
    pts, nrm = random_patch(9, 3, seed=6)
    A, P, u = assemble(pts, nrm, PHS1)
    c0, b0, _ = solve_interp(A, P, u)
    c1, b1, _ = solve_smoothed(A, P, u, 0.0)
    np.testing.assert_array_equal(c0, c1)
    np.testing.assert_array_equal(b0, b1)


def test_smoothed_large_lambda_kills_kernel_part():
    pts, nrm = random_patch(20, 3, seed=7, noise=0.2)
    A, P, u = assemble(pts, nrm, PHS1)
    c0, _, _ = solve_interp(A, P, u)
    c_inf, _, _ = solve_smoothed(A, P, u, 1e12)
    assert np.linalg.norm(c_inf) <= 1e-6 * np.linalg.norm(c0)


def test_misfit_monotone_in_lambda():
    pts, nrm = random_patch(50, 3, seed=8, noise=0.3)
    A, P, u = assemble(pts, nrm, PHS1)
    values = [misfit(A, P, u, lam) for lam in (1e-6, 1e-4, 1e-2)]
    assert values[0] <= values[1] <= values[2]


def test_moment_conditions_after_solve():
    for lam in (0.0, 1e-3):
        pts, nrm = random_patch(15, 3, seed=9, noise=0.1)
        A, P, u = assemble(pts, nrm, PHS2)
        c, b, _ = solve_smoothed(A, P, u, lam)
        assert np.abs(P.T @ c).max() <= 1e-8 * max(1.0, np.abs(c).max())


def test_rank_deficient_polynomial_block_raises():
    # coplanar points cannot determine the degree-2 gradient basis in 3D
    rng = np.random.default_rng(10)
    pts = rng.normal(size=(12, 3))
    pts[:, 2] = 0.0
    nrm = np.tile([0.0, 0.0, 1.0], (12, 1))
    with pytest.raises(DegenerateGeometryError):
        fit_curlfree(pts, nrm, PHS2)


def test_eval_potential_pure_polynomial():
    pts, _ = random_patch(5, 3, seed=11)
    basis = poly_basis(1, 3)
    f = CurlFreeFit(
        centers=pts,
        kernel=PHS1,
        basis=basis,
        c=np.zeros((5, 3)),
        b=np.array([1.0, 0.0, 0.0]),  # potential = x coordinate
    )
    assert eval_potential(f, np.array([2.0, 0.0, 0.0])) == pytest.approx(2.0)
    assert eval_potential(f, np.array([-1.5, 3.0, 9.0])) == pytest.approx(-1.5)


def _fd_gradient_of_potential(f, x, h=1e-6):
    g = np.zeros(len(x))
    for i in range(len(x)):
        p1, p2 = np.array(x), np.array(x)
        p1[i] += h
        p2[i] -= h
        g[i] = (eval_potential(f, p1) - eval_potential(f, p2)) / (2 * h)
    return g


def test_field_is_gradient_of_potential():
    rng = np.random.default_rng(12)
    for kern, d in ((PHS1, 3), (PHS2, 3), (RadialKernel("phs_even", 2), 2)):
        pts, nrm = random_patch(14, d, seed=13)
        f = fit_curlfree(pts, nrm, kern)
        for _ in range(20):
            x = rng.normal(size=d)
            want = _fd_gradient_of_potential(f, x)
            got = eval_field(f, x)
            assert np.abs(got - want).max() <= 1e-5 * max(1.0, np.abs(want).max())


def test_interpolation_at_centers():
    pts, nrm = random_patch(16, 3, seed=14)
    f = fit_curlfree(pts, nrm, PHS1)
    got = eval_field(f, pts)
    assert np.abs(got - nrm).max() <= 1e-6


def _fd_curl(f, x, h=1e-5):
    d = len(x)
    J = np.zeros((d, d))
    for i in range(d):
        p1, p2 = np.array(x), np.array(x)
        p1[i] += h
        p2[i] -= h
        J[:, i] = (eval_field(f, p1) - eval_field(f, p2)) / (2 * h)
    if d == 2:
        return abs(J[1, 0] - J[0, 1])
    return np.linalg.norm([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


@pytest.mark.parametrize("d", [2, 3])
def test_field_is_curl_free(d):
    rng = np.random.default_rng(15)
    kern = RadialKernel("phs_even", 2) if d == 2 else PHS1
    pts, nrm = random_patch(18, d, seed=16)
    f = fit_curlfree(pts, nrm, kern)
    xs = rng.normal(size=(20, d))
    scale = np.abs(eval_field(f, xs)).max()
    for x in xs:
        assert _fd_curl(f, x) <= 1e-4 * scale


# --- GCV, vector smoother ---


def test_gcv_noise_free_selects_tiny_lambda():
    rng = np.random.default_rng(17)
    pts = rng.normal(size=(10, 3))
    basis = poly_basis(1, 3)
    u = np.einsum("ndk,k->nd", basis.eval_gradient(pts), np.array([0.3, -0.7, 1.1]))
    A, P, uf = assemble(pts, u, PHS1)
    grid = np.logspace(-12, 2, 50)
    with pytest.warns(GcvDegenerateDataWarning):
        # a constant field is exactly polynomial: no variation off the
        # constraint space, so the largest grid value comes back flagged
        lam = gcv_select(A, P, uf, grid)
    assert lam == pytest.approx(grid.max())

    # smooth but non-polynomial data: small lambda without the warning
    pts, nrm = random_patch(10, 3, seed=18)
    u2 = np.stack([np.sin(pts[:, 0]), np.cos(pts[:, 1]), pts[:, 2] ** 2], axis=1) * 0.1
    u2 += nrm  # smooth-ish deterministic field
    A, P, uf = assemble(pts, u2, PHS1)
    lam = gcv_select(A, P, uf, grid)
    gvals = [gcv_value(A, P, uf, g) for g in grid]
    assert gcv_value(A, P, uf, lam) <= min(gvals) + 1e-15


def test_gcv_minimum_over_grid():
    pts, nrm = random_patch(12, 2, seed=19, noise=0.3)
    A, P, u = assemble(pts, nrm, PHS1)
    grid = np.logspace(-10, 1, 50)
    lam = gcv_select(A, P, u, grid)
    sel = gcv_value(A, P, u, lam)
    for g in grid:
        assert sel <= gcv_value(A, P, u, g) + 1e-15


def test_gcv_matches_brute_force_hat_matrix():
    pts, nrm = random_patch(6, 2, seed=20, noise=0.2)  # dn = 12
    A, P, u = assemble(pts, nrm, PHS1)
    for lam in (1e-6, 1e-3, 1e-1):
        fast = gcv_value(A, P, u, lam)
        brute = brute_force_gcv(A, P, u, lam)
        assert abs(fast - brute) <= 1e-8 * max(1.0, abs(brute))


# --- scalar residual spline ---


def test_residual_constant_reproduction():
    rng = np.random.default_rng(21)
    pts = rng.normal(size=(9, 3))
    sp = fit_residual(pts, np.full(9, 5.0), 0.0)
    assert np.abs(sp.c).max() <= 1e-10
    assert sp.b[0] == pytest.approx(5.0)
    x = rng.normal(size=(6, 3))
    np.testing.assert_allclose(eval_residual(sp, x), 5.0, atol=1e-9)


def test_residual_interpolates():
    rng = np.random.default_rng(22)
    pts = rng.normal(size=(15, 3))
    vals = np.sin(pts[:, 0]) + pts[:, 1] * pts[:, 2]
    sp = fit_residual(pts, vals, 0.0)
    got = eval_residual(sp, pts)
    assert np.abs(got - vals).max() <= 1e-8 * max(1.0, np.abs(vals).max())
    assert not sp.reduced_degree


def test_residual_smoothing_increases_misfit():
    rng = np.random.default_rng(23)
    pts = rng.normal(size=(25, 3))
    vals = pts[:, 0] ** 2 + rng.normal(0.0, 0.5, size=25)
    m = []
    for alpha in (1e-6, 1e-2):
        sp = fit_residual(pts, vals, alpha)
        m.append(np.sum((eval_residual(sp, pts) - vals) ** 2))
    assert m[1] > m[0]


def test_residual_moment_conditions():
    rng = np.random.default_rng(24)
    pts = rng.normal(size=(11, 2))
    vals = rng.normal(size=11)
    sp = fit_residual(pts, vals, 0.0)
    P = np.hstack([np.ones((11, 1)), pts])
    assert np.abs(P.T @ sp.c).max() <= 1e-8 * max(1.0, np.abs(sp.c).max())


def test_residual_collinear_points_reduce_degree():
    t = np.linspace(0.0, 1.0, 7)
    pts = np.stack([t, 2 * t], axis=1)  # a line in 2D
    vals = np.sin(3 * t)
    sp = fit_residual(pts, vals, 0.0)
    assert sp.reduced_degree
    assert sp.b[1] == 0.0 and sp.b[2] == 0.0
    got = eval_residual(sp, pts)
    assert np.abs(got - vals).max() <= 1e-8


def test_residual_duplicate_points_raise():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(DegenerateGeometryError):
        fit_residual(pts, np.zeros(3), 0.0)


def test_residual_gcv_brute_force_oracle():
    rng = np.random.default_rng(25)
    pts = rng.normal(size=(5, 2))
    vals = rng.normal(size=5)
    for alpha in (1e-5, 1e-2):
        fast = gcv_value_residual(pts, vals, alpha)
        n = 5
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            H[:, i] = eval_residual(fit_residual(pts, e, alpha), pts)
        r = (np.eye(n) - H) @ vals
        brute = n * float(r @ r) / np.trace(np.eye(n) - H) ** 2
        assert abs(fast - brute) <= 1e-8 * max(1.0, abs(brute))


def test_residual_gcv_definitional_minimum():
    rng = np.random.default_rng(26)
    pts = rng.normal(size=(20, 3))
    vals = pts[:, 0] + rng.normal(0.0, 0.3, size=20)
    grid = np.logspace(-10, 1, 40)
    alpha = gcv_select_residual(pts, vals, grid)
    sel = gcv_value_residual(pts, vals, alpha)
    for g in grid:
        assert sel <= gcv_value_residual(pts, vals, g) + 1e-15


def test_residual_gcv_smooth_data_small_alpha():
    rng = np.random.default_rng(27)
    pts = rng.normal(size=(20, 3))
    vals = np.sin(pts[:, 0]) + 0.5 * pts[:, 1]
    grid = np.logspace(-12, 2, 50)
    alpha = gcv_select_residual(pts, vals, grid)
    assert alpha <= grid.min() * 10.0
