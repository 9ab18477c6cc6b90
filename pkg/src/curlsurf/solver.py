"""Fitting curl-free spline interpolants to normal data and extracting potentials.

The vector fit on a set of points solves the saddle system

    [ A + dim*lam*I   P ] [c]   [u]
    [ P^T             0 ] [b] = [0]

where A holds the d-by-d curl-free kernel blocks, P the gradient polynomial
basis evaluated at the points, u the stacked normals, and dim = d*n.  The
constraint P^T c = 0 makes the problem well posed for the conditionally
definite polyharmonic kernels and bounds far-field growth.  lam >= 0 turns
interpolation into ridge-style smoothing.

The scalar potential of the fitted field comes for free from the kernel
structure, and a separate scalar spline (kernel phi(r) = r, constant +
linear augmentation) interpolates or smooths the potential's values at the
points so the final level set can pass exactly through them.

Smoothing parameters are selected by generalized cross validation computed
from its definition: project out the constraint with a QR factorization,
eigendecompose the reduced kernel matrix once, then every candidate
parameter costs O(dim) to score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import PolyBasis, RadialKernel, eta, poly_basis, zeta

DEFAULT_GCV_GRID = np.logspace(-12.0, 2.0, 50)

_RANK_RTOL = 1e-10


class DegenerateGeometryError(ValueError):
    """Points cannot support the requested fit (duplicates or rank-deficient P)."""


class GcvDegenerateDataWarning(UserWarning):
    """GCV saw data with no variation; the largest grid parameter is returned."""


def _pairwise(points):
    diff = points[:, None, :] - points[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return diff, r


def _check_distinct(r, n):
    if n > 1:
        off = r[~np.eye(n, dtype=bool)]
        if np.min(off) == 0.0:
            raise DegenerateGeometryError("duplicate points in patch")


def _check_full_rank(P, what):
    if P.shape[0] < P.shape[1]:
        raise DegenerateGeometryError(f"{what}: fewer rows than columns")
    R = scipy.linalg.qr(P, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > _RANK_RTOL * diag[0])) if diag[0] > 0 else 0
    if rank < P.shape[1]:
        raise DegenerateGeometryError(
            f"{what}: rank {rank} < {P.shape[1]} (points not unisolvent)"
        )


def assemble(points, normals, kernel: RadialKernel, order: int | None = None):
    """Build the kernel block matrix A, polynomial matrix P, and data vector u.

    Rows and columns are point-major: point j occupies the d consecutive
    indices d*j .. d*j+d-1.  A is symmetric by construction.
    """
    points = np.asarray(points, dtype=float)
    normals = np.asarray(normals, dtype=float)
    n, d = points.shape
    if normals.shape != points.shape:
        raise ValueError("points and normals must have matching shapes")
    order = kernel.order if order is None else order

    diff, r = _pairwise(points)
    _check_distinct(r, n)
    et = eta(kernel, r)
    zt = zeta(kernel, r)
    # outer product first: d_a * d_b commutes exactly, so A is symmetric
    # to the last bit
    outer = diff[:, :, :, None] * diff[:, :, None, :]
    blocks = zt[:, :, None, None] * outer
    blocks += et[:, :, None, None] * np.eye(d)
    A = blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)

    basis = poly_basis(order, d)
    P = basis.eval_gradient(points).reshape(n * d, basis.size)
    u = normals.reshape(-1)
    return A, P, u


def _solve_saddle(G, P, rhs_top, shift):
    """Solve [[G + shift*I, P], [P^T, 0]] [x; y] = [rhs_top; 0] by dense LU."""
    dim, L = P.shape
    K = np.zeros((dim + L, dim + L))
    K[:dim, :dim] = G
    if shift != 0.0:
        K[:dim, :dim] += shift * np.eye(dim)
    K[:dim, dim:] = P
    K[dim:, :dim] = P.T
    rhs = np.concatenate([rhs_top, np.zeros(L)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError(f"singular saddle system: {exc}") from exc
    scale = np.linalg.norm(rhs)
    resid = np.linalg.norm(K @ sol - rhs) / scale if scale > 0 else 0.0
    return sol[:dim], sol[dim:], resid


def solve_smoothed(A, P, u, lam):
    """Coefficients of the smoothed vector fit; the ridge shift is dim*lam.

    Returns (c, b, relative_residual) with c flat in point-major order.
    lam = 0 reproduces plain interpolation exactly (same system).
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    _check_full_rank(P, "polynomial matrix")
    return _solve_saddle(A, P, u, A.shape[0] * lam)


def solve_interp(A, P, u):
    """Interpolation coefficients (c, b, relative_residual)."""
    return solve_smoothed(A, P, u, 0.0)


@dataclass(frozen=True)
class CurlFreeFit:
    """A fitted curl-free expansion: vector coefficients + gradient polynomial."""

    centers: np.ndarray  # (n, d)
    kernel: RadialKernel
    basis: PolyBasis
    c: np.ndarray  # (n, d)
    b: np.ndarray  # (L,)
    lam: float = 0.0
    kkt_residual: float = 0.0

    @property
    def dim(self):
        return self.centers.shape[1]


def fit_curlfree(points, normals, kernel, order=None, lam=0.0) -> CurlFreeFit:
    """Assemble and solve in one step."""
    points = np.asarray(points, dtype=float)
    order = kernel.order if order is None else order
    A, P, u = assemble(points, normals, kernel, order)
    c, b, resid = solve_smoothed(A, P, u, lam)
    n, d = points.shape
    return CurlFreeFit(
        centers=points,
        kernel=kernel,
        basis=poly_basis(order, d),
        c=c.reshape(n, d),
        b=b,
        lam=lam,
        kkt_residual=resid,
    )


def _eval_parts(fit: CurlFreeFit, x):
    X = np.atleast_2d(np.asarray(x, dtype=float))
    diff = X[:, None, :] - fit.centers[None, :, :]
    r = np.sqrt(np.einsum("mnd,mnd->mn", diff, diff))
    dot = np.einsum("mnd,nd->mn", diff, fit.c)
    return X, diff, r, dot


def eval_potential(fit: CurlFreeFit, x):
    """Scalar potential of the fitted field at x ((d,) or (m, d))."""
    x = np.asarray(x, dtype=float)
    X, _, r, dot = _eval_parts(fit, x)
    pot = np.sum(eta(fit.kernel, r) * dot, axis=1)
    pot += fit.basis.eval_scalar(X) @ fit.b
    return float(pot[0]) if x.ndim == 1 else pot


def eval_field(fit: CurlFreeFit, x):
    """The fitted vector field (the gradient of eval_potential) at x."""
    x = np.asarray(x, dtype=float)
    X, diff, r, dot = _eval_parts(fit, x)
    fld = np.einsum("mn,mnd->md", zeta(fit.kernel, r) * dot, diff)
    fld += eta(fit.kernel, r) @ fit.c
    fld += np.einsum("mdk,k->md", fit.basis.eval_gradient(X), fit.b)
    return fld[0] if x.ndim == 1 else fld


# --- scalar residual spline (kernel phi(r) = r, constant + linear terms) ---


def _scalar_poly(points):
    n = points.shape[0]
    return np.hstack([np.ones((n, 1)), points])


@dataclass(frozen=True)
class ResidualSpline:
    """Scalar spline sigma(x) = sum_j c_j ||x - x_j|| + b0 + b[1:] . x."""

    centers: np.ndarray  # (n, d)
    c: np.ndarray  # (n,)
    b: np.ndarray  # (1 + d,)
    alpha: float = 0.0
    reduced_degree: bool = False  # linear terms dropped (degenerate geometry)


def fit_residual(points, values, alpha=0.0) -> ResidualSpline:
    """Fit the scalar spline to values at points; alpha >= 0 smooths.

    phi(r) = r is conditionally negative definite, so the ridge shift
    n*alpha is applied to the negated kernel matrix and the sign folded
    back into the coefficients; this keeps the smoothed system nonsingular
    for every alpha >= 0 while evaluation stays in the phi(r) = r
    convention.  If the points are affinely degenerate (no unique linear
    fit) the augmentation drops to the constant alone.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    n, d = points.shape
    _, r = _pairwise(points)
    _check_distinct(r, n)

    P = _scalar_poly(points)
    reduced = False
    try:
        _check_full_rank(P, "scalar polynomial matrix")
    except DegenerateGeometryError:
        P = P[:, :1]
        reduced = True

    gamma, beta, _ = _solve_saddle(-r, P, values, n * alpha)
    b = np.zeros(1 + d)
    b[: P.shape[1]] = beta
    return ResidualSpline(
        centers=points, c=-gamma, b=b, alpha=alpha, reduced_degree=reduced
    )


def eval_residual(spline: ResidualSpline, x):
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    diff = X[:, None, :] - spline.centers[None, :, :]
    r = np.sqrt(np.einsum("mnd,mnd->mn", diff, diff))
    vals = r @ spline.c + spline.b[0] + X @ spline.b[1:]
    return float(vals[0]) if x.ndim == 1 else vals


# --- generalized cross validation ---


@dataclass
class _GcvWorkspace:
    eigvals: np.ndarray  # of the constraint-reduced kernel matrix
    data: np.ndarray  # projected data in the eigenbasis
    dim: int
    data_scale: float


def _gcv_workspace(G, P, y) -> _GcvWorkspace:
    dim, L = P.shape
    Q = np.linalg.qr(P, mode="complete")[0]
    Q2 = Q[:, L:]
    B = Q2.T @ G @ Q2
    B = 0.5 * (B + B.T)
    w, V = np.linalg.eigh(B)
    ub = V.T @ (Q2.T @ y)
    return _GcvWorkspace(eigvals=w, data=ub, dim=dim, data_scale=float(y @ y))


def _gcv_score(ws: _GcvWorkspace, t):
    """dim * ||(I - H) y||^2 / trace(I - H)^2 for ridge shift t."""
    f = t / (ws.eigvals + t)
    return ws.dim * np.sum((f * ws.data) ** 2) / np.sum(f) ** 2


def _golden_min(f, a, b, iters=48):
    invphi = 0.5 * (np.sqrt(5.0) - 1.0)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _gcv_minimize(ws: _GcvWorkspace, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty GCV grid")
    if np.sum(ws.data**2) <= 1e-28 * max(1.0, ws.data_scale):
        warnings.warn(
            "GCV data has no variation off the polynomial space; "
            "returning the largest grid parameter",
            GcvDegenerateDataWarning,
        )
        return float(np.max(grid))
    order = np.argsort(grid)
    grid = grid[order]
    scores = np.array([_gcv_score(ws, ws.dim * g) for g in grid])
    i = int(np.argmin(scores))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    best = grid[i]
    if hi > lo:
        refined = 10.0 ** _golden_min(
            lambda t: _gcv_score(ws, ws.dim * 10.0**t), np.log10(lo), np.log10(hi)
        )
        if _gcv_score(ws, ws.dim * refined) < scores[i]:
            best = refined
    return float(best)


def gcv_value(A, P, u, lam):
    """GCV score of the vector smoother at lam (shift dim*lam)."""
    return float(_gcv_score(_gcv_workspace(A, P, u), A.shape[0] * lam))


def gcv_select(A, P, u, grid=DEFAULT_GCV_GRID):
    """Pick lam minimizing GCV over the grid, refined by golden section."""
    _check_full_rank(P, "polynomial matrix")
    return _gcv_minimize(_gcv_workspace(A, P, u), grid)


def _residual_workspace(points, values):
    points = np.asarray(points, dtype=float)
    _, r = _pairwise(points)
    _check_distinct(r, points.shape[0])
    P = _scalar_poly(points)
    try:
        _check_full_rank(P, "scalar polynomial matrix")
    except DegenerateGeometryError:
        P = P[:, :1]
    return _gcv_workspace(-r, P, np.asarray(values, dtype=float))


def gcv_value_residual(points, values, alpha):
    """GCV score of the scalar residual smoother at alpha (shift n*alpha)."""
    ws = _residual_workspace(points, values)
    return float(_gcv_score(ws, ws.dim * alpha))


def gcv_select_residual(points, values, grid=DEFAULT_GCV_GRID):
    """Pick alpha for the residual spline by the same GCV machinery."""
    return _gcv_minimize(_residual_workspace(points, values), grid)
