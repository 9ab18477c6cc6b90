"""The full reconstruction pipeline: per-patch fits, shifts, and blending.

For each patch of the cover, a curl-free spline is fitted to the normals of
the member points and its scalar potential extracted.  Potentials are only
defined up to a constant, so each one is shifted before blending:

  mean          subtract the discrete mean over the patch points,
  exact         subtract a scalar spline interpolating the potential at the
                patch points (the blended potential then vanishes exactly
                at every cloud point),
  regularized   the same with a smoothing parameter alpha > 0.

The global potential is the Shepard-weighted sum of the shifted local
potentials, evaluable anywhere inside the cover; its zero-level set is the
reconstructed curve/surface (negative inside, positive outside, for
outward-oriented normals).

Patches are fitted independently (thread pool); all blending accumulates in
ascending patch order so results are bitwise reproducible regardless of the
thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .cloud import OrientedPointCloud
from .isosurface import ScalarGrid
from .kernels import RadialKernel, poly_basis
from .partition import PatchCover, build_cover, covering_patches, kappa
from .solver import (
    DEFAULT_GCV_GRID,
    CurlFreeFit,
    DegenerateGeometryError,
    ResidualSpline,
    assemble,
    eval_potential,
    eval_residual,
    fit_residual,
    gcv_select,
    gcv_select_residual,
    solve_smoothed,
)

SHIFT_MODES = ("mean", "exact", "regularized")


class PatchFitError(RuntimeError):
    """A patch could not be fitted even after reducing the polynomial order."""


def default_family(dim: int, order: int) -> str:
    """Even-kernel family for planar problems when it is smooth enough."""
    return "phs_even" if dim % 2 == 0 and order >= 2 else "phs_odd"


@dataclass(frozen=True)
class ReconConfig:
    """Knobs of the reconstruction pipeline.

    smoothing / residual_smoothing: None for plain interpolation, a float
    for a fixed parameter, or "gcv" for per-patch selection.  overrides
    maps a patch index to a (lam, alpha) pair taking precedence on that
    patch (either entry may be None to keep the global mode).
    """

    m_target: int
    order: int = 1
    delta: float = 1.0
    shift_mode: str = "mean"
    smoothing: float | str | None = None
    residual_smoothing: float | str | None = None
    kernel_family: str | None = None
    center_metric: str = "euclidean"
    overrides: dict = field(default_factory=dict)
    gcv_grid: np.ndarray = field(default=DEFAULT_GCV_GRID, repr=False)
    threads: int | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.shift_mode not in SHIFT_MODES:
            raise ValueError(f"shift_mode must be one of {SHIFT_MODES}")
        for name in ("smoothing", "residual_smoothing"):
            v = getattr(self, name)
            if v is not None and v != "gcv" and float(v) < 0:
                raise ValueError(f"{name} must be None, 'gcv', or a float >= 0")


@dataclass(frozen=True)
class BlendedPotential:
    """A fitted reconstruction: cover, per-patch fits, and their shifts."""

    cover: PatchCover
    fits: list  # CurlFreeFit per patch
    shifts: list  # float (mean mode) or ResidualSpline per patch
    config: ReconConfig
    points: np.ndarray  # the input cloud positions
    lambdas: np.ndarray  # smoothing parameter used on each patch
    alphas: np.ndarray  # residual parameter per patch (0 where unused)

    @property
    def n_patches(self):
        return self.cover.size


def _resolve(mode, override, select):
    if override is not None:
        return float(override)
    if mode is None:
        return 0.0
    if mode == "gcv":
        return select()
    return float(mode)


def _fit_patch(points, normals, config: ReconConfig, lam_override, alpha_override):
    dim = points.shape[1]
    last_err = None
    for order in range(config.order, 0, -1):
        family = config.kernel_family or default_family(dim, order)
        kernel = RadialKernel(family=family, order=order)
        try:
            A, P, u = assemble(points, normals, kernel, order)
            lam = _resolve(
                config.smoothing,
                lam_override,
                lambda: gcv_select(A, P, u, config.gcv_grid),
            )
            c, b, resid = solve_smoothed(A, P, u, lam)
        except DegenerateGeometryError as exc:
            last_err = exc
            continue
        fit = CurlFreeFit(
            centers=points,
            kernel=kernel,
            basis=poly_basis(order, dim),
            c=c.reshape(points.shape),
            b=b,
            lam=lam,
            kkt_residual=resid,
        )
        vals = eval_potential(fit, points)
        if config.shift_mode == "mean":
            return fit, float(np.mean(vals)), lam, 0.0
        alpha = 0.0
        if config.shift_mode == "regularized":
            alpha = _resolve(
                config.residual_smoothing,
                alpha_override,
                lambda: gcv_select_residual(points, vals, config.gcv_grid),
            )
        return fit, fit_residual(points, vals, alpha), lam, alpha
    raise last_err


def fit(cloud: OrientedPointCloud, config: ReconConfig) -> BlendedPotential:
    """Build the cover, fit every patch, and return the blended potential."""
    if not cloud.has_normals:
        raise ValueError("reconstruction needs normals; run estimate_normals first")
    pts = cloud.points
    basis_size = poly_basis(config.order, cloud.dim).size
    cover = build_cover(
        pts, config.m_target, config.delta, n_min=2 * basis_size,
        center_metric=config.center_metric,
    )

    def job(m):
        lam_o, alpha_o = config.overrides.get(m, (None, None))
        sel = cover.members[m]
        try:
            return _fit_patch(pts[sel], cloud.normals[sel], config, lam_o, alpha_o)
        except DegenerateGeometryError as exc:
            raise PatchFitError(f"patch {m}: {exc}") from exc

    workers = config.threads or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(cover.size)))
    else:
        results = [job(m) for m in range(cover.size)]

    fits = [r[0] for r in results]
    shifts = [r[1] for r in results]
    lambdas = np.array([r[2] for r in results])
    alphas = np.array([r[3] for r in results])
    return BlendedPotential(
        cover=cover,
        fits=fits,
        shifts=shifts,
        config=config,
        points=pts,
        lambdas=lambdas,
        alphas=alphas,
    )


def _shifted_potential(model: BlendedPotential, m: int, x):
    pot = eval_potential(model.fits[m], x)
    shift = model.shifts[m]
    if isinstance(shift, ResidualSpline):
        return pot - eval_residual(shift, x)
    return pot - shift


def evaluate(model: BlendedPotential, x):
    """Blended potential at x ((d,) or (m, d)).

    Returns (values, covered): entries outside the cover are NaN with
    covered False -- being uncovered is a value, not an error.  Patch
    contributions accumulate in ascending index order.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    num = np.zeros(X.shape[0])
    den = np.zeros(X.shape[0])
    tree = cKDTree(X)
    cover = model.cover
    for m in range(cover.size):
        sel = np.array(sorted(tree.query_ball_point(cover.centers[m], cover.radii[m])), dtype=int)
        if sel.size == 0:
            continue
        d = np.linalg.norm(X[sel] - cover.centers[m], axis=1)
        keep = d < cover.radii[m]
        sel, d = sel[keep], d[keep]
        if sel.size == 0:
            continue
        k = kappa(d / cover.radii[m])
        num[sel] += k * _shifted_potential(model, m, X[sel])
        den[sel] += k
    covered = den > 0
    vals = np.where(covered, num / np.where(covered, den, 1.0), np.nan)
    if single:
        return float(vals[0]), bool(covered[0])
    return vals, covered


def default_bbox(model: BlendedPotential):
    pad = model.cover.max_radius
    return model.points.min(axis=0) - pad, model.points.max(axis=0) + pad


def eval_grid(model: BlendedPotential, bbox=None, resolution: int = 128) -> ScalarGrid:
    """Sample the blended potential on a regular grid (resolution cells/axis).

    Each patch is evaluated only on the grid nodes inside its ball, and the
    per-patch pieces are merged in ascending patch order, so the result is
    deterministic and matches pointwise evaluation.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2 cells per axis")
    lo, hi = default_bbox(model) if bbox is None else map(np.asarray, bbox)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("degenerate bounding box")
    d = lo.size
    spacing = (hi - lo) / resolution
    dims = np.full(d, resolution + 1)
    axes = [lo[a] + spacing[a] * np.arange(dims[a]) for a in range(d)]
    strides = np.ones(d, dtype=int)
    for a in range(d - 1):
        strides[a] = int(np.prod(dims[a + 1 :]))

    cover = model.cover

    def patch_nodes(m):
        c, rho = cover.centers[m], cover.radii[m]
        ranges = []
        for a in range(d):
            i0 = max(0, int(np.ceil((c[a] - rho - lo[a]) / spacing[a])))
            i1 = min(int(dims[a]) - 1, int(np.floor((c[a] + rho - lo[a]) / spacing[a])))
            if i1 < i0:
                return None
            ranges.append(np.arange(i0, i1 + 1))
        mesh = np.meshgrid(*ranges, indexing="ij")
        idx = np.stack([g.reshape(-1) for g in mesh], axis=1)
        pos = lo + idx * spacing
        dist = np.linalg.norm(pos - c, axis=1)
        keep = dist < rho
        if not np.any(keep):
            return None
        idx, pos, dist = idx[keep], pos[keep], dist[keep]
        flat = idx @ strides
        k = kappa(dist / rho)
        return flat, k, k * _shifted_potential(model, m, pos)

    workers = model.config.threads or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pieces = list(pool.map(patch_nodes, range(cover.size)))
    else:
        pieces = [patch_nodes(m) for m in range(cover.size)]

    num = np.zeros(int(np.prod(dims)))
    den = np.zeros_like(num)
    for piece in pieces:  # ascending patch order
        if piece is None:
            continue
        flat, k, kp = piece
        np.add.at(num, flat, kp)
        np.add.at(den, flat, k)
    covered = den > 0
    vals = np.where(covered, num / np.where(covered, den, 1.0), np.nan)
    return ScalarGrid(
        origin=lo,
        spacing=spacing,
        values=vals.reshape(tuple(dims)),
        mask=covered.reshape(tuple(dims)),
    )


def with_overrides(config: ReconConfig, overrides: dict) -> ReconConfig:
    """Copy of config with per-patch (lam, alpha) overrides."""
    return replace(config, overrides=dict(overrides))
