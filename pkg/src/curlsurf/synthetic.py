"""Synthetic test geometries with exact normals, plus reconstruction error metrics.

Each generator returns an oriented point cloud sampled exactly on a known
surface together with an ImplicitSurface handle (implicit function, its
gradient, and a dense sampler) used as ground truth in error studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cloud import OrientedPointCloud


@dataclass(frozen=True)
class ImplicitSurface:
    """Ground truth: implicit f, its gradient, and an exact surface sampler."""

    f: Callable
    grad: Callable
    sample: Callable  # sample(n) -> (points, unit normals)
    dim: int


class CoverageError(RuntimeError):
    """Too many evaluation samples fell outside the reconstruction's cover."""


# --- Cassini oval (2D) ---


def _cassini_f(a, b):
    def f(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        q = x1**2 + x2**2
        return q**2 - 2 * a**2 * (x1**2 - x2**2) + a**4 - b**4

    return f


def _cassini_grad(a, b):
    def grad(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        q = x1**2 + x2**2
        return np.stack(
            [4 * x1 * q - 4 * a**2 * x1, 4 * x2 * q + 4 * a**2 * x2], axis=-1
        )

    return grad


def cassini(n: int, a: float = 1.0, b: float = 1.1):
    """Sample the single-loop Cassini oval; needs b > a (one closed curve).

    Points are equally spaced in the polar angle; the radius solves the
    quartic exactly, so |f| at the samples is at rounding level.
    """
    if not b > a > 0:
        raise ValueError("need b > a > 0 for a single closed oval")
    if n < 4:
        raise ValueError("need at least 4 samples")
    theta = 2 * np.pi * np.arange(n) / n
    c2t = np.cos(2 * theta)
    rho = np.sqrt(a**2 * c2t + np.sqrt(b**4 - a**4 * np.sin(2 * theta) ** 2))
    pts = rho[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    grad = _cassini_grad(a, b)
    g = grad(pts)
    normals = g / np.linalg.norm(g, axis=1, keepdims=True)

    def sample(m):
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        r = np.sqrt(a**2 * np.cos(2 * th) + np.sqrt(b**4 - a**4 * np.sin(2 * th) ** 2))
        p = r[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
        gg = grad(p)
        return p, gg / np.linalg.norm(gg, axis=1, keepdims=True)

    surface = ImplicitSurface(f=_cassini_f(a, b), grad=grad, sample=sample, dim=2)
    return OrientedPointCloud(pts, normals), surface


# --- pipe surface around a (2, 5) torus knot (3D) ---


def _knot_curve(t):
    t = np.asarray(t, dtype=float)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    c5, s5 = np.cos(5 * t), np.sin(5 * t)
    return np.stack([c2 * (c5 + 3.0), s2 * (c5 + 3.0), s5], axis=-1)


def _knot_velocity(t):
    t = np.asarray(t, dtype=float)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    c5, s5 = np.cos(5 * t), np.sin(5 * t)
    return np.stack(
        [
            -2 * s2 * (c5 + 3.0) - 5 * c2 * s5,
            2 * c2 * (c5 + 3.0) - 5 * s2 * s5,
            5 * c5,
        ],
        axis=-1,
    )


def _knot_acceleration(t):
    t = np.asarray(t, dtype=float)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    c5, s5 = np.cos(5 * t), np.sin(5 * t)
    return np.stack(
        [
            -4 * c2 * (c5 + 3.0) + 20 * s2 * s5 - 25 * c2 * c5,
            -4 * s2 * (c5 + 3.0) - 20 * c2 * s5 - 25 * s2 * c5,
            -25 * s5,
        ],
        axis=-1,
    )


def _knot_frame(t):
    """Unit tangent / normal / binormal of the knot curve."""
    v = _knot_velocity(t)
    a = _knot_acceleration(t)
    T = v / np.linalg.norm(v, axis=-1, keepdims=True)
    n_raw = a - np.einsum("...d,...d->...", a, T)[..., None] * T
    n_norm = np.linalg.norm(n_raw, axis=-1, keepdims=True)
    if np.any(n_norm < 1e-12):
        raise RuntimeError("vanishing curvature: pipe frame undefined")
    N = n_raw / n_norm
    B = np.cross(T, N)
    return T, N, B


_ARC_SAMPLES = 8192


def _knot_arclength_table():
    tg = np.linspace(0.0, 2 * np.pi, _ARC_SAMPLES + 1)
    speed = np.linalg.norm(_knot_velocity(tg), axis=-1)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(tg))])
    return tg, s


def _pipe_closest_param(x, t_coarse=None):
    """Parameter of the curve point nearest x (coarse scan + Newton)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if t_coarse is None:
        t_coarse = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    curve = _knot_curve(t_coarse)
    d2 = ((x[:, None, :] - curve[None, :, :]) ** 2).sum(-1)
    t = t_coarse[np.argmin(d2, axis=1)]
    for _ in range(30):
        g = _knot_curve(t)
        v = _knot_velocity(t)
        a = _knot_acceleration(t)
        diff = x - g
        grad = -np.einsum("nd,nd->n", diff, v)
        hess = np.einsum("nd,nd->n", v, v) - np.einsum("nd,nd->n", diff, a)
        step = np.where(hess > 0, grad / np.where(hess > 0, hess, 1.0), 0.0)
        t = t - step
        if np.max(np.abs(step)) < 1e-14:
            break
    return t


def trefoil_pipe(n: int, tube_radius: float = 0.7):
    """Point cloud on the pipe surface of the (2, 5) torus knot.

    Rings of points are placed at equal arc-length stations along the knot
    (so the curve-direction density follows the local speed) with a fixed
    number of points around each circular cross-section; alternate rings
    are staggered by half a step.  The actual sample count is the nearest
    lattice size n_rings * n_around to the request.  Normals are exact:
    the pipe normal at angle theta is cos(theta) N + sin(theta) B in the
    curve's frame.
    """
    if n < 16:
        raise ValueError("need at least 16 samples")
    if tube_radius <= 0:
        raise ValueError("tube radius must be positive")
    tg, s = _knot_arclength_table()
    length = s[-1]
    circumference = 2 * np.pi * tube_radius
    h = np.sqrt(length * circumference / n)
    n_around = max(3, int(round(circumference / h)))
    n_rings = max(4, int(round(n / n_around)))

    s_targets = (np.arange(n_rings) + 0.5) / n_rings * length
    t_rings = np.interp(s_targets, s, tg)
    T, N, B = _knot_frame(t_rings)
    gamma = _knot_curve(t_rings)

    theta = 2 * np.pi * np.arange(n_around) / n_around
    # golden-ratio rotation per ring: decorrelates consecutive rings so the
    # lattice has no resonant alignment at any n_around
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    stagger = 2 * np.pi / n_around * ((np.arange(n_rings) * golden) % 1.0)
    ang = theta[None, :] + stagger[:, None]  # (n_rings, n_around)
    dirs = np.cos(ang)[..., None] * N[:, None, :] + np.sin(ang)[..., None] * B[:, None, :]
    pts = (gamma[:, None, :] + tube_radius * dirs).reshape(-1, 3)
    normals = dirs.reshape(-1, 3)

    def f(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        t = _pipe_closest_param(x)
        d = np.linalg.norm(np.atleast_2d(x) - _knot_curve(t), axis=-1) - tube_radius
        return float(d[0]) if single else d

    def grad(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        t = _pipe_closest_param(X)
        diff = X - _knot_curve(t)
        g = diff / np.linalg.norm(diff, axis=-1, keepdims=True)
        return g[0] if single else g

    def sample(m):
        c, _ = trefoil_pipe(m, tube_radius)
        return c.points, c.normals

    surface = ImplicitSurface(f=f, grad=grad, sample=sample, dim=3)
    return OrientedPointCloud(pts, normals), surface


# --- sphere (3D) ---


def sphere(n: int, radius: float = 1.0):
    """Fibonacci-lattice samples of a sphere with exact radial normals."""
    if n < 4:
        raise ValueError("need at least 4 samples")
    if radius <= 0:
        raise ValueError("radius must be positive")
    i = np.arange(n)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2 * i + 1.0) / n
    r_xy = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    phi = 2 * np.pi * i / golden
    normals = np.stack([r_xy * np.cos(phi), r_xy * np.sin(phi), z], axis=1)
    pts = radius * normals

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) - radius

    def grad(x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def sample(m):
        c, _ = sphere(m, radius)
        return c.points, c.normals

    surface = ImplicitSurface(f=f, grad=grad, sample=sample, dim=3)
    return OrientedPointCloud(pts, normals), surface


@dataclass(frozen=True)
class ErrorReport:
    rms: float
    max_abs: float
    n_samples: int
    n_uncovered: int


def error_report(model, surface: ImplicitSurface, n_eval: int) -> ErrorReport:
    """RMS and max of the blended potential over dense exact-surface samples.

    The exact potential there is zero, so the evaluated values are the
    errors.  More than 1% uncovered samples means the cover is too small.
    """
    from .reconstruct import evaluate

    pts, _ = surface.sample(n_eval)
    vals, covered = evaluate(model, pts)
    n_unc = int(np.sum(~covered))
    if n_unc > 0.01 * len(pts):
        raise CoverageError(
            f"{n_unc} of {len(pts)} evaluation samples are outside the cover"
        )
    v = vals[covered]
    return ErrorReport(
        rms=float(np.sqrt(np.mean(v**2))),
        max_abs=float(np.max(np.abs(v))),
        n_samples=len(pts),
        n_uncovered=n_unc,
    )
