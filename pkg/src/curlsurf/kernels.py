"""Radial kernels, their matrix-valued curl-free forms, and gradient polynomial bases.

A scalar radial kernel phi(r) induces the matrix-valued kernel

    Phi(x, y) = -grad grad^T phi(||x - y||)

whose columns are gradients, so any expansion in Phi is automatically a
gradient (curl-free) field.  Everything here is expressed through the radial
decomposition

    Phi(x, y) = zeta(r) * d d^T + eta(r) * I,      d = x - y,  r = ||d||,

with eta(r) = -phi'(r)/r and zeta(r) = -(phi''(r) - phi'(r)/r)/r^2, which
gives a single code path for all kernel families.  The r -> 0 limits are
handled per family; for the polyharmonic families zeta is set to 0 at r = 0
(the d d^T factor vanishes faster than zeta diverges).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

PHS_ODD = "phs_odd"
PHS_EVEN = "phs_even"
GAUSSIAN = "gaussian"
IMQ = "imq"
MQ = "mq"

_FAMILIES = (PHS_ODD, PHS_EVEN, GAUSSIAN, IMQ, MQ)
_PARAMETRIC = (GAUSSIAN, IMQ, MQ)


@dataclass(frozen=True)
class RadialKernel:
    """A scalar radial kernel.

    family: one of phs_odd (r^(2k+1)), phs_even (r^(2k) log r), gaussian,
        imq, mq.  The polyharmonic families carry the alternating sign
        (-1)^(k+1) so that the induced interpolation problems are definite
        on the polynomial-constraint subspace.
    order: polyharmonic order k (ignored by the parametric families).
    shape: shape parameter epsilon > 0 (parametric families only).
    """

    family: str
    order: int = 1
    shape: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == PHS_ODD and self.order < 0:
            raise ValueError("phs_odd requires order >= 0")
        if self.family == PHS_EVEN and self.order < 1:
            raise ValueError("phs_even requires order >= 1")
        if self.family in _PARAMETRIC and not self.shape > 0:
            raise ValueError("shape parameter must be positive")

    @property
    def is_c2(self):
        """Twice continuous differentiability, required for curl-free use."""
        if self.family == PHS_ODD:
            return self.order >= 1
        if self.family == PHS_EVEN:
            return self.order >= 2
        return True

    @property
    def sign(self):
        return float((-1) ** (self.order + 1))


def scalar_eval(kernel: RadialKernel, r):
    """Evaluate phi(r) for r >= 0 (scalar or array)."""
    r = np.asarray(r, dtype=float)
    k, eps, s = kernel.order, kernel.shape, kernel.sign
    if kernel.family == PHS_ODD:
        return s * r ** (2 * k + 1)
    if kernel.family == PHS_EVEN:
        rs = np.where(r > 0, r, 1.0)
        return s * np.where(r > 0, rs ** (2 * k) * np.log(rs), 0.0)
    if kernel.family == GAUSSIAN:
        return np.exp(-((eps * r) ** 2))
    if kernel.family == IMQ:
        return (1.0 + (eps * r) ** 2) ** -0.5
    return -((1.0 + (eps * r) ** 2) ** 0.5)


def _require_c2(kernel):
    if not kernel.is_c2:
        raise ValueError(
            f"{kernel.family} with order {kernel.order} is not twice "
            "continuously differentiable; cannot build a curl-free kernel"
        )


def eta(kernel: RadialKernel, r):
    """-phi'(r)/r with the analytic r -> 0 limit."""
    _require_c2(kernel)
    r = np.asarray(r, dtype=float)
    k, eps, s = kernel.order, kernel.shape, kernel.sign
    if kernel.family == PHS_ODD:
        return -s * (2 * k + 1) * r ** (2 * k - 1)
    if kernel.family == PHS_EVEN:
        rs = np.where(r > 0, r, 1.0)
        val = -s * rs ** (2 * k - 2) * (2 * k * np.log(rs) + 1.0)
        return np.where(r > 0, val, 0.0)
    if kernel.family == GAUSSIAN:
        return 2 * eps**2 * np.exp(-((eps * r) ** 2))
    q = 1.0 + (eps * r) ** 2
    if kernel.family == IMQ:
        return eps**2 * q**-1.5
    return eps**2 * q**-0.5


def zeta(kernel: RadialKernel, r):
    """-(phi''(r) - phi'(r)/r)/r^2; 0 at r = 0 for the polyharmonic families."""
    _require_c2(kernel)
    r = np.asarray(r, dtype=float)
    k, eps, s = kernel.order, kernel.shape, kernel.sign
    if kernel.family == PHS_ODD:
        if k == 1:
            rs = np.where(r > 0, r, 1.0)
            return np.where(r > 0, -s * 3.0 / rs, 0.0)
        return -s * (2 * k + 1) * (2 * k - 1) * r ** (2 * k - 3)
    if kernel.family == PHS_EVEN:
        rs = np.where(r > 0, r, 1.0)
        val = -s * rs ** (2 * k - 4) * (4 * k * (k - 1) * np.log(rs) + 4 * k - 2.0)
        return np.where(r > 0, val, 0.0)
    if kernel.family == GAUSSIAN:
        return -4 * eps**4 * np.exp(-((eps * r) ** 2))
    q = 1.0 + (eps * r) ** 2
    if kernel.family == IMQ:
        return -3 * eps**4 * q**-2.5
    return -(eps**4) * q**-1.5


def curlfree_matrix(kernel: RadialKernel, x, y):
    """The d-by-d matrix Phi(x, y) = -grad grad^T phi(||x - y||).

    Symmetric, and invariant under swapping x and y (same floating point
    expression: the difference vector enters only through r and d d^T).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite coordinates")
    d = x - y
    r = np.linalg.norm(d)
    return zeta(kernel, r) * np.outer(d, d) + eta(kernel, r) * np.eye(len(d))


def potential_row(kernel: RadialKernel, x, y):
    """-grad_x phi(||x - y||) = eta(r) * (x - y); zero vector at x = y.

    Dotting this row with an expansion coefficient gives that term's
    contribution to the scalar potential of the curl-free field.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.linalg.norm(d)
    return eta(kernel, r) * d


@dataclass(frozen=True)
class PolyBasis:
    """Monomials of total degree 1..order in d variables, with gradients.

    The gradients of these scalar monomials form a basis for the curl-free
    vector polynomials of degree order-1 used to augment the kernel
    expansions.  Monomials are in graded order (total degree ascending);
    within a degree the variable index tuples from
    itertools.combinations_with_replacement, i.e. x^2, xy, xz, y^2, yz, z^2
    for degree 2 in 3D.  The count is L = C(order+d, d) - 1 (the constant
    is excluded: its gradient vanishes).
    """

    order: int
    dim: int
    exponents: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("polynomial order must be >= 1")
        if self.dim not in (2, 3):
            raise ValueError("only 2D and 3D bases are supported")
        exps = []
        for deg in range(1, self.order + 1):
            for combo in itertools.combinations_with_replacement(range(self.dim), deg):
                e = [0] * self.dim
                for i in combo:
                    e[i] += 1
                exps.append(e)
        object.__setattr__(self, "exponents", np.array(exps, dtype=int))

    @property
    def size(self):
        return self.exponents.shape[0]

    def eval_scalar(self, pts):
        """Monomial values at pts (m, d) -> (m, L)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((pts.shape[0], self.size))
        for j, e in enumerate(self.exponents):
            out[:, j] = np.prod(pts**e, axis=1)
        return out

    def eval_gradient(self, pts):
        """Monomial gradients at pts (m, d) -> (m, d, L)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        m, d = pts.shape
        out = np.zeros((m, d, self.size))
        for j, e in enumerate(self.exponents):
            for a in range(d):
                if e[a] == 0:
                    continue
                de = e.copy()
                de[a] -= 1
                out[:, a, j] = e[a] * np.prod(pts**de, axis=1)
        return out


def poly_basis(order: int, dim: int) -> PolyBasis:
    basis = PolyBasis(order=order, dim=dim)
    assert basis.size == comb(order + dim, dim) - 1
    return basis
