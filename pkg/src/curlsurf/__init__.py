"""Implicit curve/surface reconstruction from oriented point clouds.

Fits curl-free spline interpolants to the normals on overlapping patches,
extracts and shifts their scalar potentials, blends them with
partition-of-unity weights, and contours the zero-level set.
"""

from .cloud import (
    OrientedPointCloud,
    estimate_normals,
    load_cloud,
    perturb_normals,
    write_mesh,
)
from .isosurface import (
    ScalarGrid,
    SurfaceMesh,
    component_count,
    euler_characteristic,
    marching_cubes,
    marching_squares,
)
from .kernels import RadialKernel, curlfree_matrix, poly_basis, potential_row, scalar_eval
from .partition import PatchCover, build_cover, covering_patches, select_centers, weight
from .reconstruct import BlendedPotential, ReconConfig, eval_grid, evaluate, fit
from .solver import (
    CurlFreeFit,
    ResidualSpline,
    eval_field,
    eval_potential,
    fit_curlfree,
    fit_residual,
    gcv_select,
    gcv_select_residual,
)
from .synthetic import ErrorReport, cassini, error_report, sphere, trefoil_pipe

__version__ = "0.1.0"

__all__ = [
    "BlendedPotential",
    "CurlFreeFit",
    "ErrorReport",
    "OrientedPointCloud",
    "PatchCover",
    "RadialKernel",
    "ReconConfig",
    "ResidualSpline",
    "ScalarGrid",
    "SurfaceMesh",
    "build_cover",
    "cassini",
    "component_count",
    "covering_patches",
    "curlfree_matrix",
    "error_report",
    "estimate_normals",
    "euler_characteristic",
    "eval_field",
    "eval_grid",
    "eval_potential",
    "evaluate",
    "fit",
    "fit_curlfree",
    "fit_residual",
    "gcv_select",
    "gcv_select_residual",
    "load_cloud",
    "marching_cubes",
    "marching_squares",
    "perturb_normals",
    "poly_basis",
    "potential_row",
    "scalar_eval",
    "select_centers",
    "sphere",
    "trefoil_pipe",
    "weight",
    "write_mesh",
]
