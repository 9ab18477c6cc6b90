"""Command-line front end: reconstruct, synth, and eval subcommands.

Options can come from a config file of "key = value" lines (--config);
command-line flags win over file values.  Every run writes a JSON summary
next to the output artifact with the deterministic facts of the run (patch
statistics, selected parameters, mesh metrics); timings go to stdout only,
so identical configurations produce byte-identical summaries and meshes.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import cloud as cloud_io
from . import synthetic
from .cloud import CloudParseError
from .isosurface import component_count, euler_characteristic, marching_cubes, marching_squares
from .partition import max_overlap
from .reconstruct import PatchFitError, ReconConfig, eval_grid, fit
from .synthetic import CoverageError

EXIT_PARSE = 2
EXIT_MISSING_NORMALS = 3
EXIT_DEGENERATE_PATCH = 4
EXIT_UNCOVERED = 5
EXIT_WRITE = 6

_SHAPES = ("cassini", "trefoil", "sphere")


def _parse_mode(text):
    """'none' | 'gcv' | float-literal -> None | 'gcv' | float."""
    if text is None or text == "none":
        return None
    if text == "gcv":
        return "gcv"
    return float(text)


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _merge(args, file_values, key, default=None, cast=str):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_values:
        return cast(file_values[key])
    return default


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="curlsurf",
        description="Implicit surface reconstruction from oriented point clouds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="point cloud -> zero-level mesh")
    eva = sub.add_parser("eval", help="synthetic accuracy study, appends a CSV row")
    syn = sub.add_parser("synth", help="generate a synthetic oriented cloud (xyz)")

    for p in (rec, eva):
        p.add_argument("--config", help="key = value config file; flags override it")
        p.add_argument("--order", type=int, default=None, help="spline order (default 1)")
        p.add_argument("--patches", type=int, default=None, help="number of patches")
        p.add_argument("--delta", type=float, default=None, help="patch overlap (default 1)")
        p.add_argument("--shift", choices=("mean", "exact", "regularized"), default=None)
        p.add_argument("--lambda", dest="smoothing", default=None,
                       help="normal-fit smoothing: none, gcv, or a value")
        p.add_argument("--alpha", dest="residual_smoothing", default=None,
                       help="residual smoothing: none, gcv, or a value")
        p.add_argument("--grid-res", type=int, default=None, help="grid cells per axis")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
        p.add_argument("--threads", type=int, default=None)

    rec.add_argument("--input", default=None, help="point cloud file")
    rec.add_argument("--format", default=None, choices=("xyz", "ply", "obj"))
    rec.add_argument("--output", default=None, help="output mesh (.obj or .ply)")
    rec.add_argument("--estimate-normals", dest="estimate_normals", type=int,
                     default=None, metavar="K",
                     help="estimate normals from K neighbors when absent")
    rec.add_argument("--summary", default=None, help="summary JSON path")
    rec.add_argument("--patch-report", dest="patch_report", default=None,
                     help="write per-patch center/radius/size/parameters CSV "
                          "(for picking patches to regularize locally)")

    eva.add_argument("--shape", choices=_SHAPES, default=None)
    eva.add_argument("--n", type=int, default=None, help="sample count")
    eva.add_argument("--noise", type=float, default=None, help="normal noise sigma")
    eva.add_argument("--dense", type=int, default=None,
                     help="dense evaluation sample count (default 131424)")
    eva.add_argument("--csv", default=None, help="append results to this CSV")

    syn.add_argument("shape", choices=_SHAPES)
    syn.add_argument("n", type=int)
    syn.add_argument("out", help="output xyz path")
    syn.add_argument("--noise", type=float, default=0.0, help="normal noise sigma")
    syn.add_argument("--seed", type=int, default=0)
    return parser


def _recon_config(args, fv, n_points):
    patches = _merge(args, fv, "patches", None, int)
    if patches is None:
        patches = max(1, round(n_points / 50))
    return ReconConfig(
        m_target=patches,
        order=_merge(args, fv, "order", 1, int),
        delta=_merge(args, fv, "delta", 1.0, float),
        shift_mode=_merge(args, fv, "shift", "mean"),
        smoothing=_parse_mode(_merge(args, fv, "smoothing")),
        residual_smoothing=_parse_mode(_merge(args, fv, "residual_smoothing")),
        threads=_merge(args, fv, "threads", None, int),
    )


def _patch_summary(model):
    sizes = np.array([len(m) for m in model.cover.members])
    out = {
        "patches": int(model.n_patches),
        "patch_points_min": int(sizes.min()),
        "patch_points_median": float(np.median(sizes)),
        "patch_points_max": int(sizes.max()),
        "max_overlap": max_overlap(model.cover, model.points),
    }
    if model.config.smoothing == "gcv":
        out["lambda_per_patch"] = [float(v) for v in model.lambdas]
    if model.config.residual_smoothing == "gcv":
        out["alpha_per_patch"] = [float(v) for v in model.alphas]
    return out


def _make_cloud(shape, n, noise, seed):
    if shape == "cassini":
        cl, surface = synthetic.cassini(n)
    elif shape == "trefoil":
        cl, surface = synthetic.trefoil_pipe(n)
    else:
        cl, surface = synthetic.sphere(n)
    if noise and noise > 0:
        cl = cloud_io.perturb_normals(cl, noise, seed)
    return cl, surface


def _cmd_synth(args):
    cl, _ = _make_cloud(args.shape, args.n, args.noise, args.seed)
    cloud_io.write_cloud_xyz(cl, args.out)
    print(f"wrote {cl.n} points ({cl.dim}D) to {args.out}")
    return 0


def _write_patch_report(model, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = model.cover.dim
        writer.writerow(
            ["patch"] + [f"center_{c}" for c in "xyz"[:dim]]
            + ["radius", "points", "lambda", "alpha"]
        )
        for m in range(model.n_patches):
            writer.writerow(
                [m] + [f"{c:.9g}" for c in model.cover.centers[m]]
                + [f"{model.cover.radii[m]:.9g}", len(model.cover.members[m]),
                   f"{model.lambdas[m]:.6g}", f"{model.alphas[m]:.6g}"]
            )


def _cmd_reconstruct(args):
    fv = _read_config_file(args.config) if args.config else {}
    input_path = _merge(args, fv, "input")
    output_path = _merge(args, fv, "output")
    if not input_path or not output_path:
        print("error: --input and --output are required", file=sys.stderr)
        return EXIT_PARSE

    t0 = time.perf_counter()
    try:
        cl = cloud_io.load_cloud(input_path, _merge(args, fv, "format"))
    except (CloudParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if not cl.has_normals:
        k = _merge(args, fv, "estimate_normals", None, int)
        if k is None:
            print("error: input has no normals (use --estimate-normals K)", file=sys.stderr)
            return EXIT_MISSING_NORMALS
        cl = cloud_io.estimate_normals(cl, k)
    t_load = time.perf_counter() - t0

    config = _recon_config(args, fv, cl.n)
    t0 = time.perf_counter()
    try:
        model = fit(cl, config)
    except PatchFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE_PATCH
    t_fit = time.perf_counter() - t0

    res = _merge(args, fv, "grid_res", 128, int)
    if not 8 <= res <= 1024:
        print("error: --grid-res must be in [8, 1024]", file=sys.stderr)
        return EXIT_PARSE
    t0 = time.perf_counter()
    grid = eval_grid(model, resolution=res)
    t_grid = time.perf_counter() - t0

    t0 = time.perf_counter()
    summary = {"input": str(input_path), "n_points": int(cl.n), "dim": int(cl.dim),
               "order": config.order, "shift": config.shift_mode, "grid_res": res}
    summary.update(_patch_summary(model))
    try:
        if cl.dim == 3:
            mesh = marching_cubes(grid)
            cloud_io.write_mesh(mesh, output_path)
            summary["mesh_vertices"] = int(len(mesh.vertices))
            summary["mesh_triangles"] = int(len(mesh.triangles))
            summary["mesh_components"] = component_count(mesh)
            summary["mesh_euler_characteristic"] = euler_characteristic(mesh)
        else:
            polys = marching_squares(grid)
            cloud_io.write_polylines_obj(polys, output_path)
            summary["polylines"] = len(polys)
            summary["polyline_vertices"] = int(sum(len(p) for p in polys))
    except OSError as exc:
        print(f"error: cannot write {output_path}: {exc}", file=sys.stderr)
        return EXIT_WRITE
    t_extract = time.perf_counter() - t0

    report_path = _merge(args, fv, "patch_report")
    if report_path:
        try:
            _write_patch_report(model, report_path)
        except OSError as exc:
            print(f"error: cannot write {report_path}: {exc}", file=sys.stderr)
            return EXIT_WRITE

    summary_path = _merge(args, fv, "summary") or output_path + ".summary.json"
    try:
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write {summary_path}: {exc}", file=sys.stderr)
        return EXIT_WRITE

    for key, val in summary.items():
        if not isinstance(val, list):
            print(f"{key}: {val}")
    print(f"time: load {t_load:.2f}s  fit {t_fit:.2f}s  grid {t_grid:.2f}s  "
          f"extract+write {t_extract:.2f}s")
    print(f"wrote {output_path} and {summary_path}")
    return 0


def _cmd_eval(args):
    fv = _read_config_file(args.config) if args.config else {}
    shape = _merge(args, fv, "shape")
    n = _merge(args, fv, "n", None, int)
    if shape is None or n is None:
        print("error: --shape and --n are required", file=sys.stderr)
        return EXIT_PARSE
    noise = _merge(args, fv, "noise", 0.0, float)
    seed = _merge(args, fv, "seed", 0, int)
    dense = _merge(args, fv, "dense", 131424, int)

    cl, surface = _make_cloud(shape, n, noise, seed)
    config = _recon_config(args, fv, cl.n)
    try:
        model = fit(cl, config)
        report = synthetic.error_report(model, surface, dense)
    except PatchFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE_PATCH
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCOVERED

    row = {"N": cl.n, "order": config.order,
           "rms": f"{report.rms:.6e}", "max": f"{report.max_abs:.6e}"}
    print("{:>8} {:>6} {:>12} {:>12}".format("N", "order", "rms", "max"))
    print("{:>8} {:>6} {:>12} {:>12}".format(row["N"], row["order"], row["rms"], row["max"]))

    csv_path = _merge(args, fv, "csv")
    if csv_path:
        new = not os.path.exists(csv_path)
        with open(csv_path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["N", "order", "rms", "max"])
            if new:
                writer.writeheader()
            writer.writerow(row)
        print(f"appended to {csv_path}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "reconstruct":
        return _cmd_reconstruct(args)
    return _cmd_eval(args)


if __name__ == "__main__":
    sys.exit(main())
