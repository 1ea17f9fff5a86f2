"""Command-line entry point: data generation, reconstruction, verification,
operation counting, and benchmarking.

Every run is reproducible from its flag set; paths are relative to the
working directory.  Exit codes: 0 success, 1 verification failure, 2
usage or configuration errors.  The CONEBP_THREADS environment variable
sets the default worker count when --threads is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

USAGE_ERROR = 2
VERIFY_ERROR = 1

_DEFAULT_NB_SWEEP = "1,2,4,8,16,32"


def _fail(message: str, code: int = USAGE_ERROR) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _default_threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("CONEBP_THREADS")
    return int(env) if env else None


def _parse_variants(spec: str):
    from .backprojector import KernelVariant

    if spec.strip().lower() == "all":
        return list(KernelVariant)
    return [KernelVariant.parse(name) for name in spec.split(",") if name.strip()]


def cmd_gen_data(args) -> int:
    from . import bench
    from .geometry import load_geometry, save_geometry, save_matrices
    from .phantom import default_phantom, load_phantom, make_dataset, save_phantom
    from .tensors import save_projections, save_volume

    if args.problem is not None:
        geom = bench.geometry_for(bench.find_problem(args.problem))
    else:
        if not Path(args.geometry).exists():
            return _fail(f"geometry file not found: {args.geometry}")
        geom = load_geometry(args.geometry)

    if args.phantom is not None:
        if not Path(args.phantom).exists():
            return _fail(f"phantom file not found: {args.phantom}")
        phantom = load_phantom(args.phantom)
    else:
        phantom = default_phantom(geom.nx, geom.ny, geom.nz, geom.voxel_size)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth, proj, mats = make_dataset(geom, phantom)
    save_geometry(out / "geometry.json", geom)
    save_phantom(out / "phantom.json", phantom)
    save_matrices(out / "matrices.raw", mats)
    save_projections(out / "projections.raw", proj)
    save_volume(out / "volume.raw", truth)
    print(f"wrote geometry, phantom, matrices, projections, volume under {out}")
    return 0


def cmd_backproject(args) -> int:
    from .backprojector import BatchConfig, KernelVariant, backproject_baseline, backproject_optimized
    from .geometry import load_geometry, load_matrices
    from .tensors import Layout, Volume, load_projections, save_volume, transpose_projections, transpose_volume

    indir = Path(args.indir)
    for name in ("geometry.json", "projections.raw", "matrices.raw"):
        if not (indir / name).exists():
            return _fail(f"input file not found: {indir / name}")
    geom = load_geometry(indir / "geometry.json")
    proj = load_projections(indir / "projections.raw")
    mats = load_matrices(indir / "matrices.raw", geom.np)
    variant = KernelVariant.parse(args.variant)
    threads = _default_threads(args)

    try:
        if variant is KernelVariant.BASELINE:
            if args.nb != 1:
                return _fail("--nb applies to the optimized variants only; baseline takes nb=1")
            vol = Volume.zeros(geom.nx, geom.ny, geom.nz)
            backproject_baseline(proj, mats, vol, threads=threads)
        else:
            if proj.layout is Layout.NATURAL:
                proj = transpose_projections(proj)
            vol_t = Volume.zeros(geom.nx, geom.ny, geom.nz, Layout.TRANSPOSED)
            backproject_optimized(proj, mats, vol_t, variant, batch=BatchConfig(args.nb), threads=threads)
            vol = transpose_volume(vol_t)
    except ValueError as exc:
        return _fail(str(exc))
    save_volume(args.out, vol)
    print(f"wrote {args.out} ({geom.nx}x{geom.ny}x{geom.nz}, natural layout)")
    return 0


def cmd_verify(args) -> int:
    from .phantom import rmse
    from .tensors import load_volume

    for path in (args.a, args.b):
        if not Path(path).exists():
            return _fail(f"volume file not found: {path}")
    try:
        value = rmse(load_volume(args.a), load_volume(args.b))
    except ValueError as exc:
        return _fail(str(exc))
    status = "PASS" if value < args.tol else "FAIL"
    print(f"rmse {value:.6e} tol {args.tol:.6e} {status}")
    return 0 if value < args.tol else VERIFY_ERROR


def cmd_count_ops(args) -> int:
    from .backprojector import KernelVariant, count_ops

    variant = KernelVariant.parse(args.variant)
    try:
        counters = count_ops(variant, args.nx, args.ny, args.nz, args.np, nb=args.nb, nh=args.nh)
    except ValueError as exc:
        return _fail(str(exc))
    print(f"variant {variant.name.lower()} nx {args.nx} ny {args.ny} nz {args.nz} np {args.np} nb {args.nb}")
    print(f"dot_ops {counters.dot_ops}")
    print(f"vol_word_accesses {counters.vol_word_accesses}")
    print(f"proj_word_accesses {counters.proj_word_accesses}")
    print(f"interp_ops {counters.interp_ops}")
    print(f"subline_builds {counters.subline_builds}")
    return 0


def cmd_bench(args) -> int:
    from . import bench
    from .backprojector import KernelVariant

    try:
        if args.problem:
            problems = [bench.find_problem(label) for label in args.problem.split(",")]
        elif args.catalog == "desk":
            problems = list(bench.desk_catalog())
        else:
            return _fail("full-scale problems are listed for reference; bench runs the desk catalog")
        variants = _parse_variants(args.variants)
    except ValueError as exc:
        return _fail(str(exc))

    threads = _default_threads(args)
    nb_values = [int(v) for v in args.sweep_nb.split(",")] if args.sweep_nb else [args.nb]

    reports = []
    failures = 0
    for problem in problems:
        for variant in variants:
            for pos, nb in enumerate(nb_values):
                if variant is KernelVariant.BASELINE and pos > 0:
                    break  # the baseline has no batching; one row is enough
                if variant is not KernelVariant.BASELINE and problem.proj[2] % nb != 0:
                    return _fail(f"nb must divide np: nb={nb}, np={problem.proj[2]}")
                try:
                    report = bench.run_bench(problem, variant, nb=nb, threads=threads, repeats=args.repeats)
                except (MemoryError, ValueError) as exc:
                    return _fail(str(exc))
                reports.append(report)
                print(
                    f"{report.label} {report.variant} nb={report.nb} threads={report.threads} "
                    f"seconds={report.wall_seconds:.4f} gups={report.gups:.4f} "
                    f"transpose={report.transpose_seconds:.4f}"
                )
        if args.verify:
            for name, value in bench.verify_variants(problem, variants, nb=args.nb, threads=threads).items():
                status = "PASS" if value < args.tol else "FAIL"
                print(f"verify {problem.label} {name} rmse={value:.6e} {status}")
                if value >= args.tol:
                    failures += 1

    if args.out:
        bench.write_reports_csv(args.out, reports)
        print(f"wrote {args.out}")
    if args.json:
        bench.write_reports_json(args.json, reports)
        print(f"wrote {args.json}")
    return VERIFY_ERROR if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conebp",
        description="Cone-beam back-projection kernels: data generation, reconstruction, verification, counting, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic projections, matrices, and ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--geometry", help="geometry JSON file")
    src.add_argument("--problem", help="desk catalog label (e.g. D1) with the default geometry")
    p.add_argument("--phantom", help="phantom JSON file (default: built-in phantom)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("backproject", help="reconstruct a volume from a gen-data directory")
    p.add_argument("--in", dest="indir", required=True, help="gen-data output directory")
    p.add_argument("--variant", required=True, help="baseline, transpose, share, symmetry, subline, subline_prefetch")
    p.add_argument("--nb", type=int, default=1, help="projections per batch (optimized variants)")
    p.add_argument("--threads", type=int, default=None, help="kernel worker count")
    p.add_argument("--out", required=True, help="output volume .raw path (JSON sidecar written next to it)")
    p.set_defaults(func=cmd_backproject)

    p = sub.add_parser("verify", help="compare two volumes by RMSE")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("count-ops", help="closed-form operation counts for a problem size")
    p.add_argument("--variant", required=True)
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--nz", type=int, required=True)
    p.add_argument("--np", type=int, required=True)
    p.add_argument("--nb", type=int, default=1)
    p.add_argument("--nh", type=int, default=None, help="detector height (needed for sub-line variants)")
    p.set_defaults(func=cmd_count_ops)

    p = sub.add_parser("bench", help="time kernels and write CSV/JSON reports")
    p.add_argument("--catalog", default="desk", choices=["desk"], help="problem catalog")
    p.add_argument("--problem", help="comma list of problem labels (overrides --catalog)")
    p.add_argument("--variants", default="all", help="'all' or comma list of variant names")
    p.add_argument("--nb", type=int, default=32, help="batch size for optimized variants")
    p.add_argument("--sweep-nb", dest="sweep_nb", help=f"comma list of batch sizes (e.g. {_DEFAULT_NB_SWEEP})")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="CSV report path")
    p.add_argument("--json", help="JSON report path")
    p.add_argument("--verify", action="store_true", help="RMSE-check variants against baseline; exit 1 on failure")
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # allow worker counts beyond the core count before numba is imported
    threads = getattr(args, "threads", None)
    if threads and "NUMBA_NUM_THREADS" not in os.environ:
        os.environ["NUMBA_NUM_THREADS"] = str(max(threads, os.cpu_count() or 1))
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
