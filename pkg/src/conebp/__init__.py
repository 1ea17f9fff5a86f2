"""Performance-portable cone-beam CT back-projection on CPUs.

A ladder of back-projection kernels (baseline through transposed, hoisted,
mirrored, sub-line interpolated, and prefetched variants), exact operation
counters, a synthetic phantom pipeline for verification, and a GUPS
benchmark harness.
"""

from .backprojector import (
    BatchConfig,
    KernelVariant,
    OpCounters,
    backproject,
    backproject_baseline,
    backproject_optimized,
    backproject_prefetch,
    count_ops,
    dot_reduction_ratio,
    asymptotic_dot_reduction_ratio,
)
from .bench import BenchReport, Problem, desk_catalog, find_problem, gups, run_bench, sweep_nb
from .geometry import (
    ProjectionMatrix,
    ScanGeometry,
    apply_matrix,
    build_geometry,
    load_geometry,
    load_matrices,
    projection_matrices,
    projection_matrix,
    save_geometry,
    save_matrices,
)
from .interp import SublineBuffer, bilinear, build_subline, dot4, mix, sample_subline
from .phantom import (
    Ellipsoid,
    EllipsoidPhantom,
    default_phantom,
    forward_project,
    load_phantom,
    make_dataset,
    rasterize_phantom,
    rmse,
    save_phantom,
)
from .tensors import (
    IJList,
    Layout,
    ProjectionStack,
    Volume,
    load_projections,
    load_volume,
    make_ij_list,
    save_projections,
    save_volume,
    transpose_projections,
    transpose_volume,
)

__version__ = "0.1.0"
