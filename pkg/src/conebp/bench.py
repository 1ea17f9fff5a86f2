"""Problem catalog, timing harness, GUPS metric, and report serialization.

Timings cover the kernel only: synthetic data generation and layout
transposes are excluded (the transpose cost is reported separately).  Each
measurement is the median of several runs after one discarded warm-up, and
every report row carries the closed-form operation counters so throughput
can be related to arithmetic and traffic.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass

from .backprojector import (
    BatchConfig,
    KernelVariant,
    OpCounters,
    backproject_baseline,
    backproject_optimized,
    count_ops,
)
from .geometry import ScanGeometry, build_geometry
from .phantom import make_dataset, rmse
from .tensors import Volume, Layout, transpose_projections, transpose_volume

__all__ = [
    "Problem",
    "BenchReport",
    "DESK_LABELS",
    "desk_catalog",
    "fullscale_catalog",
    "find_problem",
    "geometry_for",
    "problem_data",
    "clear_data_cache",
    "gups",
    "run_bench",
    "sweep_nb",
    "verify_variants",
    "write_reports_csv",
    "write_reports_json",
    "CSV_COLUMNS",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "label",
    "variant",
    "nb",
    "threads",
    "seconds",
    "gups",
    "dot_ops",
    "vol_words",
    "proj_words",
    "transpose_seconds",
]


@dataclass(frozen=True)
class Problem:
    """An image reconstruction problem: detector (n, n, np) -> volume (nx, ny, nz)."""

    label: str
    proj: tuple[int, int, int]
    vol: tuple[int, int, int]
    note: str = ""

    @property
    def updates(self) -> int:
        nx, ny, nz = self.vol
        return nx * ny * nz * self.proj[2]


# desk-scale catalog: the full-scale problem matrix shrunk to sizes that
# fit an ordinary workstation (see note for the scale mapping)
_DESK = (
    Problem("D1", (64, 64, 128), (64, 64, 64), note="P1 at 1/4 linear scale"),
    Problem("D2", (128, 128, 128), (128, 128, 128), note="P5 at 1/4 linear scale"),
    Problem("D3", (128, 128, 256), (256, 256, 256), note="P2 at 1/2 linear scale"),
)

_FULL_SCALE = tuple(
    Problem(label, (n, n, 512), (v, v, v))
    for label, n, v in (
        ("P1", 256, 256),
        ("P2", 256, 512),
        ("P3", 256, 1024),
        ("P4", 512, 256),
        ("P5", 512, 512),
        ("P6", 512, 1024),
        ("P7", 1024, 256),
        ("P8", 1024, 512),
        ("P9", 1024, 1024),
        ("P10", 1024, 1300),
    )
)

DESK_LABELS = tuple(p.label for p in _DESK)


def desk_catalog() -> tuple[Problem, ...]:
    return _DESK


def fullscale_catalog() -> tuple[Problem, ...]:
    """Full-scale problem list; constructible on demand, not benchmarked here."""
    return _FULL_SCALE


def find_problem(label: str) -> Problem:
    for p in _DESK + _FULL_SCALE:
        if p.label.lower() == label.lower():
            return p
    raise ValueError(f"unknown problem label {label!r}")


def geometry_for(problem: Problem) -> ScanGeometry:
    nh, nw, n_proj = problem.proj
    nx, ny, nz = problem.vol
    return build_geometry(nx=nx, ny=ny, nz=nz, nw=nw, nh=nh, np=n_proj)


_data_cache: dict = {}


def problem_data(problem: Problem):
    """Synthetic dataset for a problem, cached across calls.

    Returns (geometry, truth volume, natural projections, matrices).
    """
    key = (problem.proj, problem.vol)
    if key not in _data_cache:
        geom = geometry_for(problem)
        truth, proj, mats = make_dataset(geom)
        _data_cache[key] = (geom, truth, proj, mats)
    return _data_cache[key]


def clear_data_cache() -> None:
    _data_cache.clear()


def gups(nx: int, ny: int, nz: int, np_: int, seconds: float) -> float:
    """Giga voxel updates per second: nx*ny*nz*np / t / 1e9."""
    if seconds <= 0:
        raise ValueError(f"seconds must be positive, got {seconds}")
    return nx * ny * nz * np_ / seconds / 1e9


@dataclass(frozen=True)
class BenchReport:
    label: str
    variant: str
    nb: int
    threads: int
    wall_seconds: float
    gups: float
    counters: OpCounters
    transpose_seconds: float

    def to_csv_row(self) -> list:
        return [
            self.label,
            self.variant,
            self.nb,
            self.threads,
            repr(self.wall_seconds),
            repr(self.gups),
            self.counters.dot_ops,
            self.counters.vol_word_accesses,
            self.counters.proj_word_accesses,
            repr(self.transpose_seconds),
        ]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "label": self.label,
            "variant": self.variant,
            "nb": self.nb,
            "threads": self.threads,
            "seconds": self.wall_seconds,
            "gups": self.gups,
            "dot_ops": self.counters.dot_ops,
            "vol_words": self.counters.vol_word_accesses,
            "proj_words": self.counters.proj_word_accesses,
            "transpose_seconds": self.transpose_seconds,
        }


def run_bench(
    problem: Problem,
    variant: KernelVariant,
    nb: int = 32,
    threads: int | None = None,
    repeats: int = 5,
) -> BenchReport:
    """Median-of-N kernel timing on the problem's synthetic dataset.

    The first (warm-up) run is discarded; each timed run starts from a
    fresh zero volume.  Raises with the problem label attached if the
    volume cannot be allocated.
    """
    import numba

    variant = KernelVariant(variant)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    nh, nw, n_proj = problem.proj
    nx, ny, nz = problem.vol
    if variant is KernelVariant.BASELINE:
        nb = 1
    batch = BatchConfig(nb)
    batch.check_divides(n_proj)

    geom, truth, proj, mats = problem_data(problem)
    transpose_seconds = 0.0
    if variant.uses_transposed_layout:
        t0 = time.perf_counter()
        img = transpose_projections(proj)
        transpose_seconds = time.perf_counter() - t0
        layout = Layout.TRANSPOSED
    else:
        img = proj
        layout = Layout.NATURAL

    def fresh_volume() -> Volume:
        try:
            return Volume.zeros(nx, ny, nz, layout)
        except MemoryError as exc:
            raise MemoryError(f"problem {problem.label}: cannot allocate {nx}x{ny}x{nz} volume") from exc

    def run_once(vol: Volume) -> float:
        start = time.perf_counter()
        if variant is KernelVariant.BASELINE:
            backproject_baseline(img, mats, vol, threads=threads)
        else:
            backproject_optimized(img, mats, vol, variant, batch=batch, threads=threads)
        return time.perf_counter() - start

    run_once(fresh_volume())  # warm-up (and JIT) run, discarded
    times = [run_once(fresh_volume()) for _ in range(repeats)]
    wall = statistics.median(times)

    counters = count_ops(variant, nx, ny, nz, n_proj, nb=nb, nh=nh)
    return BenchReport(
        label=problem.label,
        variant=variant.name.lower(),
        nb=nb,
        threads=threads if threads is not None else numba.get_num_threads(),
        wall_seconds=wall,
        gups=gups(nx, ny, nz, n_proj, wall),
        counters=counters,
        transpose_seconds=transpose_seconds,
    )


def sweep_nb(
    problem: Problem,
    variant: KernelVariant,
    nb_values=(1, 2, 4, 8, 16, 32),
    threads: int | None = None,
    repeats: int = 5,
) -> list[BenchReport]:
    """One report per batch size, in the given order."""
    return [run_bench(problem, variant, nb=nb, threads=threads, repeats=repeats) for nb in nb_values]


def verify_variants(
    problem: Problem,
    variants=None,
    nb: int = 32,
    threads: int | None = None,
) -> dict[str, float]:
    """RMSE of each optimized variant against the baseline kernel output."""
    if variants is None:
        variants = [v for v in KernelVariant if v is not KernelVariant.BASELINE]
    nh, nw, n_proj = problem.proj
    nx, ny, nz = problem.vol
    geom, truth, proj, mats = problem_data(problem)
    base = backproject_baseline(proj, mats, Volume.zeros(nx, ny, nz), threads=threads)
    img_t = transpose_projections(proj)
    out = {}
    for variant in variants:
        variant = KernelVariant(variant)
        if variant is KernelVariant.BASELINE:
            continue
        vol_t = Volume.zeros(nx, ny, nz, Layout.TRANSPOSED)
        backproject_optimized(img_t, mats, vol_t, variant, batch=BatchConfig(nb), threads=threads)
        out[variant.name.lower()] = rmse(base, transpose_volume(vol_t))
    return out


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.to_csv_row())


def write_reports_json(path, reports) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_json_dict() for r in reports], fh, indent=2)
        fh.write("\n")
