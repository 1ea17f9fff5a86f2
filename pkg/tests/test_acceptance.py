"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they
happen.  The desk problems D1-D3 are exercised end to end; results are
cached session-wide so the expensive reconstructions happen once.
"""

import math
import os
import statistics
import time

import numpy as np
import pytest

from conebp import (
    KernelVariant,
    Layout,
    Volume,
    apply_matrix,
    backproject_baseline,
    backproject_optimized,
    build_geometry,
    count_ops,
    dot_reduction_ratio,
    gups,
    asymptotic_dot_reduction_ratio,
    projection_matrices,
    transpose_projections,
)
from conebp import bench

from helpers import subline_vs_bilinear_max_rel_dev

DESK = ("D1", "D2", "D3")
OPTIMIZED_NAMES = ("transpose", "share", "symmetry", "subline", "subline_prefetch")


def record(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_kernel_equivalence(ladder):
    worst = {}
    for label in DESK:
        result = ladder(label)
        for name in OPTIMIZED_NAMES:
            worst[(label, name)] = result.rmse[name]
    peak = max(worst.values())
    ok = all(v < 1e-5 for v in worst.values())
    record("1 kernel-equivalence", ok, f"worst RMSE vs baseline {peak:.3e} over D1-D3, threshold 1e-5")


def test_criterion_2_dot_op_reduction():
    checks = []
    for nx, ny, nz, n_proj in [(64, 64, 64, 128), (32, 32, 32, 8), (16, 24, 256, 16)]:
        base = count_ops(KernelVariant.BASELINE, nx, ny, nz, n_proj)
        checks.append(base.dot_ops == 3 * n_proj * nx * ny * nz)
        for variant in (KernelVariant.SYMMETRY, KernelVariant.SUBLINE, KernelVariant.SUBLINE_PREFETCH):
            opt = count_ops(variant, nx, ny, nz, n_proj, nb=max(1, n_proj // 8), nh=64)
            checks.append(opt.dot_ops == n_proj * nx * ny * (2 + nz // 2))
    gap = abs(dot_reduction_ratio(256) - asymptotic_dot_reduction_ratio(256))
    checks.append(gap < 0.01)
    record(
        "2 dot-op-reduction", all(checks),
        f"exact integer counts, ratio gap at nz=256 is {gap:.4f} < 0.01",
    )


def test_criterion_3_volume_traffic_reduction():
    nx, ny, nz = 64, 64, 64  # D1 volume
    n_proj = 128
    ratios = []
    base = count_ops(KernelVariant.SUBLINE, nx, ny, nz, n_proj, nb=1, nh=64).vol_word_accesses
    for nb in (1, 2, 4, 8, 16, 32):
        words = count_ops(KernelVariant.SUBLINE, nx, ny, nz, n_proj, nb=nb, nh=64).vol_word_accesses
        ratios.append(words * nb == base)
    record("3 volume-traffic", all(ratios), "vol_word_accesses(nb)/vol_word_accesses(1) == 1/nb exactly on D1")


def test_criterion_4_batch_trend_on_d2():
    problem = bench.find_problem("D2")
    reports = bench.sweep_nb(problem, KernelVariant.SUBLINE_PREFETCH, nb_values=(1, 2, 4, 8, 16, 32), repeats=5)
    series = [r.gups for r in reports]
    ends_ok = series[-1] >= series[0]
    adjacent_ok = all(series[i + 1] >= 0.95 * series[i] for i in range(len(series) - 1))
    detail = "gups by nb " + ", ".join(f"{r.nb}:{r.gups:.3f}" for r in reports)
    record("4 batch-trend", ends_ok and adjacent_ok, detail)


def test_criterion_5_thread_determinism():
    problem = bench.find_problem("D2")
    geom, truth, proj, mats = bench.problem_data(problem)
    img_t = transpose_projections(proj)
    digests = []
    for threads in (1, 2, 8):
        vol = Volume.zeros(*problem.vol, Layout.TRANSPOSED)
        backproject_optimized(img_t, mats, vol, KernelVariant.SUBLINE_PREFETCH, batch=32, threads=threads)
        digests.append(hash(vol.data.tobytes()))
        del vol
    base_digests = []
    for threads in (1, 2, 8):
        vol = Volume.zeros(*problem.vol)
        backproject_baseline(proj, mats, vol, threads=threads)
        base_digests.append(hash(vol.data.tobytes()))
        del vol
    ok = len(set(digests)) == 1 and len(set(base_digests)) == 1
    record("5 thread-determinism", ok, "bitwise identical outputs for 1, 2, and max workers on D2")


def test_criterion_5_thread_scaling():
    cores = os.cpu_count() or 1
    if cores < 4:
        print(
            f"ACCEPTANCE 5 thread-scaling: SKIP (host has {cores} core(s); "
            "the wall-time check applies to >=4-core hosts)",
            flush=True,
        )
        pytest.skip(f"needs >= 4 cores, host has {cores}")
    problem = bench.find_problem("D2")
    geom, truth, proj, mats = bench.problem_data(problem)
    img_t = transpose_projections(proj)

    def median_wall(threads):
        times = []
        for _ in range(3):
            vol = Volume.zeros(*problem.vol, Layout.TRANSPOSED)
            start = time.perf_counter()
            backproject_optimized(img_t, mats, vol, KernelVariant.SUBLINE_PREFETCH, batch=32, threads=threads)
            times.append(time.perf_counter() - start)
        return statistics.median(times)

    median_wall(1)  # warm the kernel before timing
    t1 = median_wall(1)
    t4 = median_wall(4)
    record("5 thread-scaling", t4 < t1, f"D2 wall 4 workers {t4:.3f}s < 1 worker {t1:.3f}s")


def test_criterion_6_interpolation_equivalence():
    worst = subline_vs_bilinear_max_rel_dev(n_grids=64, n_points=256, size=8)
    record("6 interpolation", worst <= 1e-6, f"max relative deviation {worst:.2e} over 64 grids x 256 points")


def test_criterion_7_geometry_symmetry():
    geom = build_geometry(nx=32, ny=32, nz=32, nw=64, nh=64, np=16)
    mats = projection_matrices(geom)
    ii, jj, kk = np.meshgrid(np.arange(32), np.arange(32), np.arange(32), indexing="ij")
    worst = 0.0
    for s in range(geom.np):
        _, v, _ = apply_matrix(mats[s], ii, jj, kk)
        _, v_mirror, _ = apply_matrix(mats[s], ii, jj, 31 - kk)
        worst = max(worst, float(np.abs(v + v_mirror - (geom.nh - 1)).max()))
    record("7 geometry-symmetry", worst <= 1e-3, f"max |v + v' - (nh-1)| = {worst:.2e} px over 32^3 x 16 angles")


def test_criterion_8_gups_formula():
    value = gups(256, 256, 256, 512, 2.0)
    ok = math.isclose(value, 4.294967296, rel_tol=1e-12)
    record("8 gups-formula", ok, f"gups(256,256,256,512,2.0) = {value!r}")


def test_criterion_9_prefetch_bitwise(ladder):
    same = {label: ladder(label).digest["subline"] == ladder(label).digest["subline_prefetch"] for label in DESK}
    record("9 prefetch-bitwise", all(same.values()), f"subline == subline_prefetch bitwise on {', '.join(DESK)}")
