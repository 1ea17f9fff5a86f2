"""Shared fixtures: a tiny in-bounds dataset and cached desk-problem results.

The thread ceiling is raised before numba loads so worker-count determinism
tests can exercise 1..8 workers even on small hosts.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import hashlib
from types import SimpleNamespace

import numpy as np
import pytest

from conebp import (
    KernelVariant,
    Layout,
    Volume,
    backproject_baseline,
    backproject_optimized,
    build_geometry,
    make_dataset,
    rmse,
    transpose_projections,
    transpose_volume,
)
from conebp import bench


@pytest.fixture(scope="session")
def tiny():
    """12^3 volume, 24^2 detector, 8 angles; everything lands in-bounds."""
    geom = build_geometry(nx=12, ny=12, nz=12, nw=24, nh=24, np=8)
    truth, proj, mats = make_dataset(geom)
    return SimpleNamespace(
        geom=geom,
        truth=truth,
        proj=proj,
        mats=mats,
        img_t=transpose_projections(proj),
    )


_OPTIMIZED = [
    KernelVariant.TRANSPOSE,
    KernelVariant.SHARE,
    KernelVariant.SYMMETRY,
    KernelVariant.SUBLINE,
    KernelVariant.SUBLINE_PREFETCH,
]

_ladder_cache: dict = {}


def _sha(arr: np.ndarray) -> str:
    return hashlib.sha256(arr.tobytes()).hexdigest()


def ladder_results(label: str, nb: int = 32) -> SimpleNamespace:
    """Baseline plus every optimized variant on one desk problem.

    Returns RMSE vs baseline and an output digest per variant; volumes are
    discarded to keep the session memory-light.
    """
    key = (label, nb)
    if key in _ladder_cache:
        return _ladder_cache[key]
    problem = bench.find_problem(label)
    geom, truth, proj, mats = bench.problem_data(problem)
    nx, ny, nz = problem.vol

    base = Volume.zeros(nx, ny, nz)
    backproject_baseline(proj, mats, base)
    img_t = transpose_projections(proj)

    rmses = {}
    hashes = {"baseline": _sha(base.data)}
    for variant in _OPTIMIZED:
        vol_t = Volume.zeros(nx, ny, nz, Layout.TRANSPOSED)
        backproject_optimized(img_t, mats, vol_t, variant, batch=nb)
        natural = transpose_volume(vol_t)
        name = variant.name.lower()
        rmses[name] = rmse(base, natural)
        hashes[name] = _sha(natural.data)
        del vol_t, natural

    result = SimpleNamespace(problem=problem, nb=nb, rmse=rmses, digest=hashes)
    _ladder_cache[key] = result
    return result


@pytest.fixture(scope="session")
def ladder():
    return ladder_results
