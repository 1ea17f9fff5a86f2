"""The back-projection kernel ladder and its operation counters.

Variants are cumulative: each rung keeps every optimization of the rungs
below it.

* BASELINE          natural layouts, three inner products and one bilinear
                    sample per voxel update, immediate volume writes
* TRANSPOSE         transposed projections/volume, batched register
                    accumulation before each volume write
* SHARE             + depth/weight/u hoisted out of the z loop
* SYMMETRY          + mirrored detector row: half the projection dots
* SUBLINE           + two-pass sub-line interpolation buffers
* SUBLINE_PREFETCH  + dual buffers, building one projection ahead

Every kernel is deterministic: outputs are bitwise identical for any worker
count, and (for the batched variants, starting from a zero volume) for any
batch size, because each voxel keeps one writer and a fixed ascending
accumulation order over projections.
"""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .tensors import Layout, ProjectionStack, Volume, make_ij_list

__all__ = [
    "KernelVariant",
    "BatchConfig",
    "OpCounters",
    "backproject",
    "backproject_baseline",
    "backproject_optimized",
    "backproject_prefetch",
    "count_ops",
    "dot_reduction_ratio",
    "asymptotic_dot_reduction_ratio",
    "num_workers",
]

MAX_BATCH = 32


class KernelVariant(enum.IntEnum):
    BASELINE = 0
    TRANSPOSE = 1
    SHARE = 2
    SYMMETRY = 3
    SUBLINE = 4
    SUBLINE_PREFETCH = 5

    @classmethod
    def parse(cls, name: str) -> "KernelVariant":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(v.name.lower() for v in cls)
            raise ValueError(f"unknown kernel variant {name!r}; valid: {valid}") from None

    @property
    def uses_transposed_layout(self) -> bool:
        return self is not KernelVariant.BASELINE

    @property
    def uses_symmetry(self) -> bool:
        return self >= KernelVariant.SYMMETRY

    @property
    def uses_subline(self) -> bool:
        return self >= KernelVariant.SUBLINE


@dataclass(frozen=True)
class BatchConfig:
    """Number of projections accumulated in registers per volume write."""

    nb: int = 1

    def __post_init__(self):
        if not (1 <= self.nb <= MAX_BATCH):
            raise ValueError(f"batch size must be in [1, {MAX_BATCH}], got {self.nb}")

    def check_divides(self, n_proj: int) -> None:
        if n_proj % self.nb != 0:
            raise ValueError(f"nb must divide np: nb={self.nb}, np={n_proj}")


@dataclass(frozen=True)
class OpCounters:
    """Exact tallies of kernel work in float32 words and operations."""

    dot_ops: int
    vol_word_accesses: int
    proj_word_accesses: int
    interp_ops: int
    subline_builds: int = 0


def num_workers() -> int:
    """Current kernel worker count."""
    import numba

    return numba.get_num_threads()


@contextmanager
def _worker_count(threads: int | None):
    import numba

    if threads is None:
        yield
        return
    if threads < 1:
        raise ValueError(f"worker count must be >= 1, got {threads}")
    previous = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        yield
    finally:
        numba.set_num_threads(previous)


def _check_mats(mats: np.ndarray, n_proj: int) -> np.ndarray:
    mats = np.ascontiguousarray(mats, dtype=np.float32)
    if mats.shape != (n_proj, 3, 4):
        raise ValueError(f"expected ({n_proj}, 3, 4) matrices, got {mats.shape}")
    if not np.isfinite(mats).all():
        raise ValueError("projection matrices contain non-finite values")
    return mats


def backproject_baseline(
    img: ProjectionStack,
    mats: np.ndarray,
    vol: Volume,
    threads: int | None = None,
    count: bool = False,
):
    """Reference multi-threaded kernel on natural layouts.

    Accumulates into ``vol`` in place and returns it.  With ``count=True``
    the slow instrumented path runs instead and ``(vol, OpCounters)`` is
    returned; intended for small problems.
    """
    if img.layout is not Layout.NATURAL or vol.layout is not Layout.NATURAL:
        raise ValueError("baseline kernel requires NATURAL projections and volume")
    mats = _check_mats(mats, img.np)
    if count:
        from . import reference

        counts = reference.ref_baseline(img.data, mats, vol.data)
        return vol, OpCounters(**_counter_kwargs(counts))
    with _worker_count(threads):
        _kernels.baseline(img.data, mats, vol.data)
    return vol


def backproject_optimized(
    img: ProjectionStack,
    mats: np.ndarray,
    vol: Volume,
    variant: KernelVariant,
    batch: BatchConfig | int | None = None,
    threads: int | None = None,
    count: bool = False,
):
    """Optimized kernel ladder on transposed layouts.

    ``variant`` must be TRANSPOSE or above; SYMMETRY and above additionally
    require an even nz.  ``batch`` defaults to nb=1.  Accumulates into
    ``vol`` in place and returns it (``(vol, OpCounters)`` when counting).
    """
    variant = KernelVariant(variant)
    if variant is KernelVariant.BASELINE:
        raise ValueError("use backproject_baseline for the BASELINE variant")
    if img.layout is not Layout.TRANSPOSED or vol.layout is not Layout.TRANSPOSED:
        raise ValueError("optimized kernels require TRANSPOSED projections and volume")
    if batch is None:
        batch = BatchConfig(1)
    elif isinstance(batch, int):
        batch = BatchConfig(batch)
    batch.check_divides(img.np)
    if variant.uses_symmetry and vol.nz % 2 != 0:
        raise ValueError(f"symmetry kernels need an even nz, got {vol.nz}")
    mats = _check_mats(mats, img.np)
    ij = make_ij_list(vol.nx, vol.ny).pairs

    if count:
        from . import reference

        counts = reference.ref_optimized(variant.name.lower(), img.data, mats, vol.data, ij, batch.nb)
        return vol, OpCounters(**_counter_kwargs(counts))

    kernel = {
        KernelVariant.TRANSPOSE: _kernels.transpose,
        KernelVariant.SHARE: _kernels.share,
        KernelVariant.SYMMETRY: _kernels.symmetry,
        KernelVariant.SUBLINE: _kernels.subline,
        KernelVariant.SUBLINE_PREFETCH: _kernels.subline_prefetch,
    }[variant]
    with _worker_count(threads):
        kernel(img.data, mats, vol.data, ij, batch.nb)
    return vol


def backproject_prefetch(
    img: ProjectionStack,
    mats: np.ndarray,
    vol: Volume,
    batch: BatchConfig | int | None = None,
    threads: int | None = None,
    count: bool = False,
):
    """SUBLINE with the dual-buffer schedule; bitwise equal to SUBLINE."""
    return backproject_optimized(
        img, mats, vol, KernelVariant.SUBLINE_PREFETCH, batch=batch, threads=threads, count=count
    )


def backproject(
    img: ProjectionStack,
    mats: np.ndarray,
    vol: Volume,
    variant: KernelVariant,
    batch: BatchConfig | int | None = None,
    threads: int | None = None,
    count: bool = False,
):
    """Dispatch to the baseline or optimized kernel by variant."""
    variant = KernelVariant(variant)
    if variant is KernelVariant.BASELINE:
        return backproject_baseline(img, mats, vol, threads=threads, count=count)
    return backproject_optimized(img, mats, vol, variant, batch=batch, threads=threads, count=count)


def _counter_kwargs(counts: dict) -> dict:
    return {
        "dot_ops": counts["dot_ops"],
        "vol_word_accesses": counts["vol_word_accesses"],
        "proj_word_accesses": counts["proj_word_accesses"],
        "interp_ops": counts["interp_ops"],
        "subline_builds": counts["subline_builds"],
    }


def count_ops(
    variant: KernelVariant,
    nx: int,
    ny: int,
    nz: int,
    np_: int,
    nb: int = 1,
    nh: int | None = None,
) -> OpCounters:
    """Closed-form operation counts for a problem where every sample lands
    on the detector (the synthetic-data setting).

    Per volume update U = np*nx*ny*nz and per column-projection pair
    C = np*nx*ny:

    * dot_ops: 3U for BASELINE/TRANSPOSE, C*(2+nz) for SHARE,
      C*(2+nz/2) for SYMMETRY and above
    * vol_word_accesses: 2U for BASELINE, 2U/nb for the batched variants
    * proj_word_accesses: 4U for direct bilinear, 2*nh*C for sub-line
    * interp_ops: 3 blends per direct bilinear sample; the sub-line scheme
      spends nh blends per build plus one per sample

    ``nh`` is required for the sub-line variants.  The instrumented counting
    mode (``backproject(..., count=True)``) reproduces these totals exactly.
    """
    variant = KernelVariant(variant)
    if min(nx, ny, nz) < 1 or np_ < 1:
        raise ValueError("problem dimensions must be positive")
    if variant is not KernelVariant.BASELINE:
        BatchConfig(nb).check_divides(np_)
    if variant.uses_symmetry and nz % 2 != 0:
        raise ValueError(f"symmetry kernels need an even nz, got {nz}")
    if variant.uses_subline and nh is None:
        raise ValueError("sub-line variants need the detector height nh to count projection reads")

    updates = np_ * nx * ny * nz
    columns = np_ * nx * ny

    if variant is KernelVariant.BASELINE:
        return OpCounters(
            dot_ops=3 * updates,
            vol_word_accesses=2 * updates,
            proj_word_accesses=4 * updates,
            interp_ops=3 * updates,
        )
    if variant is KernelVariant.TRANSPOSE:
        dots = 3 * updates
    elif variant is KernelVariant.SHARE:
        dots = columns * (2 + nz)
    else:
        dots = columns * (2 + nz // 2)

    vol_words = 2 * updates // nb
    if variant.uses_subline:
        proj_words = 2 * nh * columns
        interp = nh * columns + updates
        builds = columns
    else:
        proj_words = 4 * updates
        interp = 3 * updates
        builds = 0
    return OpCounters(
        dot_ops=dots,
        vol_word_accesses=vol_words,
        proj_word_accesses=proj_words,
        interp_ops=interp,
        subline_builds=builds,
    )


def dot_reduction_ratio(nz: int) -> float:
    """Fraction of projection dots removed by the full ladder vs BASELINE."""
    if nz < 2 or nz % 2 != 0:
        raise ValueError(f"need an even nz >= 2, got {nz}")
    return 1.0 - (2 + nz // 2) / (3 * nz)


def asymptotic_dot_reduction_ratio(nz: int) -> float:
    """Large-nz closed form of the reduction ratio: (5 - 2/nz) / 6 -> 5/6."""
    return (5.0 - 2.0 / nz) / 6.0
