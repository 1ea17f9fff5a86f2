"""Circular-trajectory cone-beam scan geometry and 3x4 projection matrices.

A projection matrix maps homogeneous voxel indices (i, j, k, 1) to detector
pixel coordinates (u, v) and a positive depth term z.  The construction is
the usual pinhole composition: voxel index -> world (volume centered on the
rotation axis), rotation about Z, perspective division by the source
distance, and scaling/shifting into detector pixels.  Two algebraic facts
are guaranteed exactly and relied on by the optimized kernels:

* the u and z rows have a zero k-coefficient (columns of voxels project to
  a vertical detector line), and
* voxels mirrored about the volume mid-plane project to detector rows
  mirrored about the detector's horizontal centerline.

The homogeneous row is normalized so a point at the volume center yields
z = d; the per-voxel weight 1/z**2 then carries world-distance meaning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "ScanGeometry",
    "ProjectionMatrix",
    "build_geometry",
    "projection_matrix",
    "projection_matrices",
    "apply_matrix",
    "save_geometry",
    "load_geometry",
    "save_matrices",
    "load_matrices",
]

# detector pixels kept free at each border so bilinear footprints stay valid
_DETECTOR_MARGIN = 2.0
# slack applied on top of the exact fit when auto-deriving pixel pitches
_PITCH_SLACK = 1.02


@dataclass(frozen=True)
class ScanGeometry:
    """Physical cone-beam setup plus the voxel grid it reconstructs into.

    Distances are world units; ``d`` is source to rotation axis, ``D`` source
    to detector, and the detector V axis is parallel to the rotation (Z)
    axis.  The volume is an isotropic ``nx * ny * nz`` grid of ``voxel_size``
    cubes centered on the rotation axis.  Immutable; safe to share across
    workers.
    """

    d: float
    D: float
    nw: int
    nh: int
    pixel_pitch_u: float
    pixel_pitch_v: float
    voxel_size: float
    np: int
    angles: tuple[float, ...]
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        if not (self.d > 0):
            raise ValueError(f"source distance d must be > 0, got {self.d}")
        if not (self.D >= self.d):
            raise ValueError(f"detector distance D must be >= d, got D={self.D}, d={self.d}")
        if self.nw < 2 or self.nh < 2:
            raise ValueError(f"detector must be at least 2x2 pixels, got {self.nw}x{self.nh}")
        if self.np < 1:
            raise ValueError("need at least one projection")
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError(f"degenerate volume {self.nx}x{self.ny}x{self.nz}")
        if self.pixel_pitch_u <= 0 or self.pixel_pitch_v <= 0 or self.voxel_size <= 0:
            raise ValueError("pixel pitches and voxel size must be positive")
        if len(self.angles) != self.np:
            raise ValueError(f"expected {self.np} angles, got {len(self.angles)}")
        if not all(math.isfinite(a) for a in self.angles):
            raise ValueError("angles must be finite")
        # the whole voxel grid must stay strictly in front of the source,
        # otherwise the homogeneous depth z would reach zero
        if self.axis_radius >= self.d:
            raise ValueError(
                f"volume XY radius {self.axis_radius:.3f} reaches the source orbit d={self.d}"
            )

    @property
    def axis_radius(self) -> float:
        """Largest XY distance of any voxel center from the rotation axis."""
        return 0.5 * self.voxel_size * math.hypot(self.nx - 1, self.ny - 1)

    @property
    def detector_center(self) -> tuple[float, float]:
        """Principal point (u, v) in pixels: the detector center."""
        return ((self.nw - 1) / 2.0, (self.nh - 1) / 2.0)


@dataclass(frozen=True)
class ProjectionMatrix:
    """3x4 single-precision homogeneous mapping: voxel index -> (u*z, v*z, z)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.m, dtype=np.float32)
        if m.shape != (3, 4):
            raise ValueError(f"projection matrix must be 3x4, got {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("projection matrix has non-finite entries")
        object.__setattr__(self, "m", m)


def build_geometry(
    *,
    nx: int,
    ny: int,
    nz: int,
    nw: int,
    nh: int,
    np: int,
    d: float | None = None,
    D: float | None = None,
    pixel_pitch_u: float | None = None,
    pixel_pitch_v: float | None = None,
    voxel_size: float = 1.0,
    angles=None,
) -> ScanGeometry:
    """Construct a circular scan geometry.

    Omitted distances/pitches are derived so that every voxel of the grid
    projects strictly inside the detector (with a small border margin) at
    every angle.  ``angles`` defaults to ``np`` equiangular positions over
    [0, 2*pi); an explicit sequence is accepted for testing.
    """
    n_proj = np
    del np
    if min(nx, ny, nz) < 1:
        raise ValueError(f"degenerate volume {nx}x{ny}x{nz}")
    if voxel_size <= 0:
        raise ValueError("voxel size must be positive")

    r_xy = 0.5 * voxel_size * math.hypot(nx - 1, ny - 1)
    r_z = 0.5 * voxel_size * (nz - 1)
    if d is None:
        d = 2.5 * max(r_xy, voxel_size)
    if D is None:
        D = 1.536 * d
    if d <= r_xy:
        raise ValueError(f"d={d} too small: volume XY radius is {r_xy:.3f}")

    # worst-case magnification happens at the closest approach to the source
    z_min = d - r_xy
    half_u = (nw - 1) / 2.0 - _DETECTOR_MARGIN
    half_v = (nh - 1) / 2.0 - _DETECTOR_MARGIN
    if half_u <= 0 or half_v <= 0:
        raise ValueError(f"detector {nw}x{nh} too small for the border margin")
    if pixel_pitch_u is None:
        pixel_pitch_u = _PITCH_SLACK * D * max(r_xy, voxel_size) / (z_min * half_u)
    if pixel_pitch_v is None:
        pixel_pitch_v = _PITCH_SLACK * D * max(r_z, voxel_size) / (z_min * half_v)

    if angles is None:
        angles = tuple(2.0 * math.pi * s / n_proj for s in range(n_proj))
    else:
        angles = tuple(float(a) for a in angles)

    return ScanGeometry(
        d=float(d),
        D=float(D),
        nw=int(nw),
        nh=int(nh),
        pixel_pitch_u=float(pixel_pitch_u),
        pixel_pitch_v=float(pixel_pitch_v),
        voxel_size=float(voxel_size),
        np=int(n_proj),
        angles=angles,
        nx=int(nx),
        ny=int(ny),
        nz=int(nz),
    )


def _matrix_rows(geom: ScanGeometry, angle: float) -> np.ndarray:
    """Compose the 3x4 matrix for one angle in float64."""
    s = geom.voxel_size
    ox = (geom.nx - 1) / 2.0
    oy = (geom.ny - 1) / 2.0
    oz = (geom.nz - 1) / 2.0
    cu, cv = geom.detector_center
    mu = geom.D / geom.pixel_pitch_u
    mv = geom.D / geom.pixel_pitch_v
    c = math.cos(angle)
    sn = math.sin(angle)

    m = np.zeros((3, 4), dtype=np.float64)
    # depth row: z = (rotated world x) + d, zero k-coefficient by construction
    m[2] = (c * s, sn * s, 0.0, geom.d - s * (c * ox + sn * oy))
    # u row: magnified rotated world y, shifted to the principal point
    m[0] = (-sn * s * mu, c * s * mu, 0.0, mu * s * (sn * ox - c * oy))
    m[0] += cu * m[2]
    # v row: world z is untouched by the rotation, so only k contributes
    m[1] = (0.0, 0.0, mv * s, -mv * s * oz)
    m[1] += cv * m[2]
    return m


def projection_matrix(geom: ScanGeometry, angle_index: int) -> ProjectionMatrix:
    """Projection matrix for one angle of the scan.

    Raises IndexError for an out-of-range index and ValueError if any voxel
    of the grid would reach non-positive depth.
    """
    if not 0 <= angle_index < geom.np:
        raise IndexError(f"angle index {angle_index} out of range [0, {geom.np})")
    m64 = _matrix_rows(geom, geom.angles[angle_index])
    # z is affine in (i, j, k): positivity over the grid reduces to its corners
    corners = np.array(
        [(i, j, k) for i in (0, geom.nx - 1) for j in (0, geom.ny - 1) for k in (0, geom.nz - 1)],
        dtype=np.float64,
    )
    z = corners @ m64[2, :3] + m64[2, 3]
    if not (z > 0).all():
        raise ValueError("geometry yields non-positive depth inside the volume")
    return ProjectionMatrix(m=m64.astype(np.float32))


def projection_matrices(geom: ScanGeometry) -> np.ndarray:
    """All matrices of the scan, stacked as float32 with shape (np, 3, 4).

    Materialized once per scan; kernels never recompute them.
    """
    out = np.empty((geom.np, 3, 4), dtype=np.float32)
    for s in range(geom.np):
        out[s] = projection_matrix(geom, s).m
    return out


def apply_matrix(m: np.ndarray, i, j, k):
    """Evaluate a matrix at voxel indices, in the kernels' float32 order.

    Accepts scalars or broadcastable arrays; returns (u, v, z).
    """
    m = np.asarray(m, dtype=np.float32)
    fi = np.asarray(i, dtype=np.float32)
    fj = np.asarray(j, dtype=np.float32)
    fk = np.asarray(k, dtype=np.float32)
    z = m[2, 0] * fi + m[2, 1] * fj + m[2, 2] * fk + m[2, 3]
    f = np.float32(1.0) / z
    u = (m[0, 0] * fi + m[0, 1] * fj + m[0, 2] * fk + m[0, 3]) * f
    v = (m[1, 0] * fi + m[1, 1] * fj + m[1, 2] * fk + m[1, 3]) * f
    return u, v, z


def save_geometry(path, geom: ScanGeometry) -> None:
    """Write the geometry as a JSON document (field names as in ScanGeometry)."""
    doc = asdict(geom)
    doc["angles"] = list(geom.angles)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_geometry(path) -> ScanGeometry:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        doc["angles"] = tuple(float(a) for a in doc["angles"])
        return ScanGeometry(**doc)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid geometry document {path}: {exc}") from exc


def save_matrices(path, mats: np.ndarray) -> None:
    """Write matrices as 12 little-endian float32 values per projection, row-major."""
    mats = np.asarray(mats, dtype=np.float32)
    if mats.ndim != 3 or mats.shape[1:] != (3, 4):
        raise ValueError(f"expected (np, 3, 4) matrices, got {mats.shape}")
    mats.astype("<f4").tofile(path)


def load_matrices(path, n_proj: int) -> np.ndarray:
    flat = np.fromfile(path, dtype="<f4")
    if flat.size != n_proj * 12:
        raise ValueError(f"{path}: expected {n_proj * 12} floats, found {flat.size}")
    return flat.reshape(n_proj, 3, 4).astype(np.float32)
