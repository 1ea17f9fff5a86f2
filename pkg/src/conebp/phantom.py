"""Synthetic data generation and volume comparison.

An analytic ellipsoid phantom is rasterized onto the voxel grid, then a
simple ray-driven forward projector (trilinear sampling at half-voxel
steps, weighted by the step length) produces detector images from it.
Projections are test scaffolding for the back-projection kernels, not a
physics model; intensities are kept in [0, 1] so the RMSE comparisons stay
scale-meaningful.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .geometry import ScanGeometry, projection_matrices
from .tensors import Layout, ProjectionStack, Volume

__all__ = [
    "Ellipsoid",
    "EllipsoidPhantom",
    "default_phantom",
    "rasterize_phantom",
    "forward_project",
    "make_dataset",
    "rmse",
    "save_phantom",
    "load_phantom",
]


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid rotated about Z; world units and radians."""

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    intensity: float
    rotation: float = 0.0

    def __post_init__(self):
        if len(self.center) != 3 or len(self.semi_axes) != 3:
            raise ValueError("center and semi_axes must have three components")
        if min(self.semi_axes) <= 0:
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")

    @property
    def bounding_radius(self) -> float:
        return math.hypot(*self.center) + max(self.semi_axes)


@dataclass(frozen=True)
class EllipsoidPhantom:
    """A set of ellipsoids; voxel values sum the intensities containing them."""

    ellipsoids: tuple[Ellipsoid, ...]

    def check_fits(self, dims: tuple[int, int, int], voxel_size: float) -> None:
        """Every ellipsoid must fit inside the volume's inscribed sphere."""
        radius = 0.5 * min(dims) * voxel_size
        for e in self.ellipsoids:
            if e.bounding_radius > radius:
                raise ValueError(
                    f"ellipsoid at {e.center} (bounding radius {e.bounding_radius:.3f}) "
                    f"exceeds the inscribed sphere radius {radius:.3f}"
                )


def default_phantom(nx: int, ny: int, nz: int, voxel_size: float = 1.0) -> EllipsoidPhantom:
    """Nested off-center ellipsoids scaled to the volume; values stay in [0, 1].

    Deliberately asymmetric along Z so mirror-related kernel bugs cannot
    cancel out.
    """
    r = 0.5 * min(nx, ny, nz) * voxel_size
    return EllipsoidPhantom(
        ellipsoids=(
            Ellipsoid((0.0, 0.0, 0.0), (0.60 * r, 0.80 * r, 0.70 * r), 0.5, 0.35),
            Ellipsoid((-0.22 * r, -0.18 * r, -0.28 * r), (0.22 * r, 0.16 * r, 0.20 * r), 0.2, 0.6),
            Ellipsoid((0.26 * r, 0.22 * r, 0.17 * r), (0.12 * r, 0.17 * r, 0.11 * r), 0.3, -0.8),
            Ellipsoid((0.02 * r, -0.32 * r, 0.33 * r), (0.24 * r, 0.12 * r, 0.18 * r), 0.2, 2.1),
        )
    )


@njit(cache=True, parallel=True)
def _rasterize(centers, semi, cosr, sinr, intens, nx, ny, nz, s, out):
    ox = (nx - 1) / 2.0
    oy = (ny - 1) / 2.0
    oz = (nz - 1) / 2.0
    n_ell = centers.shape[0]
    for k in prange(nz):
        wz = (k - oz) * s
        for j in range(ny):
            wy = (j - oy) * s
            for i in range(nx):
                wx = (i - ox) * s
                value = 0.0
                for e in range(n_ell):
                    dx = wx - centers[e, 0]
                    dy = wy - centers[e, 1]
                    dz = wz - centers[e, 2]
                    # rotate into the ellipsoid frame (inverse Z rotation)
                    px = cosr[e] * dx + sinr[e] * dy
                    py = -sinr[e] * dx + cosr[e] * dy
                    q = (px / semi[e, 0]) ** 2 + (py / semi[e, 1]) ** 2 + (dz / semi[e, 2]) ** 2
                    if q <= 1.0:
                        value += intens[e]
                out[k, j, i] = value
    return out


def rasterize_phantom(ph: EllipsoidPhantom, dims: tuple[int, int, int], voxel_size: float = 1.0) -> Volume:
    """Voxel value = sum of intensities of ellipsoids containing the voxel center."""
    nx, ny, nz = (int(d) for d in dims)
    if min(nx, ny, nz) < 8:
        raise ValueError(f"phantom grids start at 8^3, got {nx}x{ny}x{nz}")
    ph.check_fits((nx, ny, nz), voxel_size)
    out = np.zeros((nz, ny, nx), dtype=np.float32)
    if ph.ellipsoids:
        centers = np.array([e.center for e in ph.ellipsoids], dtype=np.float64)
        semi = np.array([e.semi_axes for e in ph.ellipsoids], dtype=np.float64)
        cosr = np.array([math.cos(e.rotation) for e in ph.ellipsoids], dtype=np.float64)
        sinr = np.array([math.sin(e.rotation) for e in ph.ellipsoids], dtype=np.float64)
        intens = np.array([e.intensity for e in ph.ellipsoids], dtype=np.float64)
        _rasterize(centers, semi, cosr, sinr, intens, nx, ny, nz, float(voxel_size), out)
    return Volume(out, nx, ny, nz, Layout.NATURAL)


@njit(cache=True, parallel=True)
def _forward(vol, src, det0, eu, ev, pu, pv, cu, cv, s, out):
    n_proj, nh, nw = out.shape
    nz, ny, nx = vol.shape
    hx = (nx - 1) / 2.0 * s
    hy = (ny - 1) / 2.0 * s
    hz = (nz - 1) / 2.0 * s
    ox = (nx - 1) / 2.0
    oy = (ny - 1) / 2.0
    oz = (nz - 1) / 2.0
    step = 0.5 * s
    for flat in prange(n_proj * nh * nw):
        p = flat // (nh * nw)
        rem = flat % (nh * nw)
        iv = rem // nw
        iu = rem % nw
        # detector pixel center in world coordinates
        du = (iu - cu) * pu
        dv = (iv - cv) * pv
        px = det0[p, 0] + du * eu[p, 0] + dv * ev[p, 0]
        py = det0[p, 1] + du * eu[p, 1] + dv * ev[p, 1]
        pz = det0[p, 2] + du * eu[p, 2] + dv * ev[p, 2]
        dx = px - src[p, 0]
        dy = py - src[p, 1]
        dz = pz - src[p, 2]
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= norm
        dy /= norm
        dz /= norm
        # slab intersection with the voxel-center box
        t0 = 0.0
        t1 = norm
        if dx != 0.0:
            ta = (-hx - src[p, 0]) / dx
            tb = (hx - src[p, 0]) / dx
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
        elif src[p, 0] < -hx or src[p, 0] > hx:
            out[p, iv, iu] = 0.0
            continue
        if dy != 0.0:
            ta = (-hy - src[p, 1]) / dy
            tb = (hy - src[p, 1]) / dy
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
        elif src[p, 1] < -hy or src[p, 1] > hy:
            out[p, iv, iu] = 0.0
            continue
        if dz != 0.0:
            ta = (-hz - src[p, 2]) / dz
            tb = (hz - src[p, 2]) / dz
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
        elif src[p, 2] < -hz or src[p, 2] > hz:
            out[p, iv, iu] = 0.0
            continue
        if t1 <= t0:
            out[p, iv, iu] = 0.0
            continue
        total = 0.0
        n_steps = int(math.ceil((t1 - t0) / step))
        for q in range(n_steps):
            t = t0 + (q + 0.5) * step
            if t >= t1:
                break
            fx = (src[p, 0] + t * dx) / s + ox
            fy = (src[p, 1] + t * dy) / s + oy
            fz = (src[p, 2] + t * dz) / s + oz
            if fx < 0.0 or fx > nx - 1 or fy < 0.0 or fy > ny - 1 or fz < 0.0 or fz > nz - 1:
                continue
            ix = int(fx)
            iy = int(fy)
            iz = int(fz)
            if ix > nx - 2:
                ix = nx - 2
            if iy > ny - 2:
                iy = ny - 2
            if iz > nz - 2:
                iz = nz - 2
            ax = fx - ix
            ay = fy - iy
            az = fz - iz
            c00 = vol[iz, iy, ix] * (1.0 - ax) + vol[iz, iy, ix + 1] * ax
            c10 = vol[iz, iy + 1, ix] * (1.0 - ax) + vol[iz, iy + 1, ix + 1] * ax
            c01 = vol[iz + 1, iy, ix] * (1.0 - ax) + vol[iz + 1, iy, ix + 1] * ax
            c11 = vol[iz + 1, iy + 1, ix] * (1.0 - ax) + vol[iz + 1, iy + 1, ix + 1] * ax
            total += ((c00 * (1.0 - ay) + c10 * ay) * (1.0 - az) + (c01 * (1.0 - ay) + c11 * ay) * az) * step
        out[p, iv, iu] = total
    return out


def forward_project(vol: Volume, geom: ScanGeometry) -> ProjectionStack:
    """Line integrals from the source through every detector pixel center."""
    if vol.layout is not Layout.NATURAL:
        raise ValueError("forward_project expects a NATURAL volume")
    if (vol.nx, vol.ny, vol.nz) != (geom.nx, geom.ny, geom.nz):
        raise ValueError(
            f"volume {vol.nx}x{vol.ny}x{vol.nz} does not match geometry grid "
            f"{geom.nx}x{geom.ny}x{geom.nz}"
        )
    n_proj = geom.np
    src = np.empty((n_proj, 3), dtype=np.float64)
    det0 = np.empty((n_proj, 3), dtype=np.float64)
    eu = np.empty((n_proj, 3), dtype=np.float64)
    ev = np.empty((n_proj, 3), dtype=np.float64)
    for p, angle in enumerate(geom.angles):
        c, sn = math.cos(angle), math.sin(angle)
        src[p] = (-geom.d * c, -geom.d * sn, 0.0)
        det0[p] = ((geom.D - geom.d) * c, (geom.D - geom.d) * sn, 0.0)
        eu[p] = (-sn, c, 0.0)
        ev[p] = (0.0, 0.0, 1.0)
    cu, cv = geom.detector_center
    out = np.zeros((n_proj, geom.nh, geom.nw), dtype=np.float32)
    _forward(
        vol.data, src, det0, eu, ev,
        float(geom.pixel_pitch_u), float(geom.pixel_pitch_v),
        float(cu), float(cv), float(geom.voxel_size), out,
    )
    return ProjectionStack(out, n_proj, geom.nh, geom.nw, Layout.NATURAL)


def make_dataset(geom: ScanGeometry, phantom: EllipsoidPhantom | None = None):
    """Rasterize a phantom, forward project it, and normalize the projections.

    Returns (truth volume, projection stack scaled to peak 1.0, matrices).
    """
    if phantom is None:
        phantom = default_phantom(geom.nx, geom.ny, geom.nz, geom.voxel_size)
    truth = rasterize_phantom(phantom, (geom.nx, geom.ny, geom.nz), geom.voxel_size)
    proj = forward_project(truth, geom)
    peak = float(proj.data.max())
    if peak > 0:
        proj.data /= np.float32(peak)
    mats = projection_matrices(geom)
    return truth, proj, mats


def rmse(a, b) -> float:
    """Root mean square difference, accumulated in double precision."""
    if isinstance(a, (Volume, ProjectionStack)) or isinstance(b, (Volume, ProjectionStack)):
        if type(a) is not type(b):
            raise ValueError("rmse operands must be the same container type")
        if a.data.shape != b.data.shape or a.layout is not b.layout:
            raise ValueError(
                f"rmse operands must share dims and layout, got "
                f"{a.data.shape}/{a.layout.value} vs {b.data.shape}/{b.layout.value}"
            )
        a, b = a.data, b.data
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"rmse operands must share shape, got {a.shape} vs {b.shape}")
    diff = a - b
    return float(math.sqrt(np.mean(diff * diff)))


def save_phantom(path, ph: EllipsoidPhantom) -> None:
    doc = {
        "ellipsoids": [
            {
                "center": list(e.center),
                "semi_axes": list(e.semi_axes),
                "intensity": e.intensity,
                "rotation": e.rotation,
            }
            for e in ph.ellipsoids
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_phantom(path) -> EllipsoidPhantom:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        ells = tuple(
            Ellipsoid(
                center=tuple(float(c) for c in e["center"]),
                semi_axes=tuple(float(c) for c in e["semi_axes"]),
                intensity=float(e["intensity"]),
                rotation=float(e.get("rotation", 0.0)),
            )
            for e in doc["ellipsoids"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid phantom document {path}: {exc}") from exc
    return EllipsoidPhantom(ellipsoids=ells)
