"""Test-side oracles, independent of the code paths they check."""

import math

import numpy as np

from conebp.interp import bilinear, build_subline, sample_subline


def detector_coords_by_ray(geom, angle, wx, wy, wz):
    """First-principles (u, v): intersect the source->point ray with the
    detector plane built from explicit world-space positions."""
    c, sn = math.cos(angle), math.sin(angle)
    src = np.array([-geom.d * c, -geom.d * sn, 0.0])
    det0 = np.array([(geom.D - geom.d) * c, (geom.D - geom.d) * sn, 0.0])
    e_u = np.array([-sn, c, 0.0])
    e_v = np.array([0.0, 0.0, 1.0])
    normal = np.array([c, sn, 0.0])
    point = np.array([wx, wy, wz], dtype=np.float64)
    direction = point - src
    t = np.dot(det0 - src, normal) / np.dot(direction, normal)
    hit = src + t * direction
    u = (geom.nw - 1) / 2.0 + np.dot(hit - det0, e_u) / geom.pixel_pitch_u
    v = (geom.nh - 1) / 2.0 + np.dot(hit - det0, e_v) / geom.pixel_pitch_v
    return float(u), float(v)


def voxel_world(geom, i, j, k):
    s = geom.voxel_size
    return (
        (i - (geom.nx - 1) / 2.0) * s,
        (j - (geom.ny - 1) / 2.0) * s,
        (k - (geom.nz - 1) / 2.0) * s,
    )


def subline_vs_bilinear_max_rel_dev(n_grids=64, n_points=256, size=8, seed=1234):
    """Brute-force comparison of the two interpolation routes.

    Sub-line route: blend the two columns at trunc(x) of the grid, then one
    linear blend at y.  Returns the worst relative deviation from a direct
    bilinear evaluation over random grids and sample points.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_grids):
        grid = rng.random((size, size), dtype=np.float32)
        grid_t = np.ascontiguousarray(grid.T)  # rows become constant-u lines
        xs = rng.uniform(0.0, size - 1 - 1e-3, n_points).astype(np.float32)
        ys = rng.uniform(0.0, size - 1 - 1e-3, n_points).astype(np.float32)
        for x, y in zip(xs, ys):
            direct = bilinear(grid, x, y)
            ix = int(x)
            buf = build_subline(grid_t[ix], grid_t[ix + 1], x - np.float32(ix))
            two_pass = sample_subline(buf, y)
            denom = max(abs(float(direct)), 1e-12)
            worst = max(worst, abs(float(direct) - float(two_pass)) / denom)
    return worst


def numpy_baseline_backprojection(img, mats, vol):
    """Vectorized re-statement of the baseline kernel (same float32 op
    order per element), used as an independent oracle for it."""
    n_proj, nh, nw = img.shape
    nz, ny, nx = vol.shape
    one = np.float32(1.0)
    I = np.arange(nx, dtype=np.float32)[None, None, :]
    J = np.arange(ny, dtype=np.float32)[None, :, None]
    K = np.arange(nz, dtype=np.float32)[:, None, None]
    for s in range(n_proj):
        r0, r1, r2 = mats[s]
        z = r2[0] * I + r2[1] * J + r2[2] * K + r2[3]
        f = one / z
        x = (r0[0] * I + r0[1] * J + r0[2] * K + r0[3]) * f
        y = (r1[0] * I + r1[1] * J + r1[2] * K + r1[3]) * f
        mask = (x >= 0) & (x < nw - 1) & (y >= 0) & (y < nh - 1)
        ix = np.clip(x.astype(np.int64), 0, nw - 2)
        iy = np.clip(y.astype(np.int64), 0, nh - 2)
        ax = x - ix.astype(np.float32)
        ay = y - iy.astype(np.float32)
        plane = img[s]
        s0 = plane[iy, ix] * (one - ax) + plane[iy, ix + 1] * ax
        s1 = plane[iy + 1, ix] * (one - ax) + plane[iy + 1, ix + 1] * ax
        val = s0 * (one - ay) + s1 * ay
        w = f * f
        vol += np.where(mask, val * w, np.float32(0.0))
    return vol
