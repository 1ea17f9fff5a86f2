"""Compiled back-projection kernels.

One njit kernel per ladder variant.  All arithmetic is float32 with
truncation for coordinate conversion, and every kernel keeps a fixed
per-voxel accumulation order (ascending projection index), so outputs are
bitwise reproducible for any worker count, any chunking, and any batch
size.  Batched variants seed their register accumulator with the voxel's
current value (that read is the flush's read-modify-write read), which
keeps the per-voxel addition chain identical no matter how the projection
set is partitioned into batches.

Parallel decomposition: the baseline kernel parallelizes over z-slabs of
the natural volume; the optimized kernels parallelize over (i, j) columns
of the transposed volume.  Each voxel has exactly one writer.

Out-of-detector samples contribute nothing: a sample is taken only when
the bilinear anchor stays inside [0, nw-2] x [0, nh-2].  Because the u
coordinate of a voxel column is independent of k, a column whose u falls
outside skips the projection entirely, matching the per-voxel guard of the
baseline.
"""

import numpy as np
from numba import njit, prange

F32 = np.float32


@njit(cache=True, parallel=True)
def baseline(img, mats, vol):
    """img [np][nh][nw], vol [nz][ny][nx]; accumulates val/z**2 per voxel."""
    n_proj, nh, nw = img.shape
    nz, ny, nx = vol.shape
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    for s in range(n_proj):
        r0 = mats[s, 0]
        r1 = mats[s, 1]
        r2 = mats[s, 2]
        for k in prange(nz):
            fk = F32(k)
            for j in range(ny):
                fj = F32(j)
                for i in range(nx):
                    fi = F32(i)
                    z = r2[0] * fi + r2[1] * fj + r2[2] * fk + r2[3]
                    f = one / z
                    x = (r0[0] * fi + r0[1] * fj + r0[2] * fk + r0[3]) * f
                    y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * f
                    if x >= zero and x < umax and y >= zero and y < vmax:
                        ix = int(x)
                        iy = int(y)
                        ax = x - F32(ix)
                        ay = y - F32(iy)
                        s0 = img[s, iy, ix] * (one - ax) + img[s, iy, ix + 1] * ax
                        s1 = img[s, iy + 1, ix] * (one - ax) + img[s, iy + 1, ix + 1] * ax
                        val = s0 * (one - ay) + s1 * ay
                        w = f * f
                        vol[k, j, i] += val * w


@njit(cache=True, parallel=True)
def transpose(img, mats, vol, ij, nb):
    """Transposed layouts only: img [np][nw][nh], vol [nx][ny][nz]."""
    n_proj = img.shape[0]
    nh = img.shape[2]
    nw = img.shape[1]
    nz = vol.shape[2]
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    n_batches = n_proj // nb
    for c in prange(ij.shape[0]):
        i = ij[c, 0]
        j = ij[c, 1]
        fi = F32(i)
        fj = F32(j)
        for b in range(n_batches):
            s_base = b * nb
            for k in range(nz):
                fk = F32(k)
                # seed from the voxel so batch grouping cannot reassociate
                # the per-voxel addition chain; this is the flush's read
                acc = vol[i, j, k]
                for t in range(nb):
                    s = s_base + t
                    r0 = mats[s, 0]
                    r1 = mats[s, 1]
                    r2 = mats[s, 2]
                    z = r2[0] * fi + r2[1] * fj + r2[2] * fk + r2[3]
                    f = one / z
                    x = (r0[0] * fi + r0[1] * fj + r0[2] * fk + r0[3]) * f
                    y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * f
                    if x >= zero and x < umax and y >= zero and y < vmax:
                        iu = int(x)
                        iv = int(y)
                        au = x - F32(iu)
                        av = y - F32(iv)
                        s0 = img[s, iu, iv] * (one - av) + img[s, iu, iv + 1] * av
                        s1 = img[s, iu + 1, iv] * (one - av) + img[s, iu + 1, iv + 1] * av
                        val = s0 * (one - au) + s1 * au
                        acc += val * (f * f)
                vol[i, j, k] = acc


@njit(cache=True, parallel=True)
def share(img, mats, vol, ij, nb):
    """transpose + hoisting of the k-independent depth/weight/u terms."""
    n_proj = img.shape[0]
    nh = img.shape[2]
    nw = img.shape[1]
    nz = vol.shape[2]
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    n_batches = n_proj // nb
    for c in prange(ij.shape[0]):
        i = ij[c, 0]
        j = ij[c, 1]
        fi = F32(i)
        fj = F32(j)
        fk0 = F32(0.0)
        F = np.empty(nb, dtype=np.float32)
        W = np.empty(nb, dtype=np.float32)
        X = np.empty(nb, dtype=np.float32)
        ok = np.empty(nb, dtype=np.uint8)
        for b in range(n_batches):
            s_base = b * nb
            for t in range(nb):
                s = s_base + t
                r0 = mats[s, 0]
                r2 = mats[s, 2]
                F[t] = one / (r2[0] * fi + r2[1] * fj + r2[2] * fk0 + r2[3])
                W[t] = F[t] * F[t]
                X[t] = (r0[0] * fi + r0[1] * fj + r0[2] * fk0 + r0[3]) * F[t]
                ok[t] = 1 if (X[t] >= zero and X[t] < umax) else 0
            for k in range(nz):
                fk = F32(k)
                acc = vol[i, j, k]
                for t in range(nb):
                    if ok[t] != 0:
                        s = s_base + t
                        r1 = mats[s, 1]
                        y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                        if y >= zero and y < vmax:
                            x = X[t]
                            iu = int(x)
                            iv = int(y)
                            au = x - F32(iu)
                            av = y - F32(iv)
                            s0 = img[s, iu, iv] * (one - av) + img[s, iu, iv + 1] * av
                            s1 = img[s, iu + 1, iv] * (one - av) + img[s, iu + 1, iv + 1] * av
                            val = s0 * (one - au) + s1 * au
                            acc += val * W[t]
                vol[i, j, k] = acc


@njit(cache=True, parallel=True)
def symmetry(img, mats, vol, ij, nb):
    """share + mirrored detector row: one projection dot serves two voxels."""
    n_proj = img.shape[0]
    nh = img.shape[2]
    nw = img.shape[1]
    nz = vol.shape[2]
    nzh = nz // 2
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    vtop = F32(nh - 1)
    n_batches = n_proj // nb
    for c in prange(ij.shape[0]):
        i = ij[c, 0]
        j = ij[c, 1]
        fi = F32(i)
        fj = F32(j)
        fk0 = F32(0.0)
        F = np.empty(nb, dtype=np.float32)
        W = np.empty(nb, dtype=np.float32)
        X = np.empty(nb, dtype=np.float32)
        ok = np.empty(nb, dtype=np.uint8)
        for b in range(n_batches):
            s_base = b * nb
            for t in range(nb):
                s = s_base + t
                r0 = mats[s, 0]
                r2 = mats[s, 2]
                F[t] = one / (r2[0] * fi + r2[1] * fj + r2[2] * fk0 + r2[3])
                W[t] = F[t] * F[t]
                X[t] = (r0[0] * fi + r0[1] * fj + r0[2] * fk0 + r0[3]) * F[t]
                ok[t] = 1 if (X[t] >= zero and X[t] < umax) else 0
            for k in range(nzh):
                fk = F32(k)
                acc = vol[i, j, k]
                acc2 = vol[i, j, nz - 1 - k]
                for t in range(nb):
                    if ok[t] != 0:
                        s = s_base + t
                        r1 = mats[s, 1]
                        x = X[t]
                        iu = int(x)
                        au = x - F32(iu)
                        y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                        if y >= zero and y < vmax:
                            iv = int(y)
                            av = y - F32(iv)
                            s0 = img[s, iu, iv] * (one - av) + img[s, iu, iv + 1] * av
                            s1 = img[s, iu + 1, iv] * (one - av) + img[s, iu + 1, iv + 1] * av
                            acc += (s0 * (one - au) + s1 * au) * W[t]
                        y2 = vtop - y
                        if y2 >= zero and y2 < vmax:
                            iv = int(y2)
                            av = y2 - F32(iv)
                            s0 = img[s, iu, iv] * (one - av) + img[s, iu, iv + 1] * av
                            s1 = img[s, iu + 1, iv] * (one - av) + img[s, iu + 1, iv + 1] * av
                            acc2 += (s0 * (one - au) + s1 * au) * W[t]
                vol[i, j, k] = acc
                vol[i, j, nz - 1 - k] = acc2


@njit(cache=True, parallel=True)
def subline(img, mats, vol, ij, nb):
    """symmetry + sub-line buffers: blend two constant-u lines once per
    projection, then sample each voxel with a single linear blend."""
    n_proj = img.shape[0]
    nh = img.shape[2]
    nw = img.shape[1]
    nz = vol.shape[2]
    nzh = nz // 2
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    vtop = F32(nh - 1)
    n_batches = n_proj // nb
    for c in prange(ij.shape[0]):
        i = ij[c, 0]
        j = ij[c, 1]
        fi = F32(i)
        fj = F32(j)
        fk0 = F32(0.0)
        F = np.empty(nb, dtype=np.float32)
        W = np.empty(nb, dtype=np.float32)
        X = np.empty(nb, dtype=np.float32)
        ok = np.empty(nb, dtype=np.uint8)
        smem = np.empty((nb, nh), dtype=np.float32)
        for b in range(n_batches):
            s_base = b * nb
            for t in range(nb):
                s = s_base + t
                r0 = mats[s, 0]
                r2 = mats[s, 2]
                F[t] = one / (r2[0] * fi + r2[1] * fj + r2[2] * fk0 + r2[3])
                W[t] = F[t] * F[t]
                X[t] = (r0[0] * fi + r0[1] * fj + r0[2] * fk0 + r0[3]) * F[t]
                ok[t] = 1 if (X[t] >= zero and X[t] < umax) else 0
            for t in range(nb):
                if ok[t] != 0:
                    s = s_base + t
                    iu = int(X[t])
                    dx = X[t] - F32(iu)
                    a0 = one - dx
                    for m in range(nh):
                        smem[t, m] = img[s, iu, m] * a0 + img[s, iu + 1, m] * dx
            for k in range(nzh):
                fk = F32(k)
                acc = vol[i, j, k]
                acc2 = vol[i, j, nz - 1 - k]
                for t in range(nb):
                    if ok[t] != 0:
                        s = s_base + t
                        r1 = mats[s, 1]
                        y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                        if y >= zero and y < vmax:
                            iv = int(y)
                            av = y - F32(iv)
                            acc += (smem[t, iv] * (one - av) + smem[t, iv + 1] * av) * W[t]
                        y2 = vtop - y
                        if y2 >= zero and y2 < vmax:
                            iv = int(y2)
                            av = y2 - F32(iv)
                            acc2 += (smem[t, iv] * (one - av) + smem[t, iv + 1] * av) * W[t]
                vol[i, j, k] = acc
                vol[i, j, nz - 1 - k] = acc2


@njit(cache=True, parallel=True)
def subline_prefetch(img, mats, vol, ij, nb):
    """subline with dual buffers: the next projection's sub-line is built
    ahead of consuming the current one, so only two lines stay live."""
    n_proj = img.shape[0]
    nh = img.shape[2]
    nw = img.shape[1]
    nz = vol.shape[2]
    nzh = nz // 2
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    vtop = F32(nh - 1)
    n_batches = n_proj // nb
    for c in prange(ij.shape[0]):
        i = ij[c, 0]
        j = ij[c, 1]
        fi = F32(i)
        fj = F32(j)
        fk0 = F32(0.0)
        F = np.empty(nb, dtype=np.float32)
        W = np.empty(nb, dtype=np.float32)
        X = np.empty(nb, dtype=np.float32)
        ok = np.empty(nb, dtype=np.uint8)
        smem = np.empty((2, nh), dtype=np.float32)
        sums = np.empty(nzh, dtype=np.float32)
        sums2 = np.empty(nzh, dtype=np.float32)
        for b in range(n_batches):
            s_base = b * nb
            for t in range(nb):
                s = s_base + t
                r0 = mats[s, 0]
                r2 = mats[s, 2]
                F[t] = one / (r2[0] * fi + r2[1] * fj + r2[2] * fk0 + r2[3])
                W[t] = F[t] * F[t]
                X[t] = (r0[0] * fi + r0[1] * fj + r0[2] * fk0 + r0[3]) * F[t]
                ok[t] = 1 if (X[t] >= zero and X[t] < umax) else 0
            for k in range(nzh):
                # the flush's read: seeding keeps the per-voxel addition
                # chain identical for every batch size
                sums[k] = vol[i, j, k]
                sums2[k] = vol[i, j, nz - 1 - k]
            if ok[0] != 0:
                iu = int(X[0])
                dx = X[0] - F32(iu)
                a0 = one - dx
                for m in range(nh):
                    smem[0, m] = img[s_base, iu, m] * a0 + img[s_base, iu + 1, m] * dx
            for t in range(nb):
                if t + 1 < nb and ok[t + 1] != 0:
                    s = s_base + t + 1
                    iu = int(X[t + 1])
                    dx = X[t + 1] - F32(iu)
                    a0 = one - dx
                    cur = (t + 1) % 2
                    for m in range(nh):
                        smem[cur, m] = img[s, iu, m] * a0 + img[s, iu + 1, m] * dx
                if ok[t] != 0:
                    s = s_base + t
                    r1 = mats[s, 1]
                    Ft = F[t]
                    Wt = W[t]
                    cur = t % 2
                    for k in range(nzh):
                        fk = F32(k)
                        y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * Ft
                        if y >= zero and y < vmax:
                            iv = int(y)
                            av = y - F32(iv)
                            sums[k] += (smem[cur, iv] * (one - av) + smem[cur, iv + 1] * av) * Wt
                        y2 = vtop - y
                        if y2 >= zero and y2 < vmax:
                            iv = int(y2)
                            av = y2 - F32(iv)
                            sums2[k] += (smem[cur, iv] * (one - av) + smem[cur, iv + 1] * av) * Wt
            for k in range(nzh):
                vol[i, j, k] = sums[k]
                vol[i, j, nz - 1 - k] = sums2[k]
