"""Instrumented pure-Python back-projection, the slow twin of _kernels.

Each function mirrors one compiled kernel operation for operation (same
float32 arithmetic, same order, same guards) while tallying every inner
product, linear blend, projection word read, and volume word access.  The
outputs are expected to match the compiled kernels bit for bit, which makes
this module double as an independent oracle for them.  Intended for small
problems only; it runs thousands of times slower than the compiled path.

Counting conventions: a volume "+=" flush costs two words (read + write),
a direct bilinear sample reads four projection words, a sub-line build
reads two full constant-u lines.
"""

import numpy as np

F32 = np.float32

_COUNT_KEYS = ("dot_ops", "interp_ops", "vol_word_accesses", "proj_word_accesses", "subline_builds")


def _new_counts() -> dict:
    return {key: 0 for key in _COUNT_KEYS}


def ref_baseline(img: np.ndarray, mats: np.ndarray, vol: np.ndarray) -> dict:
    """Natural layouts: img [np][nh][nw], vol [nz][ny][nx]."""
    n_proj, nh, nw = img.shape
    nz, ny, nx = vol.shape
    counts = _new_counts()
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    for s in range(n_proj):
        r0 = mats[s, 0]
        r1 = mats[s, 1]
        r2 = mats[s, 2]
        for k in range(nz):
            fk = F32(k)
            for j in range(ny):
                fj = F32(j)
                for i in range(nx):
                    fi = F32(i)
                    z = r2[0] * fi + r2[1] * fj + r2[2] * fk + r2[3]
                    f = one / z
                    x = (r0[0] * fi + r0[1] * fj + r0[2] * fk + r0[3]) * f
                    y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * f
                    counts["dot_ops"] += 3
                    if x >= zero and x < umax and y >= zero and y < vmax:
                        ix = int(x)
                        iy = int(y)
                        ax = x - F32(ix)
                        ay = y - F32(iy)
                        s0 = img[s, iy, ix] * (one - ax) + img[s, iy, ix + 1] * ax
                        s1 = img[s, iy + 1, ix] * (one - ax) + img[s, iy + 1, ix + 1] * ax
                        val = s0 * (one - ay) + s1 * ay
                        counts["interp_ops"] += 3
                        counts["proj_word_accesses"] += 4
                        w = f * f
                        vol[k, j, i] += val * w
                        counts["vol_word_accesses"] += 2
    return counts


def _shared_terms(mats, s_base, nb, fi, fj, counts, umax):
    """Hoisted per-column terms: reciprocal depth, weight, u coordinate."""
    one = F32(1.0)
    zero = F32(0.0)
    fk0 = F32(0.0)
    F = []
    W = []
    X = []
    ok = []
    for t in range(nb):
        s = s_base + t
        r0 = mats[s, 0]
        r2 = mats[s, 2]
        ft = one / (r2[0] * fi + r2[1] * fj + r2[2] * fk0 + r2[3])
        wt = ft * ft
        xt = (r0[0] * fi + r0[1] * fj + r0[2] * fk0 + r0[3]) * ft
        counts["dot_ops"] += 2
        F.append(ft)
        W.append(wt)
        X.append(xt)
        ok.append(bool(xt >= zero and xt < umax))
    return F, W, X, ok


def _bilinear_t(img, s, x, y, counts):
    """Direct bilinear on a transposed image: the v-direction blends first."""
    one = F32(1.0)
    iu = int(x)
    iv = int(y)
    au = x - F32(iu)
    av = y - F32(iv)
    s0 = img[s, iu, iv] * (one - av) + img[s, iu, iv + 1] * av
    s1 = img[s, iu + 1, iv] * (one - av) + img[s, iu + 1, iv + 1] * av
    counts["interp_ops"] += 3
    counts["proj_word_accesses"] += 4
    return s0 * (one - au) + s1 * au


def _build_subline(img, s, xu, nh, counts):
    one = F32(1.0)
    iu = int(xu)
    dx = xu - F32(iu)
    a0 = one - dx
    line = np.empty(nh, dtype=np.float32)
    for m in range(nh):
        line[m] = img[s, iu, m] * a0 + img[s, iu + 1, m] * dx
    counts["interp_ops"] += nh
    counts["proj_word_accesses"] += 2 * nh
    counts["subline_builds"] += 1
    return line


def _sample_line(line, y, counts):
    one = F32(1.0)
    iv = int(y)
    av = y - F32(iv)
    counts["interp_ops"] += 1
    return line[iv] * (one - av) + line[iv + 1] * av


def ref_optimized(tag: str, img: np.ndarray, mats: np.ndarray, vol: np.ndarray, ij: np.ndarray, nb: int) -> dict:
    """Transposed layouts: img [np][nw][nh], vol [nx][ny][nz].

    ``tag`` selects the ladder rung: transpose, share, symmetry, subline,
    or subline_prefetch.
    """
    n_proj = img.shape[0]
    nw, nh = img.shape[1], img.shape[2]
    nz = vol.shape[2]
    counts = _new_counts()
    one = F32(1.0)
    zero = F32(0.0)
    umax = F32(nw - 1)
    vmax = F32(nh - 1)
    vtop = F32(nh - 1)
    n_batches = n_proj // nb

    if tag == "transpose":
        for c in range(ij.shape[0]):
            i, j = int(ij[c, 0]), int(ij[c, 1])
            fi = F32(i)
            fj = F32(j)
            for b in range(n_batches):
                s_base = b * nb
                for k in range(nz):
                    fk = F32(k)
                    acc = vol[i, j, k]  # the flush's read seeds the chain
                    for t in range(nb):
                        s = s_base + t
                        r0 = mats[s, 0]
                        r1 = mats[s, 1]
                        r2 = mats[s, 2]
                        z = r2[0] * fi + r2[1] * fj + r2[2] * fk + r2[3]
                        f = one / z
                        x = (r0[0] * fi + r0[1] * fj + r0[2] * fk + r0[3]) * f
                        y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * f
                        counts["dot_ops"] += 3
                        if x >= zero and x < umax and y >= zero and y < vmax:
                            acc += _bilinear_t(img, s, x, y, counts) * (f * f)
                    vol[i, j, k] = acc
                    counts["vol_word_accesses"] += 2
        return counts

    if tag == "share":
        for c in range(ij.shape[0]):
            i, j = int(ij[c, 0]), int(ij[c, 1])
            fi = F32(i)
            fj = F32(j)
            for b in range(n_batches):
                s_base = b * nb
                F, W, X, ok = _shared_terms(mats, s_base, nb, fi, fj, counts, umax)
                for k in range(nz):
                    fk = F32(k)
                    acc = vol[i, j, k]
                    for t in range(nb):
                        if ok[t]:
                            s = s_base + t
                            r1 = mats[s, 1]
                            y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                            counts["dot_ops"] += 1
                            if y >= zero and y < vmax:
                                acc += _bilinear_t(img, s, X[t], y, counts) * W[t]
                    vol[i, j, k] = acc
                    counts["vol_word_accesses"] += 2
        return counts

    if tag == "symmetry":
        nzh = nz // 2
        for c in range(ij.shape[0]):
            i, j = int(ij[c, 0]), int(ij[c, 1])
            fi = F32(i)
            fj = F32(j)
            for b in range(n_batches):
                s_base = b * nb
                F, W, X, ok = _shared_terms(mats, s_base, nb, fi, fj, counts, umax)
                for k in range(nzh):
                    fk = F32(k)
                    acc = vol[i, j, k]
                    acc2 = vol[i, j, nz - 1 - k]
                    for t in range(nb):
                        if ok[t]:
                            s = s_base + t
                            r1 = mats[s, 1]
                            y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                            counts["dot_ops"] += 1
                            if y >= zero and y < vmax:
                                acc += _bilinear_t(img, s, X[t], y, counts) * W[t]
                            y2 = vtop - y
                            if y2 >= zero and y2 < vmax:
                                acc2 += _bilinear_t(img, s, X[t], y2, counts) * W[t]
                    vol[i, j, k] = acc
                    vol[i, j, nz - 1 - k] = acc2
                    counts["vol_word_accesses"] += 4
        return counts

    if tag == "subline":
        nzh = nz // 2
        for c in range(ij.shape[0]):
            i, j = int(ij[c, 0]), int(ij[c, 1])
            fi = F32(i)
            fj = F32(j)
            for b in range(n_batches):
                s_base = b * nb
                F, W, X, ok = _shared_terms(mats, s_base, nb, fi, fj, counts, umax)
                lines = [None] * nb
                for t in range(nb):
                    if ok[t]:
                        lines[t] = _build_subline(img, s_base + t, X[t], nh, counts)
                for k in range(nzh):
                    fk = F32(k)
                    acc = vol[i, j, k]
                    acc2 = vol[i, j, nz - 1 - k]
                    for t in range(nb):
                        if ok[t]:
                            s = s_base + t
                            r1 = mats[s, 1]
                            y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                            counts["dot_ops"] += 1
                            if y >= zero and y < vmax:
                                acc += _sample_line(lines[t], y, counts) * W[t]
                            y2 = vtop - y
                            if y2 >= zero and y2 < vmax:
                                acc2 += _sample_line(lines[t], y2, counts) * W[t]
                    vol[i, j, k] = acc
                    vol[i, j, nz - 1 - k] = acc2
                    counts["vol_word_accesses"] += 4
        return counts

    if tag == "subline_prefetch":
        nzh = nz // 2
        for c in range(ij.shape[0]):
            i, j = int(ij[c, 0]), int(ij[c, 1])
            fi = F32(i)
            fj = F32(j)
            for b in range(n_batches):
                s_base = b * nb
                F, W, X, ok = _shared_terms(mats, s_base, nb, fi, fj, counts, umax)
                sums = [vol[i, j, k] for k in range(nzh)]
                sums2 = [vol[i, j, nz - 1 - k] for k in range(nzh)]
                smem = [None, None]
                if ok[0]:
                    smem[0] = _build_subline(img, s_base, X[0], nh, counts)
                for t in range(nb):
                    if t + 1 < nb and ok[t + 1]:
                        smem[(t + 1) % 2] = _build_subline(img, s_base + t + 1, X[t + 1], nh, counts)
                    if ok[t]:
                        s = s_base + t
                        r1 = mats[s, 1]
                        line = smem[t % 2]
                        for k in range(nzh):
                            fk = F32(k)
                            y = (r1[0] * fi + r1[1] * fj + r1[2] * fk + r1[3]) * F[t]
                            counts["dot_ops"] += 1
                            if y >= zero and y < vmax:
                                sums[k] += _sample_line(line, y, counts) * W[t]
                            y2 = vtop - y
                            if y2 >= zero and y2 < vmax:
                                sums2[k] += _sample_line(line, y2, counts) * W[t]
                for k in range(nzh):
                    vol[i, j, k] = sums[k]
                    vol[i, j, nz - 1 - k] = sums2[k]
                    counts["vol_word_accesses"] += 4
        return counts

    raise ValueError(f"unknown optimized kernel tag {tag!r}")
