"""Scalar and line-oriented interpolation primitives.

Everything is evaluated in float32 with truncation (round toward zero) for
the float->int coordinate conversion.  ``bilinear`` is the classic per-point
four-neighbour blend.  The sub-line pair (``build_subline`` /
``sample_subline``) splits the same computation into a vertical pass that
blends two adjacent constant-u detector columns into a buffer, and a
horizontal pass of single linear blends against that buffer; in exact
arithmetic the two routes agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "mix",
    "dot4",
    "bilinear",
    "SublineBuffer",
    "build_subline",
    "sample_subline",
]

_ONE = np.float32(1.0)


def mix(x, y, a) -> np.float32:
    """Linear blend x*(1-a) + y*a, evaluated exactly in that form."""
    x = np.float32(x)
    y = np.float32(y)
    a = np.float32(a)
    return x * (_ONE - a) + y * a


def dot4(v0, v1) -> np.float32:
    """Four-term inner product with an implicit homogeneous 1 in v1[3].

    Returns v0[0]*v1[0] + v0[1]*v1[1] + v0[2]*v1[2] + v0[3]; the fourth
    term is v0[3] alone, so callers must pass v1[3] == 1.
    """
    a = np.asarray(v0, dtype=np.float32)
    b = np.asarray(v1, dtype=np.float32)
    if a.shape != (4,) or b.shape != (4,):
        raise ValueError("dot4 takes two 4-vectors")
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3]


def bilinear(img: np.ndarray, x, y) -> np.float32:
    """Four-neighbour blend of a 2-D grid at fractional column x, row y.

    The anchor cell is (trunc(y), trunc(x)); it must satisfy
    trunc(x) in [0, cols-2] and trunc(y) in [0, rows-2] or a ValueError is
    raised.  Horizontal blends happen first, then one vertical blend.
    """
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError(f"bilinear expects a 2-D grid, got {img.ndim}-D")
    rows, cols = img.shape
    x = np.float32(x)
    y = np.float32(y)
    ix = int(x)
    iy = int(y)
    if not (0 <= x and ix <= cols - 2 and 0 <= y and iy <= rows - 2):
        raise ValueError(f"sample ({x}, {y}) outside the bilinear domain of {rows}x{cols}")
    ax = x - np.float32(ix)
    ay = y - np.float32(iy)
    s0 = mix(img[iy, ix], img[iy, ix + 1], ax)
    s1 = mix(img[iy + 1, ix], img[iy + 1, ix + 1], ax)
    return mix(s0, s1, ay)


@dataclass
class SublineBuffer:
    """One blended constant-u line of a transposed projection.

    ``values`` has the detector height nh; ``valid_dx`` records the blend
    fraction the buffer was built with.
    """

    values: np.ndarray
    valid_dx: np.float32


def build_subline(row0, row1, dx, out: SublineBuffer | None = None) -> SublineBuffer:
    """Blend two adjacent constant-u lines: out[m] = mix(row0[m], row1[m], dx).

    The loop body has no cross-iteration dependence, so the result is
    bitwise independent of any internal blocking.  dx must lie in [0, 1).
    """
    r0 = np.asarray(row0, dtype=np.float32)
    r1 = np.asarray(row1, dtype=np.float32)
    if r0.shape != r1.shape or r0.ndim != 1:
        raise ValueError(f"rows must be 1-D and equally long, got {r0.shape} and {r1.shape}")
    dx = np.float32(dx)
    if not (0.0 <= dx < 1.0):
        raise ValueError(f"blend fraction must be in [0, 1), got {dx}")
    if out is None:
        out = SublineBuffer(values=np.empty(r0.shape[0], dtype=np.float32), valid_dx=dx)
    elif out.values.shape != r0.shape:
        raise ValueError(f"output buffer length {out.values.shape[0]} != row length {r0.shape[0]}")
    # elementwise form of mix(); identical rounding to the scalar loop
    np.multiply(r0, _ONE - dx, out=out.values)
    out.values += r1 * dx
    out.valid_dx = dx
    return out


def sample_subline(buf: SublineBuffer, y) -> np.float32:
    """Linear blend of two neighbouring buffer entries at fractional row y."""
    y = np.float32(y)
    iy = int(y)
    n = buf.values.shape[0]
    if not (0 <= y and iy <= n - 2):
        raise ValueError(f"sample row {y} outside the buffer domain of length {n}")
    return mix(buf.values[iy], buf.values[iy + 1], y - np.float32(iy))
