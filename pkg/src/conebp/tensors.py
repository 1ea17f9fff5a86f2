"""Dense float32 containers for projections and volumes.

Both containers exist in two explicit layouts.  Natural order follows the
scanner convention (projections indexed [s][h][w], volume [z][y][x]);
transposed order ([s][w][h] and [x][y][z]) makes the innermost stride run
along the detector V axis / volume Z axis, which is what the optimized
kernels stream over.  Raw files are little-endian float32 with a JSON
sidecar naming the dimensions and layout.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Layout",
    "ProjectionStack",
    "Volume",
    "IJList",
    "transpose_projections",
    "transpose_volume",
    "make_ij_list",
    "save_projections",
    "load_projections",
    "save_volume",
    "load_volume",
]

# float32 element budget; keeps index arithmetic inside the platform's ssize_t
_MAX_ELEMENTS = sys.maxsize // 8


class Layout(str, Enum):
    NATURAL = "natural"
    TRANSPOSED = "transposed"


def _check_elements(*dims) -> None:
    n = 1
    for d in dims:
        if d < 1:
            raise ValueError(f"dimensions must be >= 1, got {dims}")
        n *= d
    if n > _MAX_ELEMENTS:
        raise ValueError(f"{dims} exceeds the addressable element budget")


def _as_f32(data: np.ndarray, shape: tuple, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.shape != shape:
        raise ValueError(f"{what}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass
class ProjectionStack:
    """np detector images; [s][h][w] when natural, [s][w][h] when transposed."""

    data: np.ndarray
    np: int
    nh: int
    nw: int
    layout: Layout = Layout.NATURAL

    def __post_init__(self):
        _check_elements(self.np, self.nh, self.nw)
        self.layout = Layout(self.layout)
        shape = (self.np, self.nh, self.nw) if self.layout is Layout.NATURAL else (self.np, self.nw, self.nh)
        self.data = _as_f32(self.data, shape, "projection stack")

    @classmethod
    def zeros(cls, np_: int, nh: int, nw: int, layout: Layout = Layout.NATURAL) -> "ProjectionStack":
        _check_elements(np_, nh, nw)
        shape = (np_, nh, nw) if Layout(layout) is Layout.NATURAL else (np_, nw, nh)
        return cls(np.zeros(shape, dtype=np.float32), np_, nh, nw, layout)

    @classmethod
    def from_array(cls, data: np.ndarray, layout: Layout = Layout.NATURAL) -> "ProjectionStack":
        data = np.asarray(data)
        if data.ndim != 3:
            raise ValueError(f"projection stack must be 3-D, got {data.ndim}-D")
        if Layout(layout) is Layout.NATURAL:
            np_, nh, nw = data.shape
        else:
            np_, nw, nh = data.shape
        return cls(data, np_, nh, nw, layout)


@dataclass
class Volume:
    """3-D reconstruction grid; [z][y][x] when natural, [x][y][z] when transposed."""

    data: np.ndarray
    nx: int
    ny: int
    nz: int
    layout: Layout = Layout.NATURAL

    def __post_init__(self):
        _check_elements(self.nx, self.ny, self.nz)
        self.layout = Layout(self.layout)
        shape = (self.nz, self.ny, self.nx) if self.layout is Layout.NATURAL else (self.nx, self.ny, self.nz)
        self.data = _as_f32(self.data, shape, "volume")

    @classmethod
    def zeros(cls, nx: int, ny: int, nz: int, layout: Layout = Layout.NATURAL) -> "Volume":
        _check_elements(nx, ny, nz)
        shape = (nz, ny, nx) if Layout(layout) is Layout.NATURAL else (nx, ny, nz)
        return cls(np.zeros(shape, dtype=np.float32), nx, ny, nz, layout)

    @classmethod
    def from_array(cls, data: np.ndarray, layout: Layout = Layout.NATURAL) -> "Volume":
        data = np.asarray(data)
        if data.ndim != 3:
            raise ValueError(f"volume must be 3-D, got {data.ndim}-D")
        if Layout(layout) is Layout.NATURAL:
            nz, ny, nx = data.shape
        else:
            nx, ny, nz = data.shape
        return cls(data, nx, ny, nz, layout)


@dataclass(frozen=True)
class IJList:
    """All (i, j) column indices of a volume in a fixed deterministic order."""

    pairs: np.ndarray
    nx: int
    ny: int


def transpose_projections(p: ProjectionStack) -> ProjectionStack:
    """Swap [s][h][w] <-> [s][w][h] into a fresh contiguous copy.

    An involution: applying it twice reproduces the input bit for bit.
    """
    if not isinstance(p, ProjectionStack):
        raise TypeError(f"expected a ProjectionStack, got {type(p).__name__}")
    other = Layout.TRANSPOSED if p.layout is Layout.NATURAL else Layout.NATURAL
    data = np.ascontiguousarray(p.data.transpose(0, 2, 1))
    return ProjectionStack(data, p.np, p.nh, p.nw, other)


def transpose_volume(v: Volume) -> Volume:
    """Swap [z][y][x] <-> [x][y][z] into a fresh contiguous copy.

    An involution: applying it twice reproduces the input bit for bit.
    """
    if not isinstance(v, Volume):
        raise TypeError(f"expected a Volume, got {type(v).__name__}")
    other = Layout.TRANSPOSED if v.layout is Layout.NATURAL else Layout.NATURAL
    data = np.ascontiguousarray(v.data.transpose(2, 1, 0))
    return Volume(data, v.nx, v.ny, v.nz, other)


def make_ij_list(nx: int, ny: int) -> IJList:
    """Enumerate (i, j) pairs with j outer and i inner.

    Consecutive entries share j, which keeps neighbouring column writes of
    the transposed volume close together.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"need nx, ny >= 1, got {nx}, {ny}")
    pairs = np.empty((nx * ny, 2), dtype=np.int64)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))  # j varies along rows
    pairs[:, 0] = ii.ravel()
    pairs[:, 1] = jj.ravel()
    pairs.setflags(write=False)
    return IJList(pairs=pairs, nx=nx, ny=ny)


def _sidecar_path(raw_path) -> Path:
    return Path(raw_path).with_suffix(".json")


def save_projections(raw_path, stack: ProjectionStack) -> None:
    """Write <path>.raw (little-endian float32) plus a JSON sidecar."""
    stack.data.astype("<f4").tofile(raw_path)
    meta = {"np": stack.np, "nh": stack.nh, "nw": stack.nw, "layout": stack.layout.value}
    with open(_sidecar_path(raw_path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_projections(raw_path) -> ProjectionStack:
    with open(_sidecar_path(raw_path)) as fh:
        meta = json.load(fh)
    np_, nh, nw = int(meta["np"]), int(meta["nh"]), int(meta["nw"])
    layout = Layout(meta["layout"])
    flat = np.fromfile(raw_path, dtype="<f4")
    if flat.size != np_ * nh * nw:
        raise ValueError(f"{raw_path}: expected {np_ * nh * nw} floats, found {flat.size}")
    shape = (np_, nh, nw) if layout is Layout.NATURAL else (np_, nw, nh)
    return ProjectionStack(flat.reshape(shape).astype(np.float32), np_, nh, nw, layout)


def save_volume(raw_path, vol: Volume) -> None:
    """Write <path>.raw (little-endian float32) plus a JSON sidecar."""
    vol.data.astype("<f4").tofile(raw_path)
    meta = {"nx": vol.nx, "ny": vol.ny, "nz": vol.nz, "layout": vol.layout.value}
    with open(_sidecar_path(raw_path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_volume(raw_path) -> Volume:
    with open(_sidecar_path(raw_path)) as fh:
        meta = json.load(fh)
    nx, ny, nz = int(meta["nx"]), int(meta["ny"]), int(meta["nz"])
    layout = Layout(meta["layout"])
    flat = np.fromfile(raw_path, dtype="<f4")
    if flat.size != nx * ny * nz:
        raise ValueError(f"{raw_path}: expected {nx * ny * nz} floats, found {flat.size}")
    shape = (nz, ny, nx) if layout is Layout.NATURAL else (nx, ny, nz)
    return Volume(flat.reshape(shape).astype(np.float32), nx, ny, nz, layout)
