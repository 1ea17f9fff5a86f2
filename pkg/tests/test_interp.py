import numpy as np
import pytest

from conebp.interp import SublineBuffer, bilinear, build_subline, dot4, mix, sample_subline

from helpers import subline_vs_bilinear_max_rel_dev


def test_mix_endpoints_and_midpoint():
    assert mix(3.0, 7.0, 0.0) == np.float32(3.0)
    assert mix(3.0, 7.0, 1.0) == np.float32(7.0)
    assert mix(2.0, 4.0, 0.5) == np.float32(3.0)


def test_mix_affine_swap_property():
    rng = np.random.default_rng(11)
    for _ in range(500):
        x, y = rng.uniform(-10, 10, 2).astype(np.float32)
        a = np.float32(rng.uniform(0, 1))
        left = float(mix(x, y, a)) + float(mix(y, x, a))
        right = float(x) + float(y)
        assert left == pytest.approx(right, rel=1e-6, abs=1e-6)


def test_dot4_formula():
    assert dot4([1, 2, 3, 4], [1, 1, 1, 1]) == np.float32(10.0)
    assert dot4([0, 0, 0, 2.5], [9, 9, 9, 9]) == np.float32(2.5)
    assert dot4([1, 0, 0, 0], [3.25, 7, 8, 1]) == np.float32(3.25)
    with pytest.raises(ValueError):
        dot4([1, 2, 3], [1, 2, 3, 4])


def test_bilinear_integer_coordinates():
    rng = np.random.default_rng(12)
    grid = rng.random((5, 6), dtype=np.float32)
    for y in range(4):
        for x in range(5):
            assert bilinear(grid, x, y) == grid[y, x]


def test_bilinear_examples():
    grid = np.array([[0, 1], [2, 3]], dtype=np.float32)
    assert bilinear(grid, 0.5, 0.5) == np.float32(1.5)
    ramp = np.array([[0, 1], [0, 1]], dtype=np.float32)
    for y in (0.0, 0.25, 0.75):
        assert bilinear(ramp, 0.25, y) == np.float32(0.25)


def test_bilinear_out_of_bounds_strict():
    grid = np.zeros((4, 4), dtype=np.float32)
    for x, y in [(-0.5, 1.0), (3.0, 1.0), (1.0, 3.5), (1.0, -1.0)]:
        with pytest.raises(ValueError):
            bilinear(grid, x, y)


def test_build_subline_endpoints_and_blend():
    row0 = np.array([0.0, 2.0], dtype=np.float32)
    row1 = np.array([4.0, 6.0], dtype=np.float32)
    buf = build_subline(row0, row1, 0.0)
    assert buf.values.tobytes() == row0.tobytes()
    assert build_subline(row0, row1, 0.5).values.tolist() == [2.0, 4.0]
    with pytest.raises(ValueError):
        build_subline(row0, np.zeros(3, np.float32), 0.5)
    with pytest.raises(ValueError):
        build_subline(row0, row1, 1.0)


def test_build_subline_matches_scalar_loop_bitwise():
    rng = np.random.default_rng(13)
    row0 = rng.random(33, dtype=np.float32)
    row1 = rng.random(33, dtype=np.float32)
    dx = np.float32(0.37)
    buf = build_subline(row0, row1, dx)
    manual = np.array([mix(a, b, dx) for a, b in zip(row0, row1)], dtype=np.float32)
    assert buf.values.tobytes() == manual.tobytes()
    assert buf.valid_dx == dx


def test_build_subline_reuses_output_buffer():
    row0 = np.arange(8, dtype=np.float32)
    row1 = np.arange(8, dtype=np.float32) + 4
    out = SublineBuffer(values=np.zeros(8, dtype=np.float32), valid_dx=np.float32(0))
    result = build_subline(row0, row1, 0.25, out=out)
    assert result is out
    assert out.values[0] == np.float32(1.0)


def test_sample_subline():
    buf = SublineBuffer(values=np.array([1.0, 3.0], dtype=np.float32), valid_dx=np.float32(0))
    assert sample_subline(buf, 0.0) == np.float32(1.0)
    assert sample_subline(buf, 0.5) == np.float32(2.0)
    buf4 = SublineBuffer(values=np.arange(4, dtype=np.float32), valid_dx=np.float32(0))
    for y in range(3):
        assert sample_subline(buf4, y) == buf4.values[y]
    with pytest.raises(ValueError):
        sample_subline(buf, 1.5)
    with pytest.raises(ValueError):
        sample_subline(buf, -0.1)


def test_subline_route_matches_direct_bilinear():
    # brute-force oracle: 64 random 8x8 grids x 256 sample points each
    assert subline_vs_bilinear_max_rel_dev(64, 256, 8) <= 1e-6


def test_subline_route_within_4_ulps():
    rng = np.random.default_rng(14)
    grid = rng.random((8, 8), dtype=np.float32)
    grid_t = np.ascontiguousarray(grid.T)
    for _ in range(300):
        x = np.float32(rng.uniform(0, 6.999))
        y = np.float32(rng.uniform(0, 6.999))
        direct = bilinear(grid, x, y)
        ix = int(x)
        buf = build_subline(grid_t[ix], grid_t[ix + 1], x - np.float32(ix))
        two_pass = sample_subline(buf, y)
        ulps = abs(
            direct.view(np.int32).astype(np.int64) - two_pass.view(np.int32).astype(np.int64)
        )
        assert ulps <= 4
