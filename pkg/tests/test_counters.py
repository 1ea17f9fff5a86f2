import pytest

from conebp import (
    KernelVariant,
    Layout,
    Volume,
    backproject_baseline,
    backproject_optimized,
    count_ops,
    dot_reduction_ratio,
    asymptotic_dot_reduction_ratio,
)

ALL = list(KernelVariant)
OPTIMIZED = ALL[1:]


def test_baseline_dot_count_example():
    counters = count_ops(KernelVariant.BASELINE, 32, 32, 32, 8)
    assert counters.dot_ops == 3 * 8 * 32**3 == 786432
    assert counters.vol_word_accesses == 2 * 8 * 32**3
    assert counters.proj_word_accesses == 4 * 8 * 32**3
    assert counters.interp_ops == 3 * 8 * 32**3


def test_symmetry_dot_count_formula():
    for nz in (16, 64, 256):
        for variant in (KernelVariant.SYMMETRY, KernelVariant.SUBLINE, KernelVariant.SUBLINE_PREFETCH):
            counters = count_ops(variant, 10, 12, nz, 8, nb=8, nh=64)
            assert counters.dot_ops == 8 * 10 * 12 * (2 + nz // 2)
    assert count_ops(KernelVariant.SHARE, 10, 12, 16, 8).dot_ops == 8 * 10 * 12 * (2 + 16)
    assert count_ops(KernelVariant.TRANSPOSE, 10, 12, 16, 8).dot_ops == 3 * 8 * 10 * 12 * 16


def test_subline_volume_traffic_example():
    counters = count_ops(KernelVariant.SUBLINE, 32, 32, 32, 8, nb=4, nh=32)
    assert counters.vol_word_accesses == 2 * 32**3 * 8 // 4 == 131072


def test_volume_traffic_ratio_is_exactly_one_over_nb():
    # desk problem D1 dimensions
    nx = ny = nz = 64
    np_ = 128
    base = count_ops(KernelVariant.SUBLINE, nx, ny, nz, np_, nb=1, nh=64).vol_word_accesses
    for nb in (1, 2, 4, 8, 16, 32):
        words = count_ops(KernelVariant.SUBLINE, nx, ny, nz, np_, nb=nb, nh=64).vol_word_accesses
        assert words * nb == base  # ratio 1/nb with zero tolerance


def test_traffic_monotone_and_one_over_nb_shape():
    nx = ny = nz = 32
    np_ = 32
    updates = np_ * nx * ny * nz
    previous = None
    for nb in (1, 2, 4, 8, 16, 32):
        counters = count_ops(KernelVariant.SYMMETRY, nx, ny, nz, np_, nb=nb)
        total = counters.vol_word_accesses + counters.proj_word_accesses
        assert counters.proj_word_accesses == 4 * updates  # nb-independent
        assert (total - counters.proj_word_accesses) * nb == 2 * updates
        if previous is not None:
            assert counters.vol_word_accesses < previous
        previous = counters.vol_word_accesses


def test_dot_reduction_ratio_vs_asymptotic_formula():
    measured = dot_reduction_ratio(256)
    asymptotic = asymptotic_dot_reduction_ratio(256)
    assert measured == pytest.approx(1 - (2 + 128) / (3 * 256))
    assert asymptotic == pytest.approx((5 - 2 / 256) / 6)
    assert abs(measured - asymptotic) < 0.01
    assert asymptotic_dot_reduction_ratio(10**6) == pytest.approx(5 / 6, rel=1e-5)


def test_counting_mode_matches_closed_forms(tiny):
    nx = ny = nz = 12
    np_ = tiny.geom.np
    nh = tiny.geom.nh
    for variant in ALL:
        nb_values = (1,) if variant is KernelVariant.BASELINE else (1, 2, 4)
        for nb in nb_values:
            expected = count_ops(variant, nx, ny, nz, np_, nb=nb, nh=nh)
            if variant is KernelVariant.BASELINE:
                _, measured = backproject_baseline(tiny.proj, tiny.mats, Volume.zeros(nx, ny, nz), count=True)
            else:
                _, measured = backproject_optimized(
                    tiny.img_t, tiny.mats, Volume.zeros(nx, ny, nz, Layout.TRANSPOSED),
                    variant, batch=nb, count=True,
                )
            assert measured == expected, (variant.name, nb)


def test_count_ops_validation():
    with pytest.raises(ValueError, match="even nz"):
        count_ops(KernelVariant.SYMMETRY, 8, 8, 9, 4)
    with pytest.raises(ValueError, match="nb must divide np"):
        count_ops(KernelVariant.SUBLINE, 8, 8, 8, 10, nb=4, nh=16)
    with pytest.raises(ValueError, match="nh"):
        count_ops(KernelVariant.SUBLINE, 8, 8, 8, 8, nb=4)
    with pytest.raises(ValueError):
        count_ops(KernelVariant.BASELINE, 0, 8, 8, 8)
    with pytest.raises(ValueError):
        dot_reduction_ratio(9)
