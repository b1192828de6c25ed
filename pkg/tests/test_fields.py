"""Grids, fields, band projections, tube norms, and serialization."""

from __future__ import annotations

import numpy as np
import pytest

from uncplab import grids


def test_grid_geometry_basics():
    g = grids.Grid(dim=1, length=16.0, points=64)
    assert g.spacing == 0.25
    assert g.shape == (64,)
    assert g.n_nodes == 64
    x = g.axis()
    assert x[0] == 0.0 and abs(x[-1] - (16.0 - 0.25)) < 1e-14

    g2 = grids.Grid(dim=2, length=8.0, points=32)
    assert g2.shape == (32, 32)
    assert g2.n_nodes == 1024


def test_make_grid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        grids.make_grid(4, 1.0, 16)
    with pytest.raises(ValueError):
        grids.make_grid(1, -1.0, 16)
    with pytest.raises(ValueError):
        grids.make_grid(1, 1.0, 3)
    with pytest.raises(ValueError):
        grids.make_grid(1, 1.0, 24)  # not a power of two


def test_frequency_axis_symmetry():
    g = grids.Grid(dim=1, length=16.0, points=64)
    xi = g.frequency_axis()
    # integer multiples of 2 pi / L, fftfreq layout
    assert abs(xi[1] - 2.0 * np.pi / 16.0) < 1e-14
    assert abs(xi[-1] + 2.0 * np.pi / 16.0) < 1e-14
    norm = g.frequency_norm()
    assert norm.shape == (64,)
    assert norm[0] == 0.0


def test_parseval_identity():
    rng = np.random.default_rng(21)
    for dim, points in ((1, 128), (2, 32)):
        g = grids.Grid(dim=dim, length=7.0, points=points)
        f = grids.Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        c = grids.frequency_transform(f).values
        lhs = grids.norm(f) ** 2
        rhs = g.length**dim * float(np.sum(np.abs(c) ** 2))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, lhs)


def test_transform_roundtrip():
    rng = np.random.default_rng(22)
    g = grids.Grid(dim=2, length=5.0, points=24)
    f = grids.Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    back = grids.frequency_transform(grids.frequency_transform(f), direction="inverse")
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_plane_wave_is_single_coefficient():
    g = grids.Grid(dim=1, length=16.0, points=64)
    f = grids.plane_wave(g, 3)
    c = grids.frequency_transform(f).values
    assert abs(c[3] - 1.0) < 1e-12
    c[3] = 0.0
    assert np.max(np.abs(c)) < 1e-12


def test_band_mask_and_tail_mass():
    g = grids.Grid(dim=1, length=16.0, points=128)
    f = grids.plane_wave(g, 5)  # frequency 5 * 2 pi / 16 ~ 1.963
    xi = 5 * 2.0 * np.pi / 16.0
    assert grids.band_tail_mass(f, xi + 0.01) < 1e-30
    assert grids.band_tail_mass(f, xi - 0.01) > 0.99


def test_random_band_limited_respects_band():
    rng = np.random.default_rng(23)
    g = grids.Grid(dim=1, length=16.0, points=256)
    for _ in range(10):
        mu = rng.uniform(1.0, 10.0)
        f = grids.random_band_limited(g, mu, rng)
        assert grids.band_tail_mass(f, mu) < 1e-14
        assert grids.norm(f) > 0.0


def test_tube_slice_norm_single_mode_exact():
    g = grids.Grid(dim=1, length=16.0, points=256)
    k = 4
    xi = k * 2.0 * np.pi / 16.0
    f = grids.plane_wave(g, k)
    nf = grids.norm(f)
    for y in (0.1, -0.25, 0.4):
        got = grids.tube_slice_norm(f, y, mu_freq=xi)
        want = np.exp(-xi * y) * nf
        assert abs(got - want) < 1e-10 * max(1.0, want)


def test_tube_slice_norm_respects_band_bound():
    rng = np.random.default_rng(24)
    g = grids.Grid(dim=1, length=16.0, points=512)
    for _ in range(20):
        mu = rng.uniform(0.5, 8.0)
        f = grids.random_band_limited(g, mu, rng)
        y = rng.uniform(-0.4, 0.4)
        bound = np.exp(mu * abs(y)) * grids.norm(f)
        assert grids.tube_slice_norm(f, y, mu) <= bound + 1e-9


def test_tube_slice_norm_rejects_out_of_band_fields():
    g = grids.Grid(dim=1, length=16.0, points=128)
    f = grids.plane_wave(g, 20)
    with pytest.raises(grids.BandLimitError):
        grids.tube_slice_norm(f, 0.1, mu_freq=1.0)


def test_tube_integral_positive_and_monotone_in_width():
    rng = np.random.default_rng(25)
    g = grids.Grid(dim=1, length=16.0, points=256)
    f = grids.random_band_limited(g, 5.0, rng)
    v_small = grids.tube_integral(f, grids.TubeGeometry(half_width=0.1), 5.0)
    v_large = grids.tube_integral(f, grids.TubeGeometry(half_width=0.3), 5.0)
    assert 0.0 < v_small < v_large


def test_tube_integral_constant_field_exact():
    g = grids.Grid(dim=1, length=16.0, points=128)
    f = grids.Field(g, np.ones(g.shape, dtype=np.complex128))
    a = 0.25
    got = grids.tube_integral(f, grids.TubeGeometry(half_width=a), mu_freq=1.0)
    # constant continuation: integral = 2 a ||f||^2
    assert abs(got - 2.0 * a * grids.norm(f) ** 2) < 1e-10


def test_field_arithmetic_and_mismatch_guard():
    g = grids.Grid(dim=1, length=4.0, points=16)
    h = grids.Grid(dim=1, length=4.0, points=32)
    rng = np.random.default_rng(26)
    f1 = grids.Field(g, rng.standard_normal(16) + 0j)
    f2 = grids.Field(g, rng.standard_normal(16) + 0j)
    s = f1 + f2
    assert np.allclose(s.values, f1.values + f2.values)
    d = f1 - f2
    assert np.allclose(d.values, f1.values - f2.values)
    f3 = grids.Field(h, np.zeros(32, dtype=np.complex128))
    with pytest.raises(grids.GridMismatchError):
        _ = f1 + f3


def test_weighted_norm_and_inner_product():
    rng = np.random.default_rng(27)
    g = grids.Grid(dim=1, length=4.0, points=64)
    w = 1.0 + 0.5 * np.cos(2.0 * np.pi * g.axis() / 4.0)
    f = grids.Field(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    n2 = grids.norm(f, w) ** 2
    ip = grids.weighted_inner_product(f, f, w)
    assert abs(ip.real - n2) < 1e-12 * n2
    assert abs(ip.imag) < 1e-12 * n2


def test_field_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(28)
    for dim, points in ((1, 32), (2, 16)):
        g = grids.Grid(dim=dim, length=3.0, points=points)
        f = grids.Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
        p = tmp_path / f"f{dim}.field"
        grids.write_field(p, f)
        back = grids.read_field(p)
        assert back.grid == g
        assert np.array_equal(back.values, f.values)


def test_field_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(29)
    g = grids.Grid(dim=1, length=3.0, points=32)
    f = grids.Field(g, rng.standard_normal(32) + 1j * rng.standard_normal(32))
    p = tmp_path / "f.csv"
    grids.write_field_csv(p, f, config_hash="ab" * 32)
    text = p.read_text()
    assert text.startswith("# config_sha256=")
    back = grids.read_field_csv(p, g)
    assert np.max(np.abs(back.values - f.values)) == 0.0


def test_field_csv_rejects_2d():
    g = grids.Grid(dim=2, length=3.0, points=8)
    f = grids.Field(g, np.zeros(g.shape, dtype=np.complex128))
    with pytest.raises(ValueError):
        grids.write_field_csv("/tmp/never.csv", f)


def test_gauss_offsets_integrate_polynomials():
    nodes, weights = grids.gauss_offsets(0.5, 12)
    assert np.all(np.abs(nodes) < 0.5)
    # exact for low-degree polynomials over (-a, a)
    assert abs(float(weights.sum()) - 1.0) < 1e-13
    assert abs(float((nodes**2) @ weights) - 0.5**2 / 3.0 * 1.0 / (1.0)) < 1e-13
