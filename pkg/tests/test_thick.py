"""Thick sets: generation, exact thickness verification, serialization."""

from __future__ import annotations

import numpy as np
import pytest

from uncplab import grids, thick


def _grid1(points=256, length=16.0):
    return grids.make_grid(1, length, points)


def test_periodic_set_density_matches_gamma():
    g = _grid1()
    ts = thick.generate_set(g, "periodic", gamma=0.5, a=1.0)
    frac = ts.indicator.mean()
    assert abs(frac - 0.5) < 0.05


def test_periodic_set_rejects_bad_parameters():
    g = _grid1()
    with pytest.raises(ValueError):
        thick.generate_set(g, "periodic", gamma=1.5, a=1.0)
    with pytest.raises(ValueError):
        thick.generate_set(g, "periodic", gamma=0.5, a=100.0)
    with pytest.raises(ValueError):
        thick.generate_set(g, "unknown-mode")


def test_full_box_has_delta_one():
    g = _grid1(points=128)
    ts = thick.ThickSet(g, np.ones(g.shape, dtype=bool))
    delta = thick.verify_thickness(ts, radius=2.0)
    assert delta == 1.0
    assert ts.verified == (2.0, 1.0)


def test_verify_thickness_matches_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(10):
        g = _grid1(points=64, length=8.0)
        ts = thick.ThickSet(g, rng.random(g.shape) < rng.uniform(0.3, 0.9))
        r = rng.uniform(2.0 * g.spacing, 2.0)
        assert thick.verify_thickness(ts, r) == thick.brute_force_delta(ts, r)


def test_verify_thickness_2d_matches_brute_force():
    rng = np.random.default_rng(32)
    g = grids.make_grid(2, 8.0, 16)
    for _ in range(4):
        ts = thick.ThickSet(g, rng.random(g.shape) < 0.6)
        assert thick.verify_thickness(ts, 1.5) == thick.brute_force_delta(ts, 1.5)


def test_verify_thickness_rejects_tiny_radius():
    g = _grid1()
    ts = thick.ThickSet(g, np.ones(g.shape, dtype=bool))
    with pytest.raises(ValueError):
        thick.verify_thickness(ts, radius=0.5 * g.spacing)


def test_periodic_delta_close_to_gamma_at_large_radius():
    # over windows much longer than the period the density averages out
    g = _grid1(points=1024, length=16.0)
    ts = thick.generate_set(g, "periodic", gamma=0.5, a=1.0)
    delta = thick.verify_thickness(ts, radius=4.0)
    assert 0.4 <= delta <= 0.5 + 1e-12


def test_random_set_reaches_density_and_verifies():
    g = _grid1(points=512)
    ts = thick.generate_set(g, "random", density=0.4, seed=5, blob_radius=0.5)
    assert ts.indicator.mean() >= 0.4
    delta = thick.verify_thickness(ts, radius=4.0)
    assert 0.0 <= delta <= 1.0


def test_random_set_is_seed_deterministic():
    g = _grid1(points=256)
    a = thick.generate_set(g, "random", density=0.3, seed=9, blob_radius=0.4)
    b = thick.generate_set(g, "random", density=0.3, seed=9, blob_radius=0.4)
    c = thick.generate_set(g, "random", density=0.3, seed=10, blob_radius=0.4)
    assert np.array_equal(a.indicator, b.indicator)
    assert not np.array_equal(a.indicator, c.indicator)


def test_ball_offsets_shape_and_symmetry():
    g = _grid1(points=64, length=8.0)
    offs = thick.ball_offsets(g, 1.0)
    assert offs.ndim == 2 and offs.shape[1] == 1
    vals = np.sort(offs[:, 0])
    assert np.array_equal(vals, -vals[::-1])  # symmetric stencil
    assert np.all(np.abs(vals) * g.spacing <= 1.0 + 1e-12)


def test_thickset_csv_roundtrip(tmp_path):
    g = _grid1(points=128)
    ts = thick.generate_set(g, "periodic", gamma=0.25, a=2.0)
    thick.verify_thickness(ts, radius=2.0)
    p = tmp_path / "set.csv"
    thick.write_thickset_csv(p, ts, config_hash="cd" * 32)
    assert p.read_text().startswith("# config_sha256=")
    back = thick.read_thickset_csv(p)
    assert back.grid == g
    assert np.array_equal(back.indicator, ts.indicator)
    assert back.verified == ts.verified


def test_thickset_bitmask_roundtrip(tmp_path):
    rng = np.random.default_rng(33)
    for dim, points in ((1, 128), (2, 16)):
        g = grids.make_grid(dim, 8.0, points)
        ts = thick.ThickSet(g, rng.random(g.shape) < 0.5)
        thick.verify_thickness(ts, radius=1.0)
        p = tmp_path / f"set{dim}.bits"
        thick.write_thickset(p, ts)
        back = thick.read_thickset(p)
        assert back.grid == g
        assert np.array_equal(back.indicator, ts.indicator)
        assert back.verified == ts.verified
