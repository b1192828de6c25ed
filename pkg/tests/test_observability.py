"""Tests for observability constants, law fitting, and the proof pipeline."""

import json
import math

import numpy as np
import pytest

from uncplab import grids, observability as ob, spectral, thick


def _flat_setup():
    grid = grids.make_grid(1, 16.0, 1024)
    omega = thick.generate_set(grid, "periodic", gamma=0.5, a=1.0)
    thick.verify_thickness(omega, 2.0)
    return grid, omega, ob.FlatSource(grid)


def _poschl_teller_source(points=1024):
    grid = grids.make_grid(1, 16.0 * np.pi, points)
    problem = spectral.problem_preset(grid, "poschl-teller", depth=2.0)
    dec = spectral.decompose(spectral.assemble(problem))
    return grid, ob.SpectralSource(dec)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("UNCPLAB_THREADS", "3")
    assert ob.thread_count() == 3
    monkeypatch.setenv("UNCPLAB_THREADS", "0")
    with pytest.raises(ValueError):
        ob.thread_count()
    monkeypatch.delenv("UNCPLAB_THREADS")
    assert ob.thread_count() >= 1


def test_flat_source_basis_orthonormal():
    grid, _, src = _flat_setup()
    assert src.rank(2.0) == int(grids.band_mask(grid, 2.0).sum())
    mat, w = src.basis(2.0)
    assert w is None
    cell = grid.spacing
    gram = (mat.conj().T * cell) @ mat
    assert np.abs(gram - np.eye(mat.shape[1])).max() < 1e-10
    assert src.mu_effective(3.0) == 3.0
    assert src.multiplier_modulus(0.5, 3.0) == pytest.approx(math.exp(1.5), rel=1e-12)


def test_spectral_source_energy_scaling():
    _, src = _poschl_teller_source(512)
    dec = src.decomposition
    assert src.rank(1.0) == int((dec.eigenvalues < 1.0).sum())
    assert src.mu_effective(-0.5) == 0.0
    assert src.mu_effective(4.0) == 2.0
    assert src.multiplier_modulus(0.7, -2.0) == pytest.approx(1.0, abs=1e-12)
    assert src.multiplier_modulus(0.7, 4.0) == pytest.approx(math.exp(1.4), rel=1e-12)


def test_compressed_gram_matches_interval_closed_form():
    grid = grids.make_grid(1, 16.0, 1024)
    ks = np.array([-3, -2, -1, 0, 1, 2, 3])
    alpha, beta = 2.0, 6.0
    continuum = ob.plane_wave_interval_gram(ks, (alpha, beta), grid.length)
    x = grid.axis()
    omega = thick.ThickSet(grid, (x >= alpha) & (x < beta))
    mat = np.stack(
        [grids.plane_wave(grid, int(k)).values / np.sqrt(grid.length) for k in ks],
        axis=-1,
    )
    gram = ob.compressed_gram(mat, omega)
    assert np.abs(gram - continuum).max() < 0.1 * grid.spacing
    ev_cont = float(np.linalg.eigvalsh(continuum)[0])
    ev_grid = float(np.linalg.eigvalsh(gram)[0])
    assert abs(ev_cont - ev_grid) < 2e-3 * ev_cont


def test_plane_wave_interval_gram_validation():
    with pytest.raises(ValueError):
        ob.plane_wave_interval_gram([0, 1], (4.0, 2.0), 16.0)
    with pytest.raises(ValueError):
        ob.plane_wave_interval_gram([0, 1], (-1.0, 2.0), 16.0)


def test_compressed_gram_rejects_skewed_basis():
    grid, omega, _ = _flat_setup()
    mat = np.ones((grid.n_nodes, 2), dtype=np.complex128)
    with pytest.raises(ValueError):
        ob.compressed_gram(mat, omega)


def test_observability_constant_methods_agree():
    grid, omega, src = _flat_setup()
    for t in (2.0, 6.0, 12.0):
        c_svd = ob.observability_constant(src, t, omega, method="svd")
        c_gram = ob.observability_constant(src, t, omega, method="gram")
        assert abs(c_svd - c_gram) < 1e-12
        assert 0.0 < c_svd <= 1.0
    with pytest.raises(ValueError):
        ob.observability_constant(src, 2.0, omega, method="qr")


def test_observability_constant_full_box_is_one():
    grid = grids.make_grid(1, 16.0, 256)
    omega = thick.ThickSet(grid, np.ones(grid.shape, dtype=bool))
    src = ob.FlatSource(grid)
    for method in ("svd", "gram"):
        c = ob.observability_constant(src, 4.0, omega, method=method)
        assert c == pytest.approx(1.0, abs=1e-10)


def test_observability_constant_empty_range_rejected():
    grid, omega, src = _flat_setup()
    with pytest.raises(ValueError):
        ob.observability_constant(src, -1.0, omega)


def test_envelope_fit_dominates_points():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = np.sort(rng.random(12)) * 10.0
        y = 0.3 * x + rng.standard_normal(12)
        intercept, slope, residual = ob.envelope_fit(x, y)
        assert slope >= 0.0
        assert residual <= 1e-9
        assert np.all(y <= intercept + slope * x + 1e-9)
    with pytest.raises(ValueError):
        ob.envelope_fit(np.array([1.0, 2.0]), np.array([1.0, 2.0]))


def test_sweep_flat_frozen_values():
    _, omega, src = _flat_setup()
    thr = np.arange(2.0, 25.0, 2.0)
    curve = ob.sweep(src, omega, thr)
    assert curve.mode == "flat"
    assert curve.fit_a == pytest.approx(1.015510820663952, rel=1e-9)
    assert curve.fit_c == pytest.approx(0.2526880896870915, rel=1e-9)
    assert abs(curve.residual) < 1e-9
    assert float(curve.c_values.min()) == pytest.approx(
        1.4388813965539124e-05, rel=1e-9
    )
    assert np.all(np.diff(curve.c_values) <= 1e-12)
    log_inv = curve.log_inverse()
    fit = 2.0 * math.log(curve.fit_a) + 2.0 * curve.fit_c * curve.mu_effective
    assert np.all(log_inv <= fit + 1e-9)


def test_sweep_gram_matches_svd():
    _, omega, src = _flat_setup()
    thr = np.array([2.0, 6.0, 10.0])
    c_svd = ob.sweep(src, omega, thr, method="svd").c_values
    c_gram = ob.sweep(src, omega, thr, method="gram").c_values
    assert np.abs(c_svd - c_gram).max() < 1e-12


def test_sweep_rejections():
    _, omega, src = _flat_setup()
    with pytest.raises(ValueError):
        ob.sweep(src, omega, [2.0, 4.0])
    with pytest.raises(ValueError):
        ob.sweep(src, omega, [2.0, 2.0, 4.0])
    with pytest.raises(ValueError):
        ob.sweep(src, omega, [-3.0, -2.0, 2.0])


def test_curve_csv_roundtrip(tmp_path):
    _, omega, src = _flat_setup()
    thr = np.array([2.0, 4.0, 6.0])
    curve = ob.sweep(src, omega, thr)
    path = tmp_path / "sweep.csv"
    ob.write_curve_csv(path, curve, config_hash="cd" * 32)
    text = path.read_text().splitlines()
    assert text[0] == "# config_sha256=" + "cd" * 32
    assert text[1].startswith("mode,threshold,rank,")
    rows = ob.read_curve_csv(path)
    assert len(rows) == 3
    for i, row in enumerate(rows):
        assert row["mode"] == "flat"
        assert row["threshold"] == float(thr[i])
        assert row["c_min"] == float(curve.c_values[i])
        assert row["fit_A"] == curve.fit_a


def test_kovrijkine_bound_formula():
    got = ob.kovrijkine_bound(0.5, 1.0, 2.0, 3.0)
    assert got == pytest.approx((0.5 / 3.0) ** (3.0 * 3.0), rel=1e-12)
    with pytest.raises(ValueError):
        ob.kovrijkine_bound(0.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        ob.kovrijkine_bound(0.5, -1.0, 1.0, 2.0)


def test_fit_kovrijkine_constant_is_admissible_and_tight():
    _, omega, src = _flat_setup()
    curve = ob.sweep(src, omega, np.arange(2.0, 25.0, 2.0))
    gamma, a = 0.5, 1.0
    big_k = ob.fit_kovrijkine_constant(curve, gamma, a)
    assert big_k > gamma
    for c, mu in zip(curve.c_values, curve.thresholds):
        assert c >= ob.kovrijkine_bound(gamma, a, a * mu / math.pi, big_k)
    shade = gamma + 0.999 * (big_k - gamma)
    if shade < big_k * (1.0 - 1e-9):
        ok = all(
            c >= ob.kovrijkine_bound(gamma, a, a * mu / math.pi, shade)
            for c, mu in zip(curve.c_values, curve.thresholds)
        )
        assert not ok


def test_omega_hash_distinguishes_sets():
    grid = grids.make_grid(1, 16.0, 256)
    a = thick.generate_set(grid, "periodic", gamma=0.5, a=1.0)
    b = thick.generate_set(grid, "periodic", gamma=0.25, a=1.0)
    assert ob.omega_hash(a) == ob.omega_hash(a)
    assert ob.omega_hash(a) != ob.omega_hash(b)


def test_theorem_pipeline_flat_frozen():
    _, omega, src = _flat_setup()
    report = ob.theorem_pipeline(src, omega, mu=5.0, s0=0.3, branch="plus", seed=1)
    assert report.reconstruction_error <= 1e-10
    assert report.norm_bound_margin == pytest.approx(2.284409253500438, rel=1e-9)
    assert report.tube_bound_ratio == pytest.approx(0.24438187182484206, rel=1e-9)
    assert report.tube_bound_ratio <= 1.0
    assert report.final_inequality_margin == pytest.approx(4.053830034062881, rel=1e-9)
    assert report.fit_a == pytest.approx(1.393895053799646, rel=1e-9)
    again = ob.theorem_pipeline(src, omega, mu=5.0, s0=0.3, branch="plus", seed=1)
    assert again.to_json() == report.to_json()


def test_theorem_pipeline_spectral_branches_agree():
    grid, src = _poschl_teller_source()
    omega = thick.generate_set(grid, "periodic", gamma=0.5, a=2.0)
    thick.verify_thickness(omega, 4.0)
    plus = ob.theorem_pipeline(src, omega, mu=4.0, s0=0.3, branch="plus", seed=1)
    minus = ob.theorem_pipeline(src, omega, mu=4.0, s0=0.3, branch="minus", seed=1)
    assert plus.tube_bound_ratio is None
    assert plus.final_inequality_margin > 0.0
    assert plus.reconstruction_error <= 1e-10
    a, b = json.loads(plus.to_json()), json.loads(minus.to_json())
    for key in a:
        if key in ("branch", "reconstruction_error"):
            continue
        assert a[key] == b[key]
    assert b["reconstruction_error"] <= 1e-10


def test_theorem_pipeline_rejections():
    _, omega, src = _flat_setup()
    with pytest.raises(ValueError):
        ob.theorem_pipeline(src, omega, mu=5.0, s0=0.0)
    with pytest.raises(OverflowError):
        ob.theorem_pipeline(src, omega, mu=5.0, s0=200.0)


def test_pipeline_report_enforces_reconstruction():
    with pytest.raises(RuntimeError):
        ob.PipelineReport(
            mode="flat",
            mu=1.0,
            s0=0.1,
            branch="plus",
            seed=0,
            reconstruction_error=1e-6,
            norm_bound_margin=0.0,
            tube_bound_ratio=None,
            final_inequality_margin=0.0,
            fit_a=1.0,
            fit_c=0.0,
            geometry_hash="",
        )
