"""Command-line experiment runner.

Subcommands (project, observe, carleman, interp, pipeline, thickness) read a
config file, dispatch to the library modules, and write deterministic CSV and
JSON artifacts into the output directory.  Every text artifact embeds the
sha256 of the config text; binary artifacts carry its first 12 hex digits in
their file name.  Exit status: 0 when every invariant checked passes, 1 on a
numerical failure (the failing invariant is named on stderr), 2 on a rejected
config (diagnostic is file:line anchored).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from uncplab import carleman, config, grids, interpolation, observability, spectral, thick

_NUMERICAL_ERRORS = (
    ValueError,
    RuntimeError,
    OverflowError,
    FloatingPointError,
    ZeroDivisionError,
    np.linalg.LinAlgError,
)


def _log(verbose: bool, message: str) -> None:
    if verbose:
        print(message)


def _build_grid(cfg: config.ExperimentConfig) -> grids.Grid:
    return grids.make_grid(cfg.grid_dim, cfg.grid_length, cfg.grid_points)


def _build_set(cfg: config.ExperimentConfig, grid: grids.Grid) -> thick.ThickSet:
    if cfg.set_mode == "full":
        ts = thick.ThickSet(grid, np.ones(grid.shape, dtype=bool))
    else:
        ts = thick.generate_set(grid, cfg.set_mode, **cfg.set_params)
    thick.verify_thickness(ts, cfg.verify_radius)
    return ts


def _build_source(cfg: config.ExperimentConfig, grid: grids.Grid, verbose: bool):
    if cfg.problem == "flat":
        return observability.FlatSource(grid)
    _log(verbose, f"decomposing {cfg.problem} operator on {grid.points}^{grid.dim} nodes")
    problem = spectral.problem_preset(grid, cfg.problem, **cfg.problem_params)
    return observability.SpectralSource(spectral.decompose(spectral.Operator(problem)))


def _random_field(grid: grids.Grid, seed: int) -> grids.Field:
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return grids.Field(grid, vals)


# ---------------------------------------------------------------------------
# experiment runners: each returns (checks, values, artifact names)


def _run_project(cfg, out: Path, verbose: bool):
    grid = _build_grid(cfg)
    source = _build_source(cfg, grid, verbose)
    weight = None if cfg.problem == "flat" else source.decomposition.weight_values
    if cfg.problem == "flat":
        apply_p = lambda g: spectral.flat_project(grid, cfg.mu, g)
    else:
        apply_p = lambda g: spectral.project(source.decomposition, cfg.mu, g)

    f = _random_field(grid, cfg.seed)
    g = _random_field(grid, cfg.seed + 1)
    pf = apply_p(f)
    ppf = apply_p(pf)
    pg = apply_p(g)
    nf = grids.norm(f, weight)
    tol = cfg.tolerance("projector", 1e-10)
    sym_gap = abs(
        grids.weighted_inner_product(pf, g, weight)
        - grids.weighted_inner_product(f, pg, weight)
    )
    checks = {
        "idempotent": grids.norm(ppf - pf, weight) <= tol * nf,
        "self_adjoint": sym_gap <= tol * nf * grids.norm(g, weight),
        "contraction": grids.norm(pf, weight) <= nf * (1.0 + 1e-12),
    }
    values = {
        "threshold": cfg.mu,
        "rank": int(source.rank(cfg.mu)),
        "input_norm": nf,
        "projected_norm": grids.norm(pf, weight),
    }
    artifacts = []
    if grid.dim == 1:
        name = "projected.csv"
        grids.write_field_csv(out / name, pf, config_hash=cfg.sha256)
    else:
        name = f"projected_{cfg.sha256[:12]}.field"
        grids.write_field(out / name, pf)
    artifacts.append(name)
    if cfg.problem != "flat":
        spectral.write_eigenvalues_csv(
            out / "eigenvalues.csv", source.decomposition, config_hash=cfg.sha256
        )
        artifacts.append("eigenvalues.csv")
    return checks, values, artifacts


def _run_observe(cfg, out: Path, verbose: bool):
    grid = _build_grid(cfg)
    omega = _build_set(cfg, grid)
    source = _build_source(cfg, grid, verbose)
    _log(verbose, f"sweeping {len(cfg.thresholds)} thresholds with method={cfg.method}")
    curve = observability.sweep(source, omega, cfg.thresholds, method=cfg.method)
    observability.write_curve_csv(out / "sweep.csv", curve, config_hash=cfg.sha256)
    c = np.asarray(curve.c_values)
    checks = {
        "c_positive": bool(np.all(c > 0.0)),
        "c_monotone": bool(np.all(np.diff(c) <= 1e-12)),
        "envelope_dominates": curve.residual <= cfg.tolerance("envelope", 1e-6),
        "fit_finite": bool(np.isfinite([curve.fit_a, curve.fit_c]).all()),
    }
    values = {
        "fit_A": curve.fit_a,
        "fit_C": curve.fit_c,
        "residual": curve.residual,
        "delta": omega.verified[1],
        "c_min": float(c.min()),
    }
    return checks, values, ["sweep.csv"]


def _standard_geometry() -> carleman.CarlemanGeometry:
    """Disk domain over the unit segment: X = D(1/2, 3/2), Y = D(1/2, 5/4), K = [0, 1]."""
    return carleman.CarlemanGeometry(
        domain_radius=1.5,
        inner=carleman.DiskRegion(0.5 + 0j, 1.25),
        support=((0j, 1.0 + 0j),),
        measure=carleman.SegmentMeasure(np.array([0j]), np.array([1.0 + 0j])),
        domain_center=0.5 + 0j,
    )


def _run_carleman(cfg, out: Path, verbose: bool):
    _log(verbose, f"building weight at {cfg.quad_points} quadrature points")
    geom = _standard_geometry()
    weight = carleman.carleman_weight(geom, cfg.quad_points)
    c = weight.constants
    checks = {
        "constants_ordered": c.potential_sup >= c.green_inf * (1.0 - 1e-9),
        "exponent_range": 0.0 < c.exponent <= 1.0 / 3.0 + 1e-12,
        "mix_bound": 2.0 * c.mix_ratio * c.region_potential_sup <= c.green_inf * (1.0 + 1e-12),
    }
    rows = []
    if cfg.variant == "dbar":
        bump = carleman.smooth_bump(center=0.5 + 0j, radius=1.3)
        family = [
            ("bump", lambda z: bump(z)),
            ("bump_zbar", lambda z: bump(z) * np.conj(z - 0.5)),
        ]
        for label, f in family:
            result = carleman.carleman_inequality_check(
                f,
                phi=lambda z: 0.5 * np.abs(z) ** 2,
                laplacian_phi=carleman.LaplacianMeasure(density=lambda z: 2.0 * np.ones(z.shape)),
                h_values=cfg.h_values,
                domain=carleman.DiskRegion(0.5 + 0j, 1.5),
                resolution=cfg.resolution,
                tol=cfg.carleman_tol,
                variant="dbar",
            )
            checks[f"inequality_{label}"] = result.passed
            for h, lhs, rhs, margin in zip(result.h_values, result.lhs, result.rhs, result.margins):
                rows.append(("dbar/" + label, h, lhs, rhs, margin))
    else:
        family = [
            ("const", lambda z: np.ones(np.shape(z), dtype=np.complex128)),
            ("linear", lambda z: z - 0.5),
            ("exp", lambda z: np.exp(z - 0.5)),
        ]
        for label, g in family:
            result = carleman.carleman_inequality_check(
                g,
                phi=None,
                laplacian_phi=None,
                h_values=cfg.h_values,
                resolution=cfg.resolution,
                tol=cfg.carleman_tol,
                variant="three-term",
                weight=weight,
            )
            checks[f"inequality_{label}"] = result.passed
            for h, lhs, rhs, margin in zip(result.h_values, result.lhs, result.rhs, result.margins):
                rows.append(("three-term/" + label, h, lhs, rhs, margin))

    lines = [f"# config_sha256={cfg.sha256}", "variant,h,lhs,rhs,margin"]
    for variant, h, lhs, rhs, margin in rows:
        lines.append(
            ",".join([variant, repr(float(h)), repr(float(lhs)), repr(float(rhs)), repr(float(margin))])
        )
    (out / "carleman.csv").write_text("\n".join(lines) + "\n")
    values = {
        "potential_sup": c.potential_sup,
        "green_inf": c.green_inf,
        "region_potential_sup": c.region_potential_sup,
        "mix_ratio": c.mix_ratio,
        "exponent": c.exponent,
        "cutoff_radius": weight.cutoff_radius,
    }
    return checks, values, ["carleman.csv"]


def _run_interp(cfg, out: Path, verbose: bool):
    certs = []
    if cfg.interp_kind == "segment":
        family = interpolation.polynomial_family(seed=cfg.seed or 7)
        for intervals in interpolation.CALIBRATION_SETS:
            for g in family:
                certs.append(interpolation.interpolate_1d(g, intervals))
    elif cfg.interp_kind == "ball":
        family = interpolation.polynomial_family(seed=cfg.seed or 7)
        half = lambda x: np.real(x) <= 0.0
        for g in family:
            certs.append(interpolation.interpolate_ball(g, half, radius=1.0))
    else:
        grid = _build_grid(cfg)
        omega = _build_set(cfg, grid)
        rng = np.random.default_rng(cfg.seed)
        tube = grids.TubeGeometry(half_width=0.4)
        for _ in range(8):
            f = grids.random_band_limited(grid, cfg.mu, rng)
            certs.append(interpolation.interpolate_tube(f, omega, tube, mu_freq=cfg.mu))
    _log(verbose, f"checked {len(certs)} {cfg.interp_kind} certificates")

    lines = [f"# config_sha256={cfg.sha256}", "kind,exponent,constant,lhs,rhs,passed"]
    for cert in certs:
        lines.append(
            ",".join(
                [
                    cert.kind,
                    repr(float(cert.exponent)),
                    repr(float(cert.constant)),
                    repr(float(cert.lhs)),
                    repr(float(cert.rhs)),
                    str(int(cert.passed)),
                ]
            )
        )
    (out / "certificates.csv").write_text("\n".join(lines) + "\n")
    checks = {"all_certificates_pass": all(c.passed for c in certs)}
    values = {"count": len(certs), "kind": cfg.interp_kind}
    return checks, values, ["certificates.csv"]


def _run_pipeline(cfg, out: Path, verbose: bool):
    grid = _build_grid(cfg)
    omega = _build_set(cfg, grid)
    source = _build_source(cfg, grid, verbose)
    report = observability.theorem_pipeline(
        source, omega, mu=cfg.mu, s0=cfg.s0, branch=cfg.branch, seed=cfg.seed
    )
    payload = json.loads(report.to_json())
    payload["config_sha256"] = cfg.sha256
    (out / "pipeline.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    checks = {
        "reconstruction": report.reconstruction_error <= cfg.tolerance("recon", 1e-10),
        "norm_bound": report.norm_bound_margin >= 0.0,
        "final_margin": report.final_inequality_margin >= 0.0,
    }
    if report.tube_bound_ratio is not None:
        checks["tube_bound"] = report.tube_bound_ratio <= 1.0
    values = {
        "reconstruction_error": report.reconstruction_error,
        "norm_bound_margin": report.norm_bound_margin,
        "tube_bound_ratio": report.tube_bound_ratio,
        "final_inequality_margin": report.final_inequality_margin,
        "fit_A": report.fit_a,
        "fit_C": report.fit_c,
    }
    return checks, values, ["pipeline.json"]


def _run_thickness(cfg, out: Path, verbose: bool):
    grid = _build_grid(cfg)
    ts = _build_set(cfg, grid)
    radius, delta = ts.verified
    artifacts = []
    if grid.dim == 1:
        name = "thickset.csv"
        thick.write_thickset_csv(out / name, ts, config_hash=cfg.sha256)
    else:
        name = f"thickset_{cfg.sha256[:12]}.bits"
        thick.write_thickset(out / name, ts)
    artifacts.append(name)
    checks = {
        "delta_positive": delta > 0.0,
        "delta_at_most_one": delta <= 1.0 + 1e-12,
    }
    if cfg.set_mode == "full":
        checks["full_box_delta_one"] = delta == 1.0
    values = {
        "radius": radius,
        "delta": delta,
        "fraction": float(ts.indicator.mean()),
    }
    return checks, values, artifacts


_RUNNERS = {
    "project": _run_project,
    "observe": _run_observe,
    "carleman": _run_carleman,
    "interp": _run_interp,
    "pipeline": _run_pipeline,
    "thickness": _run_thickness,
}


def _write_summary(out: Path, cfg, checks: dict, values: dict, artifacts: list, error=None) -> None:
    summary = {
        "experiment": cfg.experiment,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "checks": checks,
        "values": values,
        "artifacts": artifacts,
        "passed": bool(checks) and all(checks.values()),
    }
    if error is not None:
        summary["error"] = error
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uncplab",
        description="Spectral-inequality laboratory experiment runner.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to the INI config file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--verbose", action="store_true", help="report progress on stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config.parse_config(args.config, experiment=args.experiment)
    except config.ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    runner = _RUNNERS[cfg.experiment]
    try:
        checks, values, artifacts = runner(cfg, out, args.verbose)
    except (grids.BandLimitError, grids.GridMismatchError, carleman.QuadratureError,
            spectral.EigensolverError, *_NUMERICAL_ERRORS) as exc:
        print(f"FAIL {type(exc).__name__}: {exc}", file=sys.stderr)
        _write_summary(out, cfg, {"completed": False}, {}, [], error=str(exc))
        return 1

    _write_summary(out, cfg, checks, values, artifacts + ["summary.json"], None)
    for name, ok in checks.items():
        print(("PASS " if ok else "FAIL ") + name)
    if args.verbose:
        for key, val in values.items():
            print(f"  {key} = {val}")
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        print(f"FAIL {failed[0]}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
