"""Observability constants, exponential-law fits, and the proof pipeline.

The central quantity is

    c(threshold, omega) = min { ||f||^2_{L^2(omega)} / ||f||^2 : f in range }

over the range of a spectral projector, computed as the smallest eigenvalue
of the compressed Gram matrix G_jk = <chi_omega b_j, b_k>_w on an orthonormal
basis of the range.  Numerically c is extracted from the singular values of
diag(sqrt(chi w h^d)) B, which is exact for the same quadratic form but does
not square the condition number; the dense Gram eigensolve is kept as an
oracle.

Sweeps of c over a threshold family are fitted against the exponential law

    log(1/c) <= 2 log A + 2 C mu_eff,   mu_eff = mu (flat) or sqrt(max(mu, 0))

by least squares plus an intercept lift to the upper envelope, so the fitted
line dominates every sweep point by construction.  Negative thresholds in the
energy mode contribute mu_eff = 0, which is what makes the certified bound
flat across the negative spectrum.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import grids, spectral, thick


def thread_count() -> int:
    raw = os.environ.get("UNCPLAB_THREADS", "")
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("UNCPLAB_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# projector range bases


@dataclass(frozen=True)
class FlatSource:
    """Plane-wave ranges: threshold is a frequency radius, modes |xi| <= mu."""

    grid: grids.Grid

    mode = "flat"

    def rank(self, threshold: float) -> int:
        return int(grids.band_mask(self.grid, threshold).sum())

    def basis(self, threshold: float):
        """Columns e^{i xi x} / L^{d/2}, sorted by (|k|^2, k tuple); weight 1."""
        grid = self.grid
        mask = grids.band_mask(grid, threshold)
        ks = np.fft.fftfreq(grid.points, d=1.0 / grid.points).astype(np.int64)
        lattice = np.meshgrid(*([ks] * grid.dim), indexing="ij")
        tuples = np.stack([g[mask] for g in lattice], axis=-1)
        order = sorted(
            range(tuples.shape[0]),
            key=lambda i: ((tuples[i] ** 2).sum(), tuple(tuples[i])),
        )
        cols = []
        for i in order:
            pw = grids.plane_wave(grid, tuples[i])
            cols.append(pw.values.ravel() / grid.length ** (grid.dim / 2.0))
        return np.stack(cols, axis=-1), None

    def mu_effective(self, threshold: float) -> float:
        return float(threshold)

    def multiplier_modulus(self, s0: float, threshold: float) -> float:
        return math.exp(s0 * threshold)


@dataclass(frozen=True)
class SpectralSource:
    """Eigenfunction ranges: threshold is an energy, eigenvalues sigma < it."""

    decomposition: spectral.SpectralDecomposition

    mode = "spectral"

    def rank(self, threshold: float) -> int:
        return int((self.decomposition.eigenvalues < threshold).sum())

    def basis(self, threshold: float):
        dec = self.decomposition
        keep = dec.eigenvalues < threshold
        return dec.vectors[:, keep], dec.weight_values.ravel()

    def mu_effective(self, threshold: float) -> float:
        return math.sqrt(max(float(threshold), 0.0))

    def multiplier_modulus(self, s0: float, threshold: float) -> float:
        return abs(np.exp(s0 * spectral.sqrt_pm(threshold)))

    @property
    def grid(self) -> grids.Grid:
        return self.decomposition.grid


def _as_matrix(basis, grid: grids.Grid):
    if isinstance(basis, np.ndarray):
        return basis
    cols = [b.values.ravel() if isinstance(b, grids.Field) else np.ravel(b) for b in basis]
    mat = np.stack(cols, axis=-1)
    if mat.shape[0] != grid.n_nodes:
        raise grids.GridMismatchError("basis columns do not match the grid")
    return mat


def compressed_gram(basis, omega: thick.ThickSet, weight=None) -> np.ndarray:
    """G_jk = <chi_omega b_j, b_k>_w for an orthonormal basis of the range."""
    grid = omega.grid
    mat = _as_matrix(basis, grid)
    cell = grid.spacing**grid.dim
    w = np.ones(grid.n_nodes) if weight is None else np.ravel(weight)
    ortho = (mat.conj().T * (w * cell)) @ mat
    defect = float(np.abs(ortho - np.eye(mat.shape[1])).max())
    if defect > 1e-8:
        raise ValueError(f"basis is not orthonormal: defect {defect:.3e}")
    scale = omega.indicator.ravel() * w * cell
    gram = (mat.conj().T * scale) @ mat
    return 0.5 * (gram + gram.conj().T)


def plane_wave_interval_gram(ks, interval, length: float) -> np.ndarray:
    """Closed-form 1D Gram of e^{i xi x}/sqrt(L) on omega = [alpha, beta).

    G_jk = (1/L) int_alpha^beta e^{i(xi_k - xi_j) x} dx.
    """
    alpha, beta = interval
    if not 0.0 <= alpha < beta <= length:
        raise ValueError("interval must satisfy 0 <= alpha < beta <= length")
    ks = np.asarray(ks, dtype=np.int64)
    xi = 2.0 * np.pi * ks / length
    diff = xi[None, :] - xi[:, None]
    gram = np.empty(diff.shape, dtype=np.complex128)
    off = diff != 0.0
    d = diff[off]
    gram[off] = (np.exp(1j * d * beta) - np.exp(1j * d * alpha)) / (1j * length * d)
    gram[~off] = (beta - alpha) / length
    return gram


def observability_constant(
    source, threshold: float, omega: thick.ThickSet, method: str = "svd"
) -> float:
    """Smallest L^2(omega) mass fraction over the projector range."""
    mat, w = source.basis(threshold)
    if mat.shape[1] == 0:
        raise ValueError(f"projector at threshold {threshold} has rank 0")
    grid = omega.grid
    cell = grid.spacing**grid.dim
    wv = np.ones(grid.n_nodes) if w is None else w
    if method == "svd":
        ortho = (mat.conj().T * (wv * cell)) @ mat
        defect = float(np.abs(ortho - np.eye(mat.shape[1])).max())
        if defect > 1e-8:
            raise ValueError(f"basis is not orthonormal: defect {defect:.3e}")
        scaled = mat * np.sqrt(omega.indicator.ravel() * wv * cell)[:, None]
        sv = np.linalg.svd(scaled, compute_uv=False)
        c = float(sv[-1] ** 2)
    elif method == "gram":
        gram = compressed_gram(mat, omega, wv)
        c = float(np.linalg.eigvalsh(gram)[0])
    else:
        raise ValueError(f"unknown method {method!r}")
    if c > 1.0 + 1e-8:
        raise RuntimeError(f"observability constant {c} exceeds 1")
    return min(max(c, 0.0), 1.0)


# ---------------------------------------------------------------------------
# sweeps and law fitting


@dataclass(frozen=True)
class ObservabilityCurve:
    mode: str
    thresholds: np.ndarray
    c_values: np.ndarray
    mode_counts: np.ndarray
    mu_effective: np.ndarray
    fit_a: float
    fit_c: float
    residual: float
    lsq_a: float
    lsq_c: float

    def log_inverse(self) -> np.ndarray:
        return np.log(1.0 / self.c_values)


def envelope_fit(x: np.ndarray, y: np.ndarray):
    """Least-squares line lifted to dominate all points; slope kept >= 0.

    Returns (intercept, slope, residual) with y <= intercept + slope x for
    every point and residual = max(y - fit) (zero up to roundoff).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise ValueError("need at least 3 points to fit the envelope")
    if float(np.ptp(x)) < 1e-12:
        slope = 0.0
        intercept = float(y.max())
    else:
        slope, intercept = np.polyfit(x, y, 1)
        if slope < 0.0:
            slope = 0.0
            intercept = float(y.max())
        else:
            intercept += float((y - (intercept + slope * x)).max())
    residual = float((y - (intercept + slope * x)).max())
    return float(intercept), float(slope), residual


def sweep(source, omega: thick.ThickSet, thresholds, method: str = "svd") -> ObservabilityCurve:
    """Compute c over ascending thresholds and fit the exponential law."""
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.size < 3:
        raise ValueError("need at least 3 thresholds")
    if np.any(np.diff(thresholds) <= 0.0):
        raise ValueError("thresholds must be strictly ascending")
    ranks = np.array([source.rank(t) for t in thresholds], dtype=np.int64)
    if np.any(ranks < 1):
        bad = thresholds[ranks < 1][0]
        raise ValueError(f"threshold {bad} yields an empty projector range")
    workers = min(thread_count(), thresholds.size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cs = list(
                pool.map(
                    lambda t: observability_constant(source, t, omega, method), thresholds
                )
            )
    else:
        cs = [observability_constant(source, t, omega, method) for t in thresholds]
    cs = np.asarray(cs)
    if np.any(cs <= 0.0):
        raise RuntimeError("vanishing observability constant in sweep")
    mu_eff = np.array([source.mu_effective(t) for t in thresholds])
    y = np.log(1.0 / cs)
    x = 2.0 * mu_eff
    intercept, slope, residual = envelope_fit(x, y)
    ls = np.polyfit(x, y, 1) if float(np.ptp(x)) > 1e-12 else (0.0, float(y.mean()))
    # y <= intercept + slope x with x = 2 mu_eff reads as
    # log(1/c) <= 2 log A + 2 C mu_eff exactly when A = e^{intercept/2}, C = slope
    return ObservabilityCurve(
        mode=source.mode,
        thresholds=thresholds,
        c_values=cs,
        mode_counts=ranks,
        mu_effective=mu_eff,
        fit_a=math.exp(intercept / 2.0),
        fit_c=slope,
        residual=residual,
        lsq_a=math.exp(float(ls[1]) / 2.0),
        lsq_c=float(ls[0]),
    )


def write_curve_csv(path, curve: ObservabilityCurve, config_hash: str = None) -> None:
    lines = []
    if config_hash is not None:
        lines.append(f"# config_sha256={config_hash}")
    lines.append("mode,threshold,rank,c_min,log_inv_c,fit_A,fit_C,residual")
    log_inv = curve.log_inverse()
    for i in range(curve.thresholds.size):
        lines.append(
            ",".join(
                [
                    curve.mode,
                    repr(float(curve.thresholds[i])),
                    str(int(curve.mode_counts[i])),
                    repr(float(curve.c_values[i])),
                    repr(float(log_inv[i])),
                    repr(curve.fit_a),
                    repr(curve.fit_c),
                    repr(curve.residual),
                ]
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve_csv(path):
    """Rows of the sweep CSV as a list of dicts (strings parsed to numbers)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("mode,"):
                continue
            mode, rest = line.split(",", 1)
            t, r, c, lic, fa, fc, res = rest.split(",")
            rows.append(
                {
                    "mode": mode,
                    "threshold": float(t),
                    "rank": int(r),
                    "c_min": float(c),
                    "log_inv_c": float(lic),
                    "fit_A": float(fa),
                    "fit_C": float(fc),
                    "residual": float(res),
                }
            )
    return rows


# ---------------------------------------------------------------------------
# sharp one-dimensional comparison constant


def kovrijkine_bound(gamma: float, a: float, b: float, big_k: float) -> float:
    """(gamma/K)^{K(ab+1)}: sharp 1D thickness constant for parameter K."""
    if not 0.0 < gamma < big_k:
        raise ValueError("need 0 < gamma < K")
    if a < 0.0 or b < 0.0:
        raise ValueError("a and b must be nonnegative")
    return (gamma / big_k) ** (big_k * (a * b + 1.0))


def fit_kovrijkine_constant(curve: ObservabilityCurve, gamma: float, a: float) -> float:
    """Smallest K with c(mu) >= (gamma/K)^{K(a mu/pi + 1)} across the sweep.

    The band radius mu maps to the interval-length parameter through
    b = a mu / pi (a convention, not a claim: b counts Nyquist intervals).
    The bound is decreasing in K for K >= gamma, so bisection applies.
    """

    def admissible(big_k: float) -> bool:
        return all(
            c >= kovrijkine_bound(gamma, a, a * mu / math.pi, big_k)
            for c, mu in zip(curve.c_values, curve.thresholds)
        )

    lo = gamma * (1.0 + 1e-9)
    hi = max(2.0 * gamma, 1.0)
    for _ in range(200):
        if admissible(hi):
            break
        hi *= 2.0
    else:
        raise RuntimeError("no admissible K found")
    if admissible(lo):
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass(frozen=True)
class PipelineReport:
    mode: str
    mu: float
    s0: float
    branch: str
    seed: int
    reconstruction_error: float
    norm_bound_margin: float
    tube_bound_ratio: float | None
    final_inequality_margin: float
    fit_a: float
    fit_c: float
    geometry_hash: str

    def __post_init__(self):
        if not self.reconstruction_error <= 1e-10:
            raise RuntimeError(
                f"multiplier algebra must reconstruct exactly: "
                f"error {self.reconstruction_error:.3e}"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "mu": self.mu,
                "s0": self.s0,
                "branch": self.branch,
                "seed": self.seed,
                "reconstruction_error": self.reconstruction_error,
                "norm_bound_margin": self.norm_bound_margin,
                "tube_bound_ratio": self.tube_bound_ratio,
                "final_inequality_margin": self.final_inequality_margin,
                "fit_A": self.fit_a,
                "fit_C": self.fit_c,
                "geometry_hash": self.geometry_hash,
            }
        )


def omega_hash(omega: thick.ThickSet) -> str:
    grid = omega.grid
    h = hashlib.sha256()
    h.update(np.array([grid.dim, grid.points]).tobytes())
    h.update(np.float64(grid.length).tobytes())
    h.update(np.packbits(omega.indicator.ravel()).tobytes())
    return h.hexdigest()


def _range_element(source, mu: float, rng) -> grids.Field:
    if source.mode == "flat":
        return grids.random_band_limited(source.grid, mu, rng)
    dec = source.decomposition
    keep = dec.eigenvalues < mu
    m = int(keep.sum())
    if m == 0:
        raise ValueError(f"threshold {mu} yields an empty projector range")
    coeff = np.zeros(dec.eigenvalues.size, dtype=np.complex128)
    coeff[keep] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    f = dec.synthesize(coeff)
    return f * (1.0 / grids.norm(f, dec.weight_values))


def _inverse_multiplier(source, mu: float, s0: float, branch: str, f: grids.Field):
    if source.mode == "flat":
        if s0 * mu > 700.0:
            raise OverflowError(
                f"exp({s0 * mu:.1f}) overflows; rerun with a smaller s0"
            )
        # single frequency-space pass: projecting and growing in one shot keeps
        # the e^{s0 |xi|} factor away from fresh transform roundoff at high |xi|
        grid = source.grid
        mask = grids.band_mask(grid, mu)
        spec = np.fft.fftn(f.values)
        spec[~mask] = 0.0
        clean = grids.Field(grid, np.fft.ifftn(spec))
        factor = np.where(mask, np.exp(s0 * np.minimum(grid.frequency_norm(), mu)), 0.0)
        grown = grids.Field(grid, np.fft.ifftn(spec * factor))
        return clean, grown
    dec = source.decomposition
    coeff = dec.coefficients(f)
    keep = dec.eigenvalues < mu
    coeff = np.where(keep, coeff, 0.0)
    factors = np.array(
        [np.exp(s0 * spectral.sqrt_pm(sg, branch)) for sg in dec.eigenvalues]
    )
    if not np.all(np.isfinite(factors[keep])):
        raise OverflowError("inverse multiplier overflows; rerun with a smaller s0")
    clean = dec.synthesize(coeff)
    grown = dec.synthesize(coeff * factors)
    return clean, grown


def theorem_pipeline(
    source,
    omega: thick.ThickSet,
    mu: float,
    s0: float,
    branch: str = "plus",
    seed: int = 0,
    thresholds=None,
) -> PipelineReport:
    """Run the proof chain on a random range element and certify each step.

    Steps: draw f in the projector range; build h with the inverse Poisson
    multiplier e^{+s0 sqrt(sigma)} and check the norm growth bound; flow h
    back with the Poisson operator and check exact reconstruction; in flat
    mode compare the tube mass of f over half-width s0/2 with the mode-wise
    bound e^{s0 mu} ||f||^2; finally check f against the sweep-fitted
    spectral-inequality constants on omega.
    """
    if s0 <= 0.0:
        raise ValueError("s0 must be positive")
    rng = np.random.default_rng(seed)
    f = _range_element(source, mu, rng)
    weight = None if source.mode == "flat" else source.decomposition.weight_values
    norm_f = grids.norm(f, weight)
    clean, grown = _inverse_multiplier(source, mu, s0, branch, f)
    bound = source.multiplier_modulus(s0, mu) * norm_f + 1e-10
    norm_h = grids.norm(grown, weight)
    if norm_h > bound:
        raise RuntimeError(f"norm growth {norm_h} exceeds certified bound {bound}")
    if source.mode == "flat":
        back = spectral.flat_poisson(source.grid, s0, grown)
    else:
        back = spectral.poisson(source.decomposition, s0, branch, grown)
    err = grids.norm(back - clean, weight) / norm_f
    if source.mode == "flat":
        tube = grids.TubeGeometry(half_width=0.5 * s0)
        mean = grids.tube_integral(f, tube, mu) / (s0)
        tube_ratio = mean / (math.exp(s0 * mu) * norm_f**2)
    else:
        # tube norms are a Fourier-band construction; no analogue here
        tube_ratio = None
    if thresholds is None:
        if source.mode == "flat":
            thresholds = mu * np.arange(1, 7) / 6.0
        else:
            lo = float(source.decomposition.eigenvalues.min())
            start = lo + 0.2 * (mu - lo)
            thresholds = np.linspace(start, mu, 6)
    curve = sweep(source, omega, thresholds)
    cell = omega.grid.spacing**omega.grid.dim
    wv = np.ones(omega.grid.shape) if weight is None else weight
    observed = float(
        (np.abs(f.values) ** 2 * wv * omega.indicator).sum() * cell
    )
    certified = curve.fit_a**2 * math.exp(
        2.0 * curve.fit_c * source.mu_effective(mu)
    )
    margin = certified * observed - norm_f**2
    return PipelineReport(
        mode=source.mode,
        mu=float(mu),
        s0=float(s0),
        branch=branch,
        seed=seed,
        reconstruction_error=float(err),
        norm_bound_margin=float(bound - norm_h),
        tube_bound_ratio=None if tube_ratio is None else float(tube_ratio),
        final_inequality_margin=float(margin),
        fit_a=curve.fit_a,
        fit_c=curve.fit_c,
        geometry_hash=omega_hash(omega),
    )
