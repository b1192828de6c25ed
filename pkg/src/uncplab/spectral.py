"""Discrete Schrodinger operators H = -Delta_g + V and their spectral calculus.

The Laplace-Beltrami part is kept in divergence (flux) form

    H u = -(1/w) sum_ij D_i ( w g^{ij} D_j u ) + V u,      w = sqrt(det g),

with D_i the Fourier-spectral derivative on the periodic grid. D_i is exactly
anti-selfadjoint in the plain grid product, so H is selfadjoint in the
weighted product <f, h>_w = h^d sum conj(f) h w up to FFT roundoff, and on a
flat metric it reduces to the exact multiplier |xi|^2: plane waves are exact
eigenfunctions with eigenvalue |xi_k|^2.

decompose() performs the dense weighted eigensolve via the similarity
S = M^{1/2} H M^{-1/2} (M = h^d diag(w)), explicitly Hermitized; eigenvectors
are returned weighted-orthonormal. Projectors keep sigma < lambda strictly;
the flat frequency projector keeps the closed ball |xi| <= mu inclusively.
The asymmetry is deliberate and matches the two sides it discretizes: an
open spectral window below lambda against a closed frequency support ball.

sqrt_pm implements the signed square root

    mu_{+/-}^{1/2} = sqrt(mu)          for mu >= 0
                   = +/- i sqrt(|mu|)  for mu < 0,

so Poisson multipliers exp(-s sqrt(sigma)) decay on the positive spectrum
and have modulus one on the negative spectrum.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from uncplab.grids import Field, Grid, band_mask, make_grid

DENSE_LIMIT = 4096  # decompose() is dense; larger grids are out of scope

_MATRIX_CHUNK = 512


class EigensolverError(RuntimeError):
    """Dense eigensolve failed to converge; carries the symmetry residual."""


def sqrt_pm(mu: float, branch: str = "plus") -> complex:
    """Signed square root: sqrt(mu) for mu >= 0, +/- i sqrt(|mu|) for mu < 0."""
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if mu >= 0.0:
        return complex(np.sqrt(mu))
    root = np.sqrt(-mu)
    return complex(0.0, root if branch == "plus" else -root)


@dataclass
class SchrodingerProblem:
    """Metric, potential and decay-rate data for H = -Delta_g + V.

    metric has shape grid.shape + (dim, dim) and must be symmetric positive
    definite at every node; potential is real of shape grid.shape. epsilon
    is the decay rate entering the perturbation-splitting checks.
    """

    grid: Grid
    metric: np.ndarray
    potential: np.ndarray
    epsilon: float = 0.5

    def __post_init__(self):
        d = self.grid.dim
        self.metric = np.asarray(self.metric, dtype=np.float64)
        self.potential = np.asarray(self.potential, dtype=np.float64)
        if self.metric.shape != self.grid.shape + (d, d):
            raise ValueError(
                f"metric shape {self.metric.shape} != {self.grid.shape + (d, d)}"
            )
        if self.potential.shape != self.grid.shape:
            raise ValueError(
                f"potential shape {self.potential.shape} != {self.grid.shape}"
            )
        if not np.allclose(self.metric, np.swapaxes(self.metric, -1, -2), atol=1e-12):
            raise ValueError("metric must be symmetric at every node")
        eigs = np.linalg.eigvalsh(self.metric)
        if eigs.min() <= 0.0:
            raise ValueError(
                f"metric must be positive definite; min eigenvalue {eigs.min():.3e}"
            )
        if not (self.epsilon > 0.0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def weight(self) -> np.ndarray:
        """sqrt(det g) at every node."""
        return np.sqrt(np.linalg.det(self.metric))

    def inverse_metric(self) -> np.ndarray:
        return np.linalg.inv(self.metric)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.grid.dim).tobytes())
        h.update(np.float64(self.grid.length).tobytes())
        h.update(np.int64(self.grid.points).tobytes())
        h.update(np.ascontiguousarray(self.metric).tobytes())
        h.update(np.ascontiguousarray(self.potential).tobytes())
        h.update(np.float64(self.epsilon).tobytes())
        return h.hexdigest()


def negative_depth_bound(problem: SchrodingerProblem) -> float:
    """Lower-bound surrogate E_0 = max(0, -min V) + 1 for the spectrum."""
    return float(max(0.0, -problem.potential.min()) + 1.0)


def problem_preset(grid: Grid, name: str, **kw) -> SchrodingerProblem:
    """Named problems: 'flat', 'poschl-teller', 'gaussian-metric'."""
    d = grid.dim
    eye = np.broadcast_to(np.eye(d), grid.shape + (d, d)).copy()
    if name == "flat":
        return SchrodingerProblem(grid, eye, np.zeros(grid.shape))
    if name == "poschl-teller":
        if d != 1:
            raise ValueError("poschl-teller preset is one-dimensional")
        depth = kw.get("depth", 2.0)
        x = grid.axis()
        v = -depth / np.cosh(x - grid.length / 2.0) ** 2
        return SchrodingerProblem(grid, eye, v)
    if name == "gaussian-metric":
        amp = kw.get("amp", 0.2)
        width = kw.get("width", grid.length / 8.0)
        if not (-1.0 < amp):
            raise ValueError(f"gaussian-metric amp must exceed -1, got {amp}")
        r2 = np.zeros(grid.shape)
        for c in grid.coords():
            r2 += (c - grid.length / 2.0) ** 2
        bump = 1.0 + amp * np.exp(-r2 / width**2)
        metric = eye * bump[..., None, None]
        potential = np.asarray(kw.get("potential", np.zeros(grid.shape)))
        return SchrodingerProblem(grid, metric, potential, epsilon=kw.get("epsilon", 0.5))
    raise ValueError(f"unknown problem preset {name!r}")


# ---------------------------------------------------------------------------
# assembly


class Operator:
    """Assembled H acting on Fields, with a dense matrix on demand."""

    def __init__(self, problem: SchrodingerProblem):
        self.problem = problem
        self.grid = problem.grid
        self.weight_values = problem.weight()
        # conductivity m_ij = w g^{ij}
        self._m = problem.inverse_metric() * self.weight_values[..., None, None]
        self._freqs = self.grid.frequency_grids()
        self._matrix = None

    def apply(self, f: Field) -> Field:
        if f.grid != self.grid:
            raise ValueError("field grid does not match operator grid")
        out = self._apply_batch(f.values[None, ...])[0]
        return Field(self.grid, out)

    def _apply_batch(self, batch: np.ndarray) -> np.ndarray:
        """H applied to a stack of arrays, shape (m,) + grid.shape."""
        d = self.grid.dim
        axes = tuple(range(1, d + 1))
        spec = np.fft.fftn(batch, axes=axes)
        grads = [np.fft.ifftn(1j * self._freqs[j] * spec, axes=axes) for j in range(d)]
        div_spec = None
        for i in range(d):
            flux = np.zeros_like(batch)
            for j in range(d):
                flux = flux + self._m[..., i, j] * grads[j]
            term = 1j * self._freqs[i] * np.fft.fftn(flux, axes=axes)
            div_spec = term if div_spec is None else div_spec + term
        div = np.fft.ifftn(div_spec, axes=axes)
        return -div / self.weight_values + self.problem.potential * batch

    def matrix(self) -> np.ndarray:
        """Dense matrix of H in node order (built once, column batches)."""
        if self._matrix is None:
            n = self.grid.n_nodes
            mat = np.empty((n, n), dtype=np.complex128)
            eye = np.eye(n, dtype=np.complex128)
            for start in range(0, n, _MATRIX_CHUNK):
                stop = min(start + _MATRIX_CHUNK, n)
                cols = eye[start:stop].reshape((stop - start,) + self.grid.shape)
                mat[:, start:stop] = (
                    self._apply_batch(cols).reshape(stop - start, n).T
                )
            self._matrix = mat
        return self._matrix


def assemble(problem: SchrodingerProblem) -> Operator:
    """Discretize H = -Delta_g + V in weighted divergence form (see module doc)."""
    return Operator(problem)


# ---------------------------------------------------------------------------
# dense decomposition and functional calculus


@dataclass
class SpectralDecomposition:
    """Full weighted eigendecomposition of an assembled operator.

    eigenvalues ascend; vectors holds weighted-orthonormal eigenvectors as
    columns (node order); weight_values is sqrt(det g) on the nodes.
    """

    problem: SchrodingerProblem
    eigenvalues: np.ndarray
    vectors: np.ndarray
    weight_values: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.problem.grid

    def coefficients(self, f: Field) -> np.ndarray:
        """c_j = <phi_j, f>_w for all j."""
        if f.grid != self.grid:
            raise ValueError("field grid does not match decomposition grid")
        meas = self.weight_values.ravel() * self.grid.spacing**self.grid.dim
        return self.vectors.conj().T @ (f.values.ravel() * meas)

    def synthesize(self, coeff: np.ndarray) -> Field:
        vals = (self.vectors @ coeff).reshape(self.grid.shape)
        return Field(self.grid, vals)


def decompose(operator: Operator, cache_dir=None) -> SpectralDecomposition:
    """Dense eigensolve of H in the weighted inner product.

    Solves the Hermitized similarity S = M^{1/2} H M^{-1/2}; eigenvectors are
    mapped back so that <phi_j, phi_k>_w = delta_jk. Results cache to a
    versioned npz keyed by the problem content hash when cache_dir is given.
    """
    problem = operator.problem
    n = problem.grid.n_nodes
    if n > DENSE_LIMIT:
        raise ValueError(
            f"dense decomposition supports at most {DENSE_LIMIT} nodes, got {n}"
        )
    if cache_dir is not None:
        cached = _load_cached(problem, cache_dir)
        if cached is not None:
            return cached
    scale = np.sqrt(operator.weight_values.ravel() * problem.grid.spacing**problem.grid.dim)
    mat = operator.matrix()
    sym = (scale[:, None] * mat) / scale[None, :]
    sym = 0.5 * (sym + sym.conj().T)
    off = float(np.abs(sym.imag).max())
    if off < 1e-12 * max(1.0, float(np.abs(sym.real).max())):
        sym = sym.real  # real symmetric path (flat metric, real potential)
    try:
        eigenvalues, v = scipy.linalg.eigh(sym)
    except scipy.linalg.LinAlgError as exc:
        resid = float(np.abs(mat - mat.conj().T).max())
        raise EigensolverError(
            f"dense eigensolve did not converge (hermiticity residual {resid:.3e})"
        ) from exc
    vectors = v / scale[:, None]
    dec = SpectralDecomposition(problem, eigenvalues, np.asarray(vectors, dtype=np.complex128), operator.weight_values)
    if cache_dir is not None:
        _store_cached(dec, cache_dir)
    return dec


_CACHE_VERSION = 1


def _cache_path(problem: SchrodingerProblem, cache_dir) -> Path:
    return Path(cache_dir) / f"dec-{problem.content_hash()[:16]}.npz"


def _store_cached(dec: SpectralDecomposition, cache_dir) -> None:
    path = _cache_path(dec.problem, cache_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        version=np.int64(_CACHE_VERSION),
        content_hash=dec.problem.content_hash(),
        eigenvalues=dec.eigenvalues,
        vectors=dec.vectors,
        weight=dec.weight_values,
    )


def _load_cached(problem: SchrodingerProblem, cache_dir):
    path = _cache_path(problem, cache_dir)
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as data:
        if int(data["version"]) != _CACHE_VERSION:
            return None
        if str(data["content_hash"]) != problem.content_hash():
            return None
        return SpectralDecomposition(
            problem,
            data["eigenvalues"].copy(),
            data["vectors"].copy(),
            data["weight"].copy(),
        )


def project(dec: SpectralDecomposition, threshold: float, f: Field) -> Field:
    """Spectral projector onto the strictly sub-threshold range: sigma < lambda."""
    keep = dec.eigenvalues < threshold
    coeff = dec.coefficients(f)
    coeff[~keep] = 0.0
    return dec.synthesize(coeff)


def spectral_apply(dec: SpectralDecomposition, fn, f: Field) -> Field:
    """Functional calculus: sum fn(sigma_j) <phi_j, f>_w phi_j."""
    coeff = dec.coefficients(f)
    vals = np.asarray([fn(s) for s in dec.eigenvalues], dtype=np.complex128)
    return dec.synthesize(vals * coeff)


def poisson(dec: SpectralDecomposition, s: float, branch: str, f: Field) -> Field:
    """Poisson-type operator exp(-s H^{1/2}_{+/-}) via the signed square root.

    Multiplies eigencoefficients by exp(-s sqrt_pm(sigma, branch)): decay on
    the positive spectrum, modulus one on the negative spectrum. Requires
    s >= 0. Satisfies the semigroup law in s for a fixed branch and solves
    (-d^2/ds^2 + H) u = 0 mode by mode.
    """
    if s < 0.0:
        raise ValueError(f"s must be >= 0, got {s}")
    return spectral_apply(dec, lambda sig: np.exp(-s * sqrt_pm(sig, branch)), f)


# flat (free) counterparts, computed by frequency multipliers


def flat_project(grid: Grid, mu_freq: float, f: Field) -> Field:
    """Band projector onto the closed frequency ball |xi| <= mu_freq."""
    if f.grid != grid:
        raise ValueError("field grid does not match")
    spec = np.fft.fftn(f.values)
    spec[~band_mask(grid, mu_freq)] = 0.0
    return Field(grid, np.fft.ifftn(spec))


def flat_apply(grid: Grid, fn, f: Field) -> Field:
    """Multiplier calculus for the flat operator: fn evaluated at sigma = |xi|^2."""
    if f.grid != grid:
        raise ValueError("field grid does not match")
    sig = grid.frequency_norm() ** 2
    mult = np.asarray(fn(sig), dtype=np.complex128)
    return Field(grid, np.fft.ifftn(mult * np.fft.fftn(f.values)))


def flat_poisson(grid: Grid, s: float, f: Field) -> Field:
    """exp(-s |xi|) multiplier; both branches agree on the flat spectrum."""
    if s < 0.0:
        raise ValueError(f"s must be >= 0, got {s}")
    return flat_apply(grid, lambda sig: np.exp(-s * np.sqrt(sig)), f)


# ---------------------------------------------------------------------------
# eigenvalue export


def write_eigenvalues_csv(
    path,
    dec: SpectralDecomposition,
    operator: Operator | None = None,
    config_hash: str | None = None,
) -> None:
    """CSV rows (index, sigma, residual); residual = ||H phi - sigma phi|| / max(1, |sigma|)."""
    import csv as _csv

    if operator is None:
        operator = assemble(dec.problem)
    n = dec.eigenvalues.size
    res = np.empty(n)
    for start in range(0, n, _MATRIX_CHUNK):
        stop = min(start + _MATRIX_CHUNK, n)
        block = dec.vectors[:, start:stop].T.reshape((stop - start,) + dec.grid.shape)
        hphi = operator._apply_batch(block).reshape(stop - start, -1)
        diff = hphi - dec.eigenvalues[start:stop, None] * dec.vectors[:, start:stop].T
        meas = dec.weight_values.ravel() * dec.grid.spacing**dec.grid.dim
        nrm = np.sqrt((np.abs(diff) ** 2 * meas[None, :]).sum(axis=1))
        res[start:stop] = nrm / np.maximum(1.0, np.abs(dec.eigenvalues[start:stop]))
    with open(path, "w", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_sha256={config_hash}\n")
        writer = _csv.writer(fh)
        writer.writerow(["index", "sigma", "residual"])
        for j in range(n):
            writer.writerow([j, repr(float(dec.eigenvalues[j])), repr(float(res[j]))])


# ---------------------------------------------------------------------------
# perturbation splitting


@dataclass
class DecayFit:
    """Smallest C with |field| <= C (1 + r_c)^{-rate} on the inner half box,
    and whether the bound extends to the outer half with slack factor 2."""

    label: str
    rate: float
    constant: float
    passed: bool


@dataclass
class PerturbationReport:
    long_range: dict
    short_range: dict
    fits: list
    reconstruction_defect: float
    passed: bool


def _spectral_derivative(grid: Grid, arr: np.ndarray, axis: int) -> np.ndarray:
    spec = np.fft.fftn(arr)
    out = np.fft.ifftn(1j * grid.frequency_grids()[axis] * spec)
    return out.real if np.isrealobj(arr) else out


def _decay_fit(grid: Grid, label: str, field: np.ndarray, rate: float) -> DecayFit:
    r = np.zeros(grid.shape)
    for c in grid.coords():
        r += (c - grid.length / 2.0) ** 2
    r = np.sqrt(r)
    weighted = np.abs(field) * (1.0 + r) ** rate
    r_half = r.max() / 2.0
    inner = weighted[r <= r_half]
    outer = weighted[r > r_half]
    constant = float(inner.max()) if inner.size else 0.0
    floor = 1e-12 * (1.0 + float(np.abs(field).max()))
    passed = bool(outer.size == 0 or outer.max() <= 2.0 * constant + floor)
    return DecayFit(label, rate, constant, passed)


def split_perturbation(problem: SchrodingerProblem, seed: int = 0) -> PerturbationReport:
    """Split H = -Delta + (V^L + V^S) and check the decay hypotheses.

    Long-range coefficients, keyed by multi-index alpha:
        |alpha| = 2:  delta_ij - g^{ij}   (cross terms carry the factor 2)
        |alpha| = 1:  - sum_i d_i g^{ij}
        |alpha| = 0:  V
    Short-range coefficients, keyed by axis i:
        -(1/w) sum_j g^{ij} d_j w.

    Each coefficient (and its first derivatives, for the long-range part) is
    fitted with the smallest C such that |coef| <= C (1 + r_c)^{-rate} on the
    inner half of the box, r_c the distance to the box center; the pass flag
    asks the bound to extend to the outer half with slack factor 2. Rates are
    epsilon for the coefficients themselves and 1 + epsilon for first
    derivatives and the short-range part.

    The report also carries the relative defect of reconstructing the
    assembled operator from the split on a smooth band-limited test field.
    """
    grid = problem.grid
    d = grid.dim
    eps = problem.epsilon
    ginv = problem.inverse_metric()
    w = problem.weight()

    long_range = {}
    for i in range(d):
        for j in range(i, d):
            alpha = tuple(
                (1 if ax == i else 0) + (1 if ax == j else 0) for ax in range(d)
            )
            coef = (1.0 if i == j else 0.0) - ginv[..., i, j]
            if i != j:
                coef = 2.0 * coef
            long_range[alpha] = coef
    for j in range(d):
        alpha = tuple(1 if ax == j else 0 for ax in range(d))
        coef = np.zeros(grid.shape)
        for i in range(d):
            coef -= _spectral_derivative(grid, ginv[..., i, j], i)
        long_range[alpha] = long_range.get(alpha, 0.0) + coef
    long_range[(0,) * d] = problem.potential.copy()

    short_range = {}
    for i in range(d):
        coef = np.zeros(grid.shape)
        for j in range(d):
            coef += ginv[..., i, j] * _spectral_derivative(grid, w, j)
        short_range[i] = -coef / w

    fits = []
    for alpha, coef in sorted(long_range.items()):
        fits.append(_decay_fit(grid, f"V_L[{alpha}]", coef, eps))
        for ax in range(d):
            dcoef = _spectral_derivative(grid, coef, ax)
            fits.append(_decay_fit(grid, f"d{ax} V_L[{alpha}]", dcoef, 1.0 + eps))
    for i, coef in sorted(short_range.items()):
        fits.append(_decay_fit(grid, f"V_S[{i}]", coef, 1.0 + eps))

    defect = _reconstruction_defect(problem, long_range, short_range, seed)
    passed = bool(all(f.passed for f in fits) and defect <= 1e-8)
    return PerturbationReport(long_range, short_range, fits, defect, passed)


def _reconstruction_defect(problem, long_range, short_range, seed: int) -> float:
    """|| (-Delta + V~) f - H f || / || H f || on a quarter-band random field."""
    from uncplab.grids import norm, random_band_limited

    grid = problem.grid
    rng = np.random.default_rng(seed)
    nyquist = np.pi / grid.spacing
    f = random_band_limited(grid, nyquist / 4.0, rng)

    def derive(vals, alpha):
        spec = np.fft.fftn(vals)
        mult = np.ones(grid.shape, dtype=np.complex128)
        for ax, p in enumerate(alpha):
            if p:
                mult = mult * (1j * grid.frequency_grids()[ax]) ** p
        return np.fft.ifftn(mult * spec)

    flat = -derive(f.values, tuple(2 if ax == 0 else 0 for ax in range(grid.dim)))
    for ax in range(1, grid.dim):
        flat = flat - derive(f.values, tuple(2 if a == ax else 0 for a in range(grid.dim)))
    total = flat
    for alpha, coef in long_range.items():
        total = total + coef * derive(f.values, alpha)
    for i, coef in short_range.items():
        total = total + coef * derive(f.values, tuple(1 if ax == i else 0 for ax in range(grid.dim)))
    hf = assemble(problem).apply(f).values
    ref = norm(Field(grid, hf))
    if ref == 0.0:
        return float(norm(Field(grid, total - hf)))
    return float(norm(Field(grid, total - hf)) / ref)
