"""Disk Green functions, logarithmic potentials, and weighted estimates.

The domain is always an open disk X in the complex plane, where the Dirichlet
Green function has the closed form

    G(x, y) = (1/2pi) log(|R^2 - x' conj(y')| / (R |x - y|)),   x' = x - c.

A probability measure mu supported on a compact union of segments K inside an
inner region Y (with closure(Y) inside X) induces the potentials

    W(x)      = -(1/2pi) int log|x - y| dmu(y)        (free log potential)
    potential Phi(x) = int G(x, y) dmu(y)             (vanishes on the boundary)
    region potential Psi(x) = -int_Y G(x, y) dlambda  (<= 0, Laplacian = 1_Y)

and the weight phi = Phi + rho * Psi.  Everything singular is integrated in
closed form: segment integrals of log use the exact antiderivative, the disk
integral of log|x - y| uses the radial closed form, and the smooth remainder
of Psi over a disk Y collapses by the mean value property.  Quadrature only
ever sees smooth integrands, which is what makes the extracted constants
stable to refinement.

Constant conventions:
    potential_sup        sup of Phi over X (attained on K, maximum principle)
    green_inf            inf of G over Y x K (attained on boundary(Y) x K)
    region_potential_sup sup of |Psi| over Y
    mix_ratio            rho = green_inf / (2 region_potential_sup), extremal
    exponent             delta = green_inf / (4 potential_sup - green_inf)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels

_TWO_PI = 2.0 * np.pi


class QuadratureError(RuntimeError):
    """Raised when refinement doubling fails to stabilize the constants."""


# ---------------------------------------------------------------------------
# regions and measures


@dataclass(frozen=True)
class DiskRegion:
    center: complex
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise ValueError("disk radius must be positive and finite")

    def contains(self, z: np.ndarray, shrink: float = 0.0) -> np.ndarray:
        return np.abs(np.asarray(z, dtype=np.complex128) - self.center) <= (
            self.radius - shrink
        )

    def boundary(self, n: int) -> np.ndarray:
        th = np.linspace(0.0, _TWO_PI, n, endpoint=False)
        return self.center + self.radius * np.exp(1j * th)

    def interior_samples(self, n_r: int, n_th: int) -> np.ndarray:
        r = np.linspace(0.0, self.radius, n_r)
        th = np.linspace(0.0, _TWO_PI, n_th, endpoint=False)
        pts = self.center + np.outer(r, np.exp(1j * th)).ravel()
        return np.concatenate(([self.center], pts))


@dataclass(frozen=True)
class RectRegion:
    """Axis-aligned rectangle, kept for inner regions only."""

    center: complex
    half_x: float
    half_y: float

    def __post_init__(self):
        if not (self.half_x > 0.0 and self.half_y > 0.0):
            raise ValueError("rectangle half widths must be positive")

    def contains(self, z: np.ndarray, shrink: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128) - self.center
        return (np.abs(z.real) <= self.half_x - shrink) & (
            np.abs(z.imag) <= self.half_y - shrink
        )

    def corners(self) -> np.ndarray:
        return self.center + np.array(
            [
                self.half_x + 1j * self.half_y,
                -self.half_x + 1j * self.half_y,
                -self.half_x - 1j * self.half_y,
                self.half_x - 1j * self.half_y,
            ]
        )

    def boundary(self, n: int) -> np.ndarray:
        t = np.linspace(-1.0, 1.0, max(2, n // 4), endpoint=False)
        top = self.center + self.half_x * t + 1j * self.half_y
        bot = self.center - self.half_x * t - 1j * self.half_y
        rgt = self.center + self.half_x + 1j * self.half_y * (-t)
        lft = self.center - self.half_x + 1j * self.half_y * t
        return np.concatenate([top, rgt, bot, lft])

    def interior_samples(self, n_r: int, n_th: int) -> np.ndarray:
        n = max(n_r, n_th)
        x = np.linspace(-self.half_x, self.half_x, n)
        y = np.linspace(-self.half_y, self.half_y, n)
        gx, gy = np.meshgrid(x, y, indexing="ij")
        return (self.center + gx + 1j * gy).ravel()


@dataclass(frozen=True)
class SegmentMeasure:
    """Probability measure that is uniform on a union of straight segments.

    ``weights`` gives the mass of each piece; by default mass is proportional
    to arclength, which realizes the normalized restriction |E|^{-1} dx|_E.
    """

    starts: np.ndarray
    ends: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        starts = np.atleast_1d(np.asarray(self.starts, dtype=np.complex128))
        ends = np.atleast_1d(np.asarray(self.ends, dtype=np.complex128))
        if starts.shape != ends.shape or starts.ndim != 1:
            raise ValueError("starts and ends must be matching 1d arrays")
        lengths = np.abs(ends - starts)
        if np.any(lengths <= 0.0):
            raise ValueError("zero-length segment piece")
        if self.weights is None:
            weights = lengths / lengths.sum()
        else:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != starts.shape or np.any(weights <= 0.0):
                raise ValueError("weights must be positive, one per piece")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("measure must have total mass 1")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "weights", weights)

    @property
    def lengths(self) -> np.ndarray:
        return np.abs(self.ends - self.starts)

    def total_length(self) -> float:
        return float(self.lengths.sum())

    def nodes(self, per_unit: int):
        """Gauss-Legendre nodes z and weights v with int g dmu = sum v g(z)."""
        zs, vs = [], []
        for p, q, w, ell in zip(self.starts, self.ends, self.weights, self.lengths):
            n = max(16, int(math.ceil(per_unit * ell)))
            t, v = np.polynomial.legendre.leggauss(n)
            t = 0.5 * (t + 1.0)
            zs.append(p + t * (q - p))
            vs.append(0.5 * v * w)
        return np.concatenate(zs), np.concatenate(vs)

    def sample_points(self, per_unit: int) -> np.ndarray:
        pts = []
        for p, q, ell in zip(self.starts, self.ends, self.lengths):
            n = max(8, int(math.ceil(per_unit * ell))) + 1
            pts.append(p + np.linspace(0.0, 1.0, n) * (q - p))
        return np.concatenate(pts)

    def log_integral(self, z: np.ndarray) -> np.ndarray:
        """Exact int log|z - y| dmu(y), safe on and near the segments."""
        z = np.asarray(z, dtype=np.complex128).ravel()
        out = np.zeros(z.size, dtype=np.float64)
        for p, q, w, ell in zip(self.starts, self.ends, self.weights, self.lengths):
            u = (q - p) / ell
            rel = (z - p) * np.conj(u)
            out += kernels.segment_log_sum(
                rel.real, rel.imag, np.array([0.0]), np.array([ell]), np.array([w / ell])
            )
        return out


@dataclass(frozen=True)
class AtomicMeasure:
    """Probability measure made of finitely many weighted point masses."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_1d(np.asarray(self.points, dtype=np.complex128))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if points.shape != weights.shape or points.ndim != 1:
            raise ValueError("points and weights must be matching 1d arrays")
        if np.any(weights <= 0.0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive with total mass 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def nodes(self, per_unit: int):
        return self.points, self.weights

    def sample_points(self, per_unit: int) -> np.ndarray:
        return self.points

    def log_integral(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128).ravel()
        d = np.abs(z[:, None] - self.points[None, :])
        if np.any(d == 0.0):
            raise ValueError("log potential evaluated at an atom")
        return np.log(d) @ self.weights


@dataclass(frozen=True)
class CarlemanGeometry:
    """Disk domain X, inner region Y, segment support K, and measure mu on K."""

    domain_radius: float
    inner: object
    support: tuple
    measure: object
    domain_center: complex = 0j
    cutoff_bound: float = None

    def __post_init__(self):
        if not (self.domain_radius > 0.0 and np.isfinite(self.domain_radius)):
            raise ValueError("domain radius must be positive and finite")
        if self.cutoff_bound is not None and not self.cutoff_bound >= 0.0:
            raise ValueError("cutoff bound must be nonnegative")
        support = tuple(
            (complex(a), complex(b)) for a, b in self.support
        )
        object.__setattr__(self, "support", support)
        ends = np.array([p for seg in support for p in seg])
        if ends.size == 0:
            raise ValueError("support must contain at least one segment")
        if not np.all(self.inner.contains(ends)):
            raise ValueError("support must lie inside the inner region")
        mids = np.array([0.5 * (a + b) for a, b in support])
        if not np.all(self.inner.contains(mids)):
            raise ValueError("support must lie inside the inner region")
        if not self._inner_inside_domain():
            raise ValueError("inner region closure must lie inside the domain")
        probe = self.measure.sample_points(8)
        if not np.all(self.inner.contains(probe)):
            raise ValueError("measure must be supported inside the inner region")

    def _inner_inside_domain(self) -> bool:
        if isinstance(self.inner, DiskRegion):
            reach = abs(self.inner.center - self.domain_center) + self.inner.radius
        else:
            reach = np.abs(self.corners_or_boundary() - self.domain_center).max()
        return reach < self.domain_radius

    def corners_or_boundary(self) -> np.ndarray:
        if isinstance(self.inner, RectRegion):
            return self.inner.corners()
        return self.inner.boundary(8)

    def clearance(self) -> float:
        """Distance from closure(Y) to the boundary circle."""
        if isinstance(self.inner, DiskRegion):
            reach = abs(self.inner.center - self.domain_center) + self.inner.radius
        else:
            reach = np.abs(self.inner.corners() - self.domain_center).max()
        return self.domain_radius - reach

    def support_measure(self) -> SegmentMeasure:
        """Uniform probability measure on all of K (used for sampling sups)."""
        starts = np.array([a for a, _ in self.support])
        ends = np.array([b for _, b in self.support])
        return SegmentMeasure(starts, ends)


@dataclass(frozen=True)
class CarlemanConstants:
    """Extremal constants of the weight construction on one geometry."""

    potential_sup: float
    green_inf: float
    region_potential_sup: float
    mix_ratio: float
    exponent: float

    def __post_init__(self):
        for name in ("potential_sup", "green_inf", "region_potential_sup", "mix_ratio"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.potential_sup < self.green_inf * (1.0 - 1e-9):
            raise ValueError("potential_sup must dominate green_inf")
        if 2.0 * self.mix_ratio * self.region_potential_sup > self.green_inf * (
            1.0 + 1e-12
        ):
            raise ValueError("mix ratio too large for the region potential")
        if not 0.0 < self.exponent <= 1.0 / 3.0 + 1e-12:
            raise ValueError("exponent must lie in (0, 1/3]")


# ---------------------------------------------------------------------------
# Green function and potentials


def green_disk(radius: float, x, y, center: complex = 0j) -> np.ndarray:
    """Dirichlet Green function of the disk, broadcasting over x and y."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    xr = x - center
    yr = y - center
    if np.any(np.abs(xr) >= radius) or np.any(np.abs(yr) >= radius):
        raise ValueError("points must lie strictly inside the disk")
    diff = np.abs(x - y)
    if np.any(diff == 0.0):
        raise ValueError("Green function is singular on the diagonal")
    num = np.abs(radius * radius - xr * np.conj(yr))
    return np.log(num / (radius * diff)) / _TWO_PI


def log_potential(z, measure) -> np.ndarray:
    """W(z) = -(1/2pi) int log|z - y| dmu(y), exact for segment pieces."""
    return -measure.log_integral(z) / _TWO_PI


def _uniform_disk_log_integral(s: np.ndarray, radius: float) -> np.ndarray:
    """int_{|y| < radius} log|s - y| dlambda(y) for |s| = s, radial closed form."""
    s = np.asarray(s, dtype=np.float64)
    area = np.pi * radius * radius
    outside = area * np.log(np.maximum(s, radius))
    inside = area * np.log(radius) - 0.5 * np.pi * (radius * radius - s * s)
    return np.where(s >= radius, outside, inside)


class WeightEvaluator:
    """Callable bundle for the potentials of one geometry at one resolution."""

    def __init__(self, geom: CarlemanGeometry, quad_points: int):
        self.geom = geom
        self.quad_points = int(quad_points)
        self._nodes, self._node_w = geom.measure.nodes(self.quad_points)

    def log_potential_at(self, z) -> np.ndarray:
        return log_potential(z, self.geom.measure)

    def potential_at(self, z) -> np.ndarray:
        """Phi(z) = int G(z, y) dmu(y); regular part by quadrature, log exact."""
        z = np.asarray(z, dtype=np.complex128).ravel()
        g = self.geom
        zr = z - g.domain_center
        yr = np.conj(self._nodes - g.domain_center)
        reg = np.empty(z.size)
        for s in range(0, z.size, 8192):
            block = np.log(np.abs(g.domain_radius**2 - zr[s : s + 8192, None] * yr))
            reg[s : s + 8192] = block @ self._node_w
        reg = (reg - math.log(g.domain_radius)) / _TWO_PI
        return reg + self.log_potential_at(z)

    def region_potential_at(self, z) -> np.ndarray:
        """Psi(z) = -int_Y G(z, y) dlambda(y) (closed form for disk Y)."""
        z = np.asarray(z, dtype=np.complex128).ravel()
        g = self.geom
        if isinstance(g.inner, DiskRegion):
            return self._disk_region_potential(z, g.inner)
        return self._rect_region_potential(z, g.inner)

    def _disk_region_potential(self, z: np.ndarray, disk: DiskRegion) -> np.ndarray:
        g = self.geom
        zr = z - g.domain_center
        cr = disk.center - g.domain_center
        reg = 0.5 * disk.radius**2 * np.log(
            np.abs(g.domain_radius**2 - zr * np.conj(cr)) / g.domain_radius
        )
        sing = _uniform_disk_log_integral(np.abs(z - disk.center), disk.radius)
        return sing / _TWO_PI - reg

    def _rect_region_potential(self, z: np.ndarray, rect: RectRegion) -> np.ndarray:
        # regular part: tensor Gauss quadrature, integrand smooth inside X
        g = self.geom
        n = max(48, self.quad_points // 2)
        tx, wx = np.polynomial.legendre.leggauss(n)
        ty, wy = np.polynomial.legendre.leggauss(n)
        ys = (
            rect.center
            + rect.half_x * tx[:, None]
            + 1j * rect.half_y * ty[None, :]
        ).ravel()
        wgt = (rect.half_x * wx)[:, None] * (rect.half_y * wy)[None, :]
        wgt = wgt.ravel()
        zr = z - g.domain_center
        yr = np.conj(ys - g.domain_center)
        reg = np.empty(z.size)
        for s in range(0, z.size, 512):
            block = np.log(
                np.abs(g.domain_radius**2 - zr[s : s + 512, None] * yr[None, :])
                / g.domain_radius
            )
            reg[s : s + 512] = block @ wgt
        reg /= _TWO_PI
        sing = self._rect_log_integral(z, rect)
        return (sing - 0.0) / _TWO_PI - reg

    def _rect_log_integral(self, z: np.ndarray, rect: RectRegion) -> np.ndarray:
        """int_rect log|z - y| dlambda: exact along x, composite Gauss in y."""
        zx = (z - rect.center).real
        zy = (z - rect.center).imag
        n = max(96, self.quad_points)
        out = np.zeros(z.size, dtype=np.float64)
        lo = np.array([-rect.half_x])
        hi = np.array([rect.half_x])
        w = np.array([1.0])
        # split the y sweep at the horizontal line through each target
        t, v = np.polynomial.legendre.leggauss(n)
        for i in range(z.size):
            cuts = np.unique(np.clip([zy[i]], -rect.half_y, rect.half_y))
            edges = np.concatenate(([-rect.half_y], cuts, [rect.half_y]))
            acc = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                if b - a <= 0.0:
                    continue
                yv = 0.5 * (b - a) * t + 0.5 * (a + b)
                strip = kernels.segment_log_sum(
                    np.full(yv.size, zx[i]), zy[i] - yv, lo, hi, w
                )
                acc += 0.5 * (b - a) * float(strip @ v)
            out[i] = acc
        return out

    def weight_at(self, z, mix_ratio: float) -> np.ndarray:
        return self.potential_at(z) + mix_ratio * self.region_potential_at(z)


def _polish_max(fn, seed: complex, step: float, rounds: int = 10) -> float:
    """Refine a sampled maximum of a smooth function by shrinking 3x3 search.

    Decouples the located extremum from the density of the candidate grid,
    so refinement comparisons see quadrature error only.
    """
    offsets = np.array(
        [a + 1j * b for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)]
    )
    best_z = complex(seed)
    best_v = float(fn(np.array([best_z]))[0])
    for _ in range(rounds):
        cand = best_z + step * offsets
        vals = np.asarray(fn(cand), dtype=np.float64)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v = float(vals[i])
            best_z = complex(cand[i])
        step *= 0.5
    return best_v


def _constants_at(geom: CarlemanGeometry, quad_points: int):
    ev = WeightEvaluator(geom, quad_points)
    g = geom
    # sup of Phi: attained on K, plus inner and coarse domain samples as guards
    k_pts = g.support_measure().sample_points(quad_points)
    y_pts = g.inner.interior_samples(
        max(24, quad_points // 4), max(48, quad_points // 2)
    )
    th = np.linspace(0.0, _TWO_PI, 64, endpoint=False)
    r = np.linspace(0.05, 0.98, 24) * g.domain_radius
    x_pts = g.domain_center + np.outer(r, np.exp(1j * th)).ravel()
    cand = np.concatenate([k_pts, y_pts, x_pts])
    phi_vals = ev.potential_at(cand)
    step = 0.01 * g.domain_radius
    potential_sup = _polish_max(
        ev.potential_at, complex(cand[int(np.argmax(phi_vals))]), step
    )
    # inf of G over Y x K: minimum principle puts x on boundary(Y)
    by = g.inner.boundary(4 * quad_points)
    green_inf = kernels.green_pair_min(
        by - g.domain_center, k_pts - g.domain_center, g.domain_radius
    )
    psi_cand = np.concatenate([y_pts, by])
    psi_vals = np.abs(ev.region_potential_at(psi_cand))
    region_potential_sup = _polish_max(
        lambda z: np.abs(ev.region_potential_at(z)),
        complex(psi_cand[int(np.argmax(psi_vals))]),
        step,
    )
    return ev, potential_sup, green_inf, region_potential_sup


@dataclass(frozen=True)
class CarlemanWeight:
    """Weight fields, constants, and cutoff data for one disk geometry."""

    geometry: CarlemanGeometry
    constants: CarlemanConstants
    boundary_ratio: float
    cutoff_radius: float
    cutoff_bound: float
    quad_points: int
    axis_x: np.ndarray
    axis_y: np.ndarray
    fields: dict
    evaluator: WeightEvaluator = field(repr=False, default=None)

    def log_potential_at(self, z) -> np.ndarray:
        return self.evaluator.log_potential_at(z)

    def potential_at(self, z) -> np.ndarray:
        return self.evaluator.potential_at(z)

    def region_potential_at(self, z) -> np.ndarray:
        return self.evaluator.region_potential_at(z)

    def weight_at(self, z) -> np.ndarray:
        return self.evaluator.weight_at(z, self.constants.mix_ratio)

    def cutoff_at(self, z) -> np.ndarray:
        """Cutoff equal to 1 except in a collar of width cutoff_radius at rim."""
        z = np.asarray(z, dtype=np.complex128)
        d = self.geometry.domain_radius - np.abs(z - self.geometry.domain_center)
        t = np.clip(d / self.cutoff_radius, 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)


def delta_from_constants(green_inf: float, potential_sup: float) -> float:
    """Interpolation exponent delta = c_Y / (4 C - c_Y) in (0, 1/3]."""
    if not 0.0 < green_inf <= potential_sup * (1.0 + 1e-12):
        raise ValueError("need 0 < green_inf <= potential_sup")
    return green_inf / (4.0 * potential_sup - green_inf)


def carleman_weight(geom: CarlemanGeometry, quad_points: int = 128) -> CarlemanWeight:
    """Build the weight and extract its constants, with a refinement check."""
    if quad_points < 64:
        raise ValueError("need at least 64 quadrature points per unit length")
    coarse = _constants_at(geom, quad_points)
    fine = _constants_at(geom, 2 * quad_points)
    for a, b, name in zip(coarse[1:], fine[1:], ("sup", "inf", "region sup")):
        if abs(a - b) > 1e-4 * max(abs(a), abs(b)):
            raise QuadratureError(
                f"constant {name} unstable under refinement: {a!r} vs {b!r}"
            )
    ev, potential_sup, green_inf, region_sup = fine
    mix_ratio = green_inf / (2.0 * region_sup)
    constants = CarlemanConstants(
        potential_sup=potential_sup,
        green_inf=green_inf,
        region_potential_sup=region_sup,
        mix_ratio=mix_ratio,
        exponent=delta_from_constants(green_inf, potential_sup),
    )
    boundary_ratio, cutoff_radius = _fit_cutoff(geom, ev, green_inf)
    if geom.cutoff_bound is not None:
        cutoff_bound = geom.cutoff_bound
    else:
        # cubic ramp over the collar: |grad| <= 1.5/r, dbar picks up a half
        cutoff_bound = 0.75 / cutoff_radius
    axis_x, axis_y, fields = _sample_fields(geom, ev, mix_ratio, quad_points)
    return CarlemanWeight(
        geometry=geom,
        constants=constants,
        boundary_ratio=boundary_ratio,
        cutoff_radius=cutoff_radius,
        cutoff_bound=cutoff_bound,
        quad_points=quad_points,
        axis_x=axis_x,
        axis_y=axis_y,
        fields=fields,
        evaluator=ev,
    )


def _fit_cutoff(geom: CarlemanGeometry, ev: WeightEvaluator, green_inf: float):
    """Boundary decay ratio of Phi and a collar radius with sup Phi <= c_Y/4."""
    g = geom
    th = np.linspace(0.0, _TWO_PI, 256, endpoint=False)
    ring = np.exp(1j * th)
    dist = np.linspace(0.005, 0.1, 20) * g.domain_radius
    pts = g.domain_center + np.outer(g.domain_radius - dist, ring)
    vals = ev.potential_at(pts.ravel()).reshape(pts.shape)
    boundary_ratio = float((vals / dist[:, None]).max())
    radius = min(green_inf / (4.0 * boundary_ratio), 0.9 * g.clearance())
    for _ in range(60):
        dd = np.linspace(0.05, 1.0, 12) * radius
        band = g.domain_center + np.outer(g.domain_radius - dd, ring)
        sup = float(ev.potential_at(band.ravel()).max())
        if sup <= 0.25 * green_inf * (1.0 + 1e-9):
            return boundary_ratio, radius
        radius *= 0.8
    raise QuadratureError("could not certify a collar for the cutoff")


def _sample_fields(geom, ev: WeightEvaluator, mix_ratio: float, quad_points: int):
    n = min(2 * quad_points, 512)
    g = geom
    axis_x = g.domain_center.real + np.linspace(-1.0, 1.0, n) * g.domain_radius
    axis_y = g.domain_center.imag + np.linspace(-1.0, 1.0, n) * g.domain_radius
    zz = axis_x[:, None] + 1j * axis_y[None, :]
    flat = zz.ravel()
    inside = np.abs(flat - g.domain_center) < g.domain_radius
    out = {}
    pot = np.full(flat.size, np.nan)
    pot[inside] = ev.potential_at(flat[inside])
    reg = np.full(flat.size, np.nan)
    reg[inside] = ev.region_potential_at(flat[inside])
    logp = np.full(flat.size, np.nan)
    logp[inside] = ev.log_potential_at(flat[inside])
    out["log_potential"] = logp.reshape(n, n)
    out["potential"] = pot.reshape(n, n)
    out["region_potential"] = reg.reshape(n, n)
    out["weight"] = (pot + mix_ratio * reg).reshape(n, n)
    return axis_x, axis_y, out


# ---------------------------------------------------------------------------
# inequality checks


@dataclass(frozen=True)
class LaplacianMeasure:
    """Signed measure nu built from a density, a region indicator, and segments.

    nu = density dlambda + region_scale 1_region dlambda
         + segment_scale (probability measure on segments)
    """

    density: Callable = None
    region: object = None
    region_scale: float = 0.0
    segments: object = None
    segment_scale: float = 0.0


@dataclass(frozen=True)
class CheckResult:
    variant: str
    h_values: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margins: np.ndarray
    tol: float
    passed: bool


def smooth_bump(center: complex = 0j, radius: float = 1.0, plateau: float = 0.5):
    """C^1 bump: 1 inside plateau*radius, cubic ramp to 0 at radius."""
    if not 0.0 < plateau < 1.0:
        raise ValueError("plateau fraction must lie in (0, 1)")
    inner = plateau * radius

    def bump(z):
        s = np.abs(np.asarray(z, dtype=np.complex128) - center)
        t = np.clip((radius - s) / (radius - inner), 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)

    return bump


def _disk_quadrature(disk: DiskRegion, n_r: int, n_th: int):
    t, v = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * disk.radius * (t + 1.0)
    wr = 0.5 * disk.radius * v * r
    th = np.linspace(0.0, _TWO_PI, n_th, endpoint=False)
    pts = disk.center + np.outer(r, np.exp(1j * th)).ravel()
    wgt = np.repeat(wr, n_th) * (_TWO_PI / n_th)
    return pts, wgt


def _rect_quadrature(rect: RectRegion, n: int):
    tx, wx = np.polynomial.legendre.leggauss(n)
    pts = (
        rect.center
        + rect.half_x * tx[:, None]
        + 1j * rect.half_y * tx[None, :]
    ).ravel()
    wgt = ((rect.half_x * wx)[:, None] * (rect.half_y * wx)[None, :]).ravel()
    return pts, wgt


def _region_quadrature(region, n: int):
    if isinstance(region, DiskRegion):
        return _disk_quadrature(region, n, 2 * n)
    return _rect_quadrature(region, n)


def carleman_inequality_check(
    f,
    phi,
    laplacian_phi,
    h_values,
    domain: DiskRegion = None,
    resolution: int = 384,
    tol: float = 1e-3,
    variant: str = "dbar",
    weight: CarlemanWeight = None,
) -> CheckResult:
    """Verify a weighted inequality for each h.

    variant "dbar": for compactly supported f and a weight phi with
    Laplacian nu, checks 4h^2 int e^{2phi/h}|dbar f|^2 >= h int e^{2phi/h}|f|^2 dnu.
    variant "three-term": for holomorphic g (passed as f) and a computed
    CarlemanWeight, checks the unweighted three-term bound
    4h^2 M e^{c/2h} int_X |g|^2 + h e^{2C/h} int_K |g|^2 dmu
    >= h rho e^{c/h} int_Y |g|^2.
    """
    h_values = np.atleast_1d(np.asarray(h_values, dtype=np.float64))
    if np.any(h_values <= 0.0):
        raise ValueError("h values must be positive")
    if variant == "dbar":
        lhs, rhs = _dbar_sides(f, phi, laplacian_phi, h_values, domain, resolution)
    elif variant == "three-term":
        if weight is None:
            raise ValueError("three-term variant needs a CarlemanWeight")
        lhs, rhs = _three_term_sides(f, weight, h_values, resolution)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    scale = np.maximum(np.abs(rhs), 1e-300)
    margins = (lhs - rhs) / scale
    passed = bool(np.all(margins >= -tol))
    return CheckResult(
        variant=variant,
        h_values=h_values,
        lhs=lhs,
        rhs=rhs,
        margins=margins,
        tol=tol,
        passed=passed,
    )


def _dbar_sides(f, phi, nu: LaplacianMeasure, h_values, domain, resolution):
    if domain is None:
        raise ValueError("dbar variant needs the domain disk")
    n = int(resolution)
    c, R = domain.center, domain.radius
    ax = c.real + np.linspace(-1.0, 1.0, n) * R
    ay = c.imag + np.linspace(-1.0, 1.0, n) * R
    hx = ax[1] - ax[0]
    hy = ay[1] - ay[0]
    zz = ax[:, None] + 1j * ay[None, :]
    fv = np.asarray(f(zz), dtype=np.complex128).reshape(zz.shape)
    rim = np.abs(zz - c) >= R - 2.0 * max(hx, hy)
    fmax = float(np.abs(fv).max())
    if fmax == 0.0:
        fmax = 1.0
    if float(np.abs(fv[rim]).max()) > 1e-9 * fmax:
        raise ValueError("test function support touches the domain boundary")
    dfdx = np.gradient(fv, hx, axis=0)
    dfdy = np.gradient(fv, hy, axis=1)
    dbar = 0.5 * (dfdx + 1j * dfdy)
    phiv = np.asarray(phi(zz), dtype=np.float64).reshape(zz.shape)
    inside = np.abs(zz - c) < R
    area = hx * hy
    dens = None
    if nu.density is not None:
        dens = np.broadcast_to(
            np.asarray(nu.density(zz), dtype=np.float64), zz.shape
        )
    reg_pts = reg_w = None
    if nu.region is not None and nu.region_scale != 0.0:
        reg_pts, reg_w = _region_quadrature(nu.region, max(64, resolution // 4))
    seg_pts = seg_w = None
    if nu.segments is not None and nu.segment_scale != 0.0:
        seg_pts, seg_w = nu.segments.nodes(max(64, resolution // 2))
    lhs = np.empty(h_values.size)
    rhs = np.empty(h_values.size)
    for i, h in enumerate(h_values):
        wgt = np.exp(2.0 * phiv / h)
        lhs[i] = 4.0 * h * h * float(
            (wgt[inside] * np.abs(dbar[inside]) ** 2).sum() * area
        )
        total = 0.0
        if dens is not None:
            total += float((wgt[inside] * np.abs(fv[inside]) ** 2 * dens[inside]).sum() * area)
        if reg_pts is not None:
            vals = (
                np.exp(2.0 * np.asarray(phi(reg_pts), dtype=np.float64) / h)
                * np.abs(np.asarray(f(reg_pts), dtype=np.complex128)) ** 2
            )
            total += nu.region_scale * float(vals @ reg_w)
        if seg_pts is not None:
            vals = (
                np.exp(2.0 * np.asarray(phi(seg_pts), dtype=np.float64) / h)
                * np.abs(np.asarray(f(seg_pts), dtype=np.complex128)) ** 2
            )
            total += nu.segment_scale * float(vals @ seg_w)
        rhs[i] = h * total
    return lhs, rhs


def _three_term_sides(g, weight: CarlemanWeight, h_values, resolution):
    geom = weight.geometry
    cst = weight.constants
    n_r = max(96, resolution // 4)
    x_pts, x_w = _disk_quadrature(
        DiskRegion(geom.domain_center, geom.domain_radius), n_r, 2 * n_r
    )
    gx = np.abs(np.asarray(g(x_pts), dtype=np.complex128)) ** 2
    int_x = float(gx @ x_w)
    y_pts, y_w = _region_quadrature(geom.inner, n_r)
    gy = np.abs(np.asarray(g(y_pts), dtype=np.complex128)) ** 2
    int_y = float(gy @ y_w)
    k_pts, k_w = geom.measure.nodes(max(128, resolution))
    gk = np.abs(np.asarray(g(k_pts), dtype=np.complex128)) ** 2
    int_k = float(gk @ k_w)
    lhs = np.empty(h_values.size)
    rhs = np.empty(h_values.size)
    for i, h in enumerate(h_values):
        try:
            t1 = 4.0 * h * h * weight.cutoff_bound * math.exp(cst.green_inf / (2.0 * h))
            t2 = h * math.exp(2.0 * cst.potential_sup / h)
            t3 = h * cst.mix_ratio * math.exp(cst.green_inf / h)
        except OverflowError:
            raise ValueError("exponential factors overflow; use a larger h") from None
        if not (np.isfinite(t1) and np.isfinite(t2) and np.isfinite(t3)):
            raise ValueError("exponential factors overflow; use a larger h")
        lhs[i] = t1 * int_x + t2 * int_k
        rhs[i] = t3 * int_y
    return lhs, rhs
