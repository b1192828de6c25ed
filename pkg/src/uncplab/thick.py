"""Thick (relatively dense) subsets of the periodic box.

A set omega is (R, delta)-thick when every ball of radius R carries at least
a delta fraction of its own measure in omega:

    inf_x  mes(omega intersect B_R(x)) / mes(B_R(x))  >=  delta.

Balls are Euclidean in every dimension, discretized by node membership with
the periodic (minimum-image) metric: the cell at node t belongs to B_R(x)
iff dist(x, t) < R. Both the numerator and denominator use the discrete
cell count times spacing^d, so the full box verifies at exactly delta = 1
and the reported delta is within one-cell slack of the continuum value.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from uncplab import kernels
from uncplab.grids import Grid

_MAGIC = b"UNCPTS01"


@dataclass
class ThickSet:
    """Indicator of a measurable subset of the grid, with verification state.

    verified is None until verify_thickness has run; afterwards it holds
    (R, delta) for the last verified radius.
    """

    grid: Grid
    indicator: np.ndarray
    verified: tuple | None = field(default=None)

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=bool)
        if ind.shape != self.grid.shape:
            raise ValueError(
                f"indicator shape {ind.shape} does not match grid {self.grid.shape}"
            )
        self.indicator = ind

    def measure(self) -> float:
        return float(self.indicator.sum()) * self.grid.spacing**self.grid.dim

    def fraction(self) -> float:
        return float(self.indicator.sum()) / self.grid.n_nodes


def ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    """Integer lattice offsets o with periodic distance |o * spacing| < R."""
    n = grid.points
    h = grid.spacing
    # per-axis minimum-image distance of offset o in {-N/2, ..., N/2-1}
    axis = np.arange(-n // 2, n // 2)
    wrapped = np.minimum(np.abs(axis), n - np.abs(axis)) * h
    grids = np.meshgrid(*([wrapped] * grid.dim), indexing="ij")
    dist2 = np.zeros(grids[0].shape)
    for g in grids:
        dist2 += g * g
    inside = dist2 < radius * radius
    coords = np.meshgrid(*([axis] * grid.dim), indexing="ij")
    return np.stack([c[inside] for c in coords], axis=1).astype(np.int64)


def verify_thickness(ts: ThickSet, radius: float) -> float:
    """Exact discrete thickness constant delta at radius R; records it on ts.

    delta = min over all grid positions x of the node count of
    omega intersect B_R(x) divided by the node count of B_R(x). Requires
    R >= 2 * spacing so the discretized ball is nondegenerate.
    """
    if radius < 2.0 * ts.grid.spacing:
        raise ValueError(
            f"R = {radius} must be >= 2 * spacing = {2.0 * ts.grid.spacing}"
        )
    offsets = ball_offsets(ts.grid, radius)
    stencil = offsets.shape[0]
    min_count = kernels.window_min_count(
        np.ascontiguousarray(ts.indicator, dtype=np.uint8), offsets
    )
    delta = float(min_count) / float(stencil)
    ts.verified = (float(radius), delta)
    return delta


def generate_set(grid: Grid, mode: str, **params) -> ThickSet:
    """Construct a thick set.

    mode='periodic': params gamma in (0, 1], a with 0 < a <= length/4.
        omega = union_k [k a, k a + gamma a) per axis (cubes in d > 1),
        realized by node membership. Exact lattice, deterministic.
    mode='random': params density in (0, 1), seed, blob_radius > 0, optional
        verify_radius (default length/8). Union of balls at seeded uniform
        centers until the target density is reached, then verified.
    """
    if mode == "periodic":
        return _periodic_set(grid, **params)
    if mode == "random":
        return _random_set(grid, **params)
    raise ValueError(f"unknown mode {mode!r}, expected 'periodic' or 'random'")


def _periodic_set(grid: Grid, gamma: float, a: float) -> ThickSet:
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if not (0.0 < a <= grid.length / 4.0):
        raise ValueError(f"a must satisfy 0 < a <= length/4, got {a}")
    member = np.ones(grid.shape, dtype=bool)
    # half-open [k a, k a + gamma a): guard the upper edge against roundoff
    cut = gamma * a * (1.0 - 1e-12)
    for c in grid.coords():
        member &= np.mod(c, a) < cut
    if not member.any():
        raise ValueError("periodic parameters yield an empty set")
    return ThickSet(grid, member)


def _random_set(
    grid: Grid,
    density: float,
    seed: int,
    blob_radius: float,
    verify_radius: float | None = None,
) -> ThickSet:
    if not (0.0 < density < 1.0):
        raise ValueError(f"density must be in (0, 1), got {density}")
    if blob_radius <= 0.0:
        raise ValueError(f"blob_radius must be positive, got {blob_radius}")
    rng = np.random.default_rng(seed)
    member = np.zeros(grid.shape, dtype=bool)
    coords = grid.coords()
    target = density * grid.n_nodes
    for _ in range(100_000):
        if member.sum() >= target:
            break
        center = rng.uniform(0.0, grid.length, size=grid.dim)
        dist2 = np.zeros(grid.shape)
        for ax, c in enumerate(coords):
            d = np.abs(c - center[ax])
            d = np.minimum(d, grid.length - d)  # periodic wrap
            dist2 += d * d
        member |= dist2 < blob_radius * blob_radius
    if not member.any():
        raise ValueError("random parameters yield an empty set")
    ts = ThickSet(grid, member)
    verify_thickness(ts, verify_radius if verify_radius is not None else grid.length / 8.0)
    return ts


# ---------------------------------------------------------------------------
# serialization


def _runs(indicator: np.ndarray):
    """Maximal runs of True in a 1D bool array as (start, length) pairs."""
    idx = np.flatnonzero(indicator)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    ends = np.concatenate((idx[breaks], [idx[-1]]))
    return [(int(s), int(e - s + 1)) for s, e in zip(starts, ends)]


def write_thickset_csv(path, ts: ThickSet, config_hash: str | None = None) -> None:
    """Run-length-encoded CSV for 1D sets: metadata comment, then start,length."""
    if ts.grid.dim != 1:
        raise ValueError("RLE CSV serialization is defined for 1D sets only")
    radius, delta = ts.verified if ts.verified is not None else (float("nan"),) * 2
    with open(path, "w", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_sha256={config_hash}\n")
        fh.write(
            f"# dim={ts.grid.dim} length={ts.grid.length!r} "
            f"points={ts.grid.points} R={radius!r} delta={delta!r}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["start", "length"])
        for start, length in _runs(ts.indicator):
            writer.writerow([start, length])


def read_thickset_csv(path) -> ThickSet:
    from uncplab.grids import make_grid

    with open(path, newline="") as fh:
        meta = fh.readline()
        while meta.startswith("# config_sha256="):
            meta = fh.readline()
        if not meta.startswith("# "):
            raise ValueError(f"{path}: missing metadata line")
        fields = dict(tok.split("=", 1) for tok in meta[2:].split())
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["start", "length"]:
            raise ValueError(f"{path}: unexpected header {header}")
        grid = make_grid(int(fields["dim"]), float(fields["length"]), int(fields["points"]))
        ind = np.zeros(grid.shape, dtype=bool)
        for row in reader:
            start, length = int(row[0]), int(row[1])
            ind[start : start + length] = True
    radius, delta = float(fields["R"]), float(fields["delta"])
    verified = None if np.isnan(radius) else (radius, delta)
    return ThickSet(grid, ind, verified)


def write_thickset(path, ts: ThickSet) -> None:
    """Packed-bitmask binary: magic, header (dim, length, points, R, delta),
    then np.packbits of the row-major indicator."""
    radius, delta = ts.verified if ts.verified is not None else (float("nan"),) * 2
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qdqdd", ts.grid.dim, ts.grid.length, ts.grid.points, radius, delta))
        fh.write(np.packbits(ts.indicator.ravel()).tobytes())


def read_thickset(path) -> ThickSet:
    from uncplab.grids import make_grid

    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a thick-set file (bad magic {magic!r})")
        dim, length, points, radius, delta = struct.unpack("<qdqdd", fh.read(40))
        grid = make_grid(dim, length, points)
        packed = np.frombuffer(fh.read(), dtype=np.uint8)
    bits = np.unpackbits(packed)[: grid.n_nodes].astype(bool)
    verified = None if np.isnan(radius) else (radius, delta)
    return ThickSet(grid, bits.reshape(grid.shape), verified)


def brute_force_delta(ts: ThickSet, radius: float) -> float:
    """Reference sliding-window scan without the kernel layer (oracle use)."""
    offsets = ball_offsets(ts.grid, radius)
    n = ts.grid.points
    best = None
    flat = ts.indicator
    for pos in product(*(range(n) for _ in range(ts.grid.dim))):
        count = 0
        for off in offsets:
            idx = tuple((pos[ax] + int(off[ax])) % n for ax in range(ts.grid.dim))
            count += bool(flat[idx])
        best = count if best is None else min(best, count)
    return best / offsets.shape[0]
