"""Timing comparison of the compiled kernel core against the numpy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py

Each kernel is timed on a representative workload (sizes match the largest
cases the test suite and CLI exercise). The script reports both backends
side by side when the extension is importable, and verifies that the two
backends agree on every workload before trusting the timings.
"""

from __future__ import annotations

import time

import numpy as np

from uncplab import kernels


def _time(fn, repeat: int = 5) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)

    ind1 = rng.random(4096) < 0.5
    offs1 = np.arange(-128, 129, dtype=np.int64)[:, None]

    ind2 = rng.random((128, 128)) < 0.5
    span = np.arange(-10, 11, dtype=np.int64)
    ox, oy = np.meshgrid(span, span, indexing="ij")
    keep = ox**2 + oy**2 <= 100
    offs2 = np.stack([ox[keep], oy[keep]], axis=1)

    tx = rng.standard_normal(20000)
    ty = rng.standard_normal(20000) * 0.1
    edges = np.linspace(0.0, 1.0, 257)
    lo, hi = edges[:-1], edges[1:]
    w = rng.random(256)

    x = rng.standard_normal(1500) * 0.2 + 1j * rng.standard_normal(1500) * 0.2
    y = rng.standard_normal(1500) * 0.2 + 1j * rng.standard_normal(1500) * 0.2
    xr, xi = np.ascontiguousarray(x.real), np.ascontiguousarray(x.imag)
    yr, yi = np.ascontiguousarray(y.real), np.ascontiguousarray(y.imag)

    return [
        (
            "window_min_count 1d (4096 nodes, 257 offsets)",
            lambda k: k.window_min_count_py(ind1, offs1),
            lambda: kernels._compiled.window_min_count_1d(
                np.ascontiguousarray(ind1, dtype=np.uint8), offs1[:, 0]
            ),
        ),
        (
            "window_min_count 2d (128^2 nodes, 317 offsets)",
            lambda k: k.window_min_count_py(ind2, offs2),
            lambda: kernels._compiled.window_min_count_2d(
                np.ascontiguousarray(ind2, dtype=np.uint8), offs2
            ),
        ),
        (
            "segment_log_sum (20000 targets x 256 cells)",
            lambda k: k.segment_log_sum_py(tx, ty, lo, hi, w),
            lambda: kernels._compiled.segment_log_sum(tx, ty, lo, hi, w),
        ),
        (
            "green_pair_min (1500 x 1500 pairs)",
            lambda k: k.green_pair_min_py(x, y, 1.0),
            lambda: kernels._compiled.green_pair_min(xr, xi, yr, yi, 1.0),
        ),
    ]


def main() -> None:
    has_ext = kernels._compiled is not None
    print(f"active backend: {kernels.backend_name()}")
    if not has_ext:
        print("extension not built; timing the numpy fallback only\n")
    header = f"{'kernel':<48} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, py_fn, ext_fn in workloads():
        t_py = _time(lambda: py_fn(kernels))
        if has_ext:
            ref = py_fn(kernels)
            got = ext_fn()
            if isinstance(ref, np.ndarray):
                agree = np.allclose(ref, got, rtol=1e-12, atol=1e-12)
            else:
                agree = np.isclose(float(ref), float(got), rtol=1e-12, atol=1e-12)
            if not agree:
                raise AssertionError(f"backend mismatch on {name}")
            t_ext = _time(ext_fn)
            print(f"{name:<48} {t_py * 1e3:>8.2f}ms {t_ext * 1e3:>8.2f}ms {t_py / t_ext:>7.1f}x")
        else:
            print(f"{name:<48} {t_py * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
