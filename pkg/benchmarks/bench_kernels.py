"""Benchmark the compiled hot kernels against the numpy reference backend.

Run as a script:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from gcilab._kernels import _ref

try:
    from gcilab._kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jacobi(rng) -> None:
    print(f"{'jacobi_eigh':<18}{'n':>6}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for n in (4, 8, 16, 32):
        a = rng.standard_normal((n, n))
        a = a + a.T
        t_ref = _time(_ref.jacobi_eigh, a)
        if _fast is None:
            print(f"{'':<18}{n:>6}{t_ref * 1e3:>12.3f}{'-':>12}{'-':>10}")
            continue
        t_fast = _time(_fast.jacobi_eigh, a)
        w1, v1 = _ref.jacobi_eigh(a)
        w2, v2 = _fast.jacobi_eigh(a)
        assert np.allclose(np.sort(w1), np.sort(w2), atol=1e-9)
        print(
            f"{'':<18}{n:>6}{t_ref * 1e3:>12.3f}{t_fast * 1e3:>12.3f}"
            f"{t_ref / t_fast:>10.2f}"
        )


def bench_convolve(rng) -> None:
    print(f"{'convolve_direct':<18}{'n':>6}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for n in (256, 1024, 4096):
        f = np.abs(rng.standard_normal(n))
        g = np.abs(rng.standard_normal(n))
        t_ref = _time(_ref.convolve_direct, f, g)
        if _fast is None:
            print(f"{'':<18}{n:>6}{t_ref * 1e3:>12.3f}{'-':>12}{'-':>10}")
            continue
        t_fast = _time(_fast.convolve_direct, f, g)
        assert np.allclose(_ref.convolve_direct(f, g), _fast.convolve_direct(f, g))
        print(
            f"{'':<18}{n:>6}{t_ref * 1e3:>12.3f}{t_fast * 1e3:>12.3f}"
            f"{t_ref / t_fast:>10.2f}"
        )


def main() -> None:
    rng = np.random.default_rng(0)
    if _fast is None:
        print("compiled backend not available; timing the numpy reference only")
    bench_jacobi(rng)
    print()
    bench_convolve(rng)


if __name__ == "__main__":
    main()
