#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs each hot kernel on representative shapes under both backends and
prints a speedup table. The backend is chosen per subprocess through
HCSENHANCE_NO_NUMBA, because the dispatch is import-time; this driver
spawns one child per backend and merges the results.
"""

import json
import os
import subprocess
import sys
import time

WORKLOADS = [
    ("separable_convolve 128px sigma1", "conv_fine"),
    ("separable_convolve 128px sigma5", "conv_coarse"),
    ("sobel_magnitude 512px", "sobel"),
    ("bilinear_resize 128->84", "resize"),
    ("within_distance r=8 128px", "ring"),
]


def run_workloads() -> dict:
    import numpy as np

    from hcsenhance import imaging
    from hcsenhance.kernels import (backend, bilinear_resize,
                                    separable_convolve, sobel_magnitude,
                                    within_distance)

    rng = np.random.default_rng(0)
    img128 = rng.uniform(0, 255, (128, 128))
    img512 = rng.uniform(0, 255, (512, 512))
    mask = rng.uniform(0, 1, (128, 128)) > 0.97
    taps1 = imaging.gaussian_kernel1d(1.0)
    taps5 = imaging.gaussian_kernel1d(5.0)

    def timeit(fn, repeats=30):
        fn()  # warm-up covers jit compilation
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        return (time.perf_counter() - t0) / repeats

    return {
        "backend": backend(),
        "conv_fine": timeit(lambda: separable_convolve(img128, taps1)),
        "conv_coarse": timeit(lambda: separable_convolve(img128, taps5)),
        "sobel": timeit(lambda: sobel_magnitude(img512)),
        "resize": timeit(lambda: bilinear_resize(img128, 84, 84)),
        "ring": timeit(lambda: within_distance(mask, 8)),
    }


def main() -> None:
    if os.environ.get("_BENCH_CHILD"):
        print(json.dumps(run_workloads()))
        return
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, _BENCH_CHILD="1", HCSENHANCE_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__], env=env,
                             capture_output=True, text=True, check=True)
        data = json.loads(out.stdout.strip().splitlines()[-1])
        results[data["backend"]] = data
    if set(results) != {"numba", "numpy"}:
        print(f"warning: expected both backends, got {sorted(results)}")
    print(f"{'kernel':38s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, key in WORKLOADS:
        t_np = results.get("numpy", {}).get(key)
        t_nb = results.get("numba", {}).get(key)
        if t_np is None or t_nb is None:
            continue
        print(f"{label:38s} {t_np * 1e3:9.3f}ms {t_nb * 1e3:9.3f}ms "
              f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
