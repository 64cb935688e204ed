#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallbacks.

Run after building the extension (pip install -e . --no-build-isolation):

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from gwlatent._kernels import _ref

try:
    from gwlatent._kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, *args, repeats=20):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, args_fn, cases):
    print(f"\n{name}")
    print(f"  {'case':<28} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, params in cases:
        args = args_fn(*params)
        t_ref = timeit(getattr(_ref, name), *args)
        if _fast is None:
            print(f"  {label:<28} {t_ref*1e3:9.3f}ms {'-':>10} {'-':>8}")
            continue
        t_fast = timeit(getattr(_fast, name), *args)
        np.testing.assert_allclose(
            getattr(_fast, name)(*args), getattr(_ref, name)(*args), rtol=1e-9, atol=1e-11
        )
        print(f"  {label:<28} {t_ref*1e3:9.3f}ms {t_fast*1e3:9.3f}ms "
              f"{t_ref/t_fast:7.2f}x")


def tconv_args(c_in, c_out, h):
    rng = np.random.default_rng(0)
    return (rng.standard_normal((c_in, h, h)),
            rng.standard_normal((c_in, c_out, 4, 4)),
            rng.standard_normal(c_out))


def inorm_args(c, h):
    rng = np.random.default_rng(1)
    return (rng.standard_normal((c, h, h)), 1e-5,
            rng.standard_normal(c), rng.standard_normal(c))


def band_args(n):
    rng = np.random.default_rng(2)
    return (rng.uniform(0.5, 2.0, (n, n - 1)), rng.uniform(0.5, 2.0, (n - 1, n)))


def main():
    print(f"compiled kernels available: {_fast is not None}")
    bench("tconv2d_k4s2p1", tconv_args, [
        ("layer1 1->512 @6x6", (1, 512, 6)),
        ("layer2 512->256 @12x12", (512, 256, 12)),
        ("layer3 256->128 @24x24", (256, 128, 24)),
        ("layer4 128->1 @48x48", (128, 1, 48)),
        ("toy 8->4 @24x24", (8, 4, 24)),
    ])
    bench("instance_norm2d", inorm_args, [
        ("512ch @12x12", (512, 12)),
        ("128ch @96x96", (128, 96)),
    ])
    bench("flow_band_matrix", band_args, [
        ("grid 48x48", (48,)),
        ("grid 96x96", (96,)),
    ])


if __name__ == "__main__":
    main()
