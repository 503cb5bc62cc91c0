"""Benchmark the compiled depth-wise conv kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--size N,C,H,W] [--repeats R]

Covers the three kernel entry points plus a NAFBlock forward pass running
through each backend (the dispatch module is patched in place, which is
safe because the engine resolves kernels at call time).
"""

import argparse
import time

import numpy as np

import mhnet.kernels as kernels
from mhnet.kernels import fallback


def _time(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_kernels(shape, repeats):
    n, c, h, w = shape
    rng = np.random.default_rng(0)
    x = rng.standard_normal(shape).astype(np.float32)
    wgt = rng.standard_normal((c, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(c).astype(np.float32)
    grad = rng.standard_normal(shape).astype(np.float32)

    cases = [
        ("forward", lambda m: m.dwconv3x3_forward(x, wgt, bias)),
        ("backward_input", lambda m: m.dwconv3x3_backward_input(grad, wgt)),
        ("backward_weight", lambda m: m.dwconv3x3_backward_weight(grad, x)),
    ]
    print(f"dwconv3x3 on {shape}, averaged over {repeats} runs")
    print(f"{'kernel':>16} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}")
    for name, call in cases:
        t_np = _time(lambda: call(fallback), repeats) * 1e3
        if kernels.HAVE_COMPILED:
            t_cy = _time(lambda: call(kernels), repeats) * 1e3
            print(f"{name:>16} {t_np:12.3f} {t_cy:14.3f} {t_np / t_cy:8.2f}x")
        else:
            print(f"{name:>16} {t_np:12.3f} {'(not built)':>14} {'-':>9}")


def bench_block(shape, repeats):
    from mhnet.blocks import NAFBlockParams, naf_block
    from mhnet.tensor import Tensor

    n, c, h, w = shape
    p = NAFBlockParams.create(c, np.random.default_rng(1))
    x = Tensor(np.random.default_rng(2).standard_normal(shape).astype(np.float32))

    originals = {name: getattr(kernels, name) for name in
                 ("dwconv3x3_forward", "dwconv3x3_backward_input",
                  "dwconv3x3_backward_weight")}

    def with_backend(module):
        for name in originals:
            setattr(kernels, name, getattr(module, name))

    try:
        with_backend(fallback)
        t_np = _time(lambda: naf_block(x, p), repeats) * 1e3
        if kernels.HAVE_COMPILED:
            from mhnet.kernels import _cykernels

            with_backend(_cykernels)
            t_cy = _time(lambda: naf_block(x, p), repeats) * 1e3
            print(f"\nNAFBlock forward {shape}: numpy {t_np:.3f} ms, "
                  f"compiled {t_cy:.3f} ms ({t_np / t_cy:.2f}x)")
        else:
            print(f"\nNAFBlock forward {shape}: numpy {t_np:.3f} ms (compiled not built)")
    finally:
        for name, fn in originals.items():
            setattr(kernels, name, fn)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", default="2,64,128,128")
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()
    shape = tuple(int(v) for v in args.size.split(","))
    print(f"active backend: {kernels.backend()}")
    bench_kernels(shape, args.repeats)
    bench_block(shape, args.repeats)


if __name__ == "__main__":
    main()
