"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from pseudomask import kernels


def cases(size, rng):
    img = rng.integers(0, 256, size=(size, size), dtype=np.uint8)
    blobs = rng.random((size, size)) < 0.45
    yield "local_entropy r=3", lambda b: kernels.local_entropy(img, 3, backend=b)
    yield "local_entropy r=9", lambda b: kernels.local_entropy(img, 9, backend=b)
    yield "label conn=8", lambda b: kernels.label(blobs, 8, backend=b)
    yield "fill_holes", lambda b: kernels.fill_holes(blobs, backend=b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = sorted(kernels.BACKENDS)
    print(f"{args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<20}" + "".join(f"{b + ' ms':>14}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.size, np.random.default_rng(0)):
        ms = {b: 1e3 * min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends}
        speed = ms["python"] / ms["cython"] if "cython" in ms else float("nan")
        print(f"{name:<20}" + "".join(f"{ms[b]:>14.2f}" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
