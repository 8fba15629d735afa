"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from matvecprobe import _pykernels
from matvecprobe.graph_sketch import MODULUS
from matvecprobe.kernels import pack_bits

try:
    from matvecprobe import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    bits = rng.integers(0, 2, size=(2048, 2048), dtype=np.uint8)
    packed = pack_bits(bits)
    qs = pack_bits(rng.integers(0, 2, size=(64, 2048), dtype=np.uint8))
    u = rng.integers(0, 2, size=2048, dtype=np.uint8)
    bases = rng.integers(2, MODULUS, size=16, dtype=np.uint64)
    n, m = 256, 4000
    pairs = rng.choice(n * (n - 1) // 2, size=m, replace=False)
    iu = np.triu_indices(n, 1)
    heads, tails = iu[1][pairs].astype(np.int64), iu[0][pairs].astype(np.int64)
    vals = rng.integers(0, MODULUS, size=(n * (n - 1) // 2, 32), dtype=np.uint64)
    return {
        "gf2_matmat 2048x2048 @ 64": ("gf2_matmat", (packed, qs)),
        "gf2_vecmat 2048x2048": ("gf2_vecmat", (packed, u)),
        "powmod_table 16 x 32640": ("powmod_table", (bases, n * (n - 1) // 2, MODULUS)),
        "incidence_matmul_mod 4000 edges x 32": (
            "incidence_matmul_mod", (heads, tails, pairs.astype(np.int64), vals, n, MODULUS)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)] + ([("compiled", _ckernels)] if _ckernels else [])
    print(f"{'kernel':40s} " + " ".join(f"{b:>12s}" for b, _ in backends) + "   speedup")
    for label, (name, argv) in cases(rng).items():
        outs, times = [], []
        for _, mod in backends:
            fn = getattr(mod, name)
            outs.append(fn(*argv))
            times.append(min(timeit.repeat(lambda: fn(*argv), number=1, repeat=args.repeat)))
        if len(outs) == 2:
            assert np.array_equal(np.asarray(outs[0]), np.asarray(outs[1])), name
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else "       -"
        print(f"{label:40s} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times) + f"  {speed}")


if __name__ == "__main__":
    main()
