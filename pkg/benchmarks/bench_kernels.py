"""Compare the compiled stencil kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--grid-n 1024] [--length 40] [--repeat 5]

Prints one line per kernel with the best wall time of each backend, the
speedup and the maximum absolute difference of the outputs.
"""

import argparse
import timeit

import numpy as np

from ruellelab import fixtures
from ruellelab._backend import get_kernels
from ruellelab.grid import sample
from ruellelab.transfer import word_tables


def cases(sys, N, length, rng):
    Jall, Call = word_tables(sys, N)
    J1, C1 = Jall[0], Call[0]
    letters = rng.integers(0, sys.k, length).astype(np.int64)
    f = sample(lambda x: np.cos(2 * np.pi * x) + 0.3 * np.sin(6 * np.pi * x), N)
    mu = np.full(N, 1.0 / N)
    g0 = np.ones(N)

    def orbit(k):
        return k.normalized_orbit(Jall, Call, letters, g0)

    G = orbit(get_kernels("numpy"))[0]
    return {
        "ell_pull": lambda k: k.ell_pull(J1, C1, f),
        "ell_push": lambda k: k.ell_push(J1, C1, mu, N),
        "word_pull": lambda k: k.word_pull(Jall, Call, letters, f, True),
        "normalized_orbit": orbit,
        "quotient_pull": lambda k: k.quotient_pull(Jall, Call, letters, f, g0),
        "quotient_push": lambda k: k.quotient_push(Jall, Call, letters, G, mu),
    }


def _first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid-n", type=int, default=1024)
    ap.add_argument("--length", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fixture", default="cos-potential")
    args = ap.parse_args(argv)

    try:
        fast = get_kernels("cython")
    except ImportError:
        print("compiled extension not built; only the numpy fallback is available")
        return 1
    slow = get_kernels("numpy")
    sys_ = fixtures.build(args.fixture)
    rng = np.random.default_rng(0)
    print(f"fixture={args.fixture} N={args.grid_n} word length={args.length}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(sys_, args.grid_n, args.length, rng).items():
        times = {}
        for label, k in (("numpy", slow), ("cython", fast)):
            number = 3 if name.startswith("ell") else 1
            t = timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)
            times[label] = min(t) / number
        diff = float(np.max(np.abs(_first(fn(slow)) - _first(fn(fast)))))
        print(f"{name:<18}{1e3 * times['numpy']:>12.3f}{1e3 * times['cython']:>13.3f}"
              f"{times['numpy'] / times['cython']:>10.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
