"""Time the compiled and pure-numpy kernels on the same inputs.

    python3 benchmarks/bench_core.py [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend, the
speedup, and whether the outputs agree.
"""

import argparse
import timeit

import numpy as np

from bifurcate._core import _pure

try:
    from bifurcate._core import _fast
except ImportError:
    _fast = None


def cases():
    P = _pure
    x0 = np.linspace(-2.0, 2.0, 2000)
    rng = np.random.default_rng(0)
    X, Y0, Y1 = rng.normal(size=(3, 8191))
    grid = np.linspace(-2.0, 2.0, 101)
    counters = np.arange(1 << 20, dtype=np.uint64)
    return [
        ("counter_uniforms 2^20", lambda m: m.counter_uniforms(7, counters)),
        ("fill_tree depth 16 linear", lambda m: m.fill_tree(7, 16, 0.0, P.LINEAR, 0.4, 1.0, P.LINEAR, 0.3, 0.5,
                                                            P.GAUSSIAN, 1.0, 0.0)),
        ("fill_tree depth 16 tanh", lambda m: m.fill_tree(7, 16, 0.0, P.TANH, 0.8, 0.1, P.TANH, 0.5, -0.1,
                                                          P.UNIFORM, 1.0, 0.0)),
        ("q_chains 2000 x 400", lambda m: m.q_chains(7, x0, 400, 200, P.LINEAR, 0.4, 1.0, P.LINEAR, 0.3, 0.5,
                                                     P.GAUSSIAN, 1.0, 0.0)),
        ("nw_sums 8191 x 101", lambda m: m.nw_sums(X, Y0, Y1, grid, 0.2, P.EPANECHNIKOV)),
    ]


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(u, v, rtol=1e-12, atol=1e-12, equal_nan=True) for u, v in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _fast is None:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first")
        return
    print(f"{'kernel':<28}{'pure [ms]':>12}{'compiled [ms]':>15}{'speedup':>10}  agree")
    for name, fn in cases():
        tp = min(timeit.repeat(lambda: fn(_pure), number=1, repeat=args.repeat)) * 1e3
        tf = min(timeit.repeat(lambda: fn(_fast), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<28}{tp:>12.2f}{tf:>15.2f}{tp / tf:>9.1f}x  {agree(fn(_pure), fn(_fast))}")


if __name__ == "__main__":
    main()
