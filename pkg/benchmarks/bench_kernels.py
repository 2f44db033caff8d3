"""Compiled kernels against their pure-Python twins.

Runs each kernel on the same inputs with both backends, checks that the
outputs agree and prints the timings::

    python benchmarks/bench_kernels.py [--radius 5] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gromov_markov import _kernels_py, enumerate_ball, free_group, modular_group
from gromov_markov.ball import distance_matrix
from gromov_markov.kernels import pack_words

try:
    from gromov_markov import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def product_case(G, radius: int):
    words = enumerate_ball(G, radius).words
    inv = [G.invert(x) for x in words]
    X, xl = pack_words(inv)
    Y, yl = pack_words(words)
    data = [np.asarray(a, dtype=np.int32) for a in G.kernel_data()]
    return f"product_lengths {G.name} r={radius} ({len(words)}^2 pairs)", lambda impl: impl.product_lengths(X, xl, Y, yl, *data)


def triangle_case(G, radius: int):
    ball = enumerate_ball(G, radius)
    n = ball.sphere_start[radius + 1]
    D = np.ascontiguousarray(distance_matrix(G, ball.words[:n]), dtype=np.int32)
    right = np.ascontiguousarray(ball.right[:n], dtype=np.int32)
    right = np.where(right < n, right, -1).astype(np.int32)
    return f"slim_triangles {G.name} r={radius} ({n} elements)", lambda impl: impl.slim_triangles(D, right, 0, 4)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("the compiled extension is not built; run `pip install -e . --no-build-isolation`")
    cases = [
        product_case(free_group(2), args.radius),
        product_case(modular_group(), args.radius + 3),
        triangle_case(free_group(2), args.radius - 1),
        triangle_case(modular_group(), args.radius + 3),
    ]
    print(f"{'kernel':<48} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for name, run in cases:
        tc, oc = best_of(lambda: run(compiled), args.repeat)
        tp, op = best_of(lambda: run(_kernels_py), 1)
        same = np.array_equal(np.asarray(oc), np.asarray(op)) if isinstance(oc, np.ndarray) else tuple(oc) == tuple(op)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<48} {tc:>9.4f}s {tp:>9.3f}s {tp / tc:>7.0f}x")


if __name__ == "__main__":
    main()
