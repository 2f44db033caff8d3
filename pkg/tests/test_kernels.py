import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gromov_markov import _kernels_py, enumerate_ball, free_group, modular_group
from gromov_markov.ball import distance_matrix
from gromov_markov.kernels import BACKEND, pack_words, product_lengths

try:
    from gromov_markov import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

F2, MOD = free_group(2), modular_group()


def words(G, n=12):
    return st.lists(st.lists(st.integers(0, G.rank - 1), max_size=n).map(G.normal_form), min_size=1, max_size=8)


def oracle(G, xs, ys):
    return np.array([[G.length(G.multiply(x, y)) for y in ys] for x in xs], dtype=np.int32)


@pytest.mark.parametrize("G", [F2, MOD], ids=["F2", "Z2*Z3"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_python_kernel_matches_group(G, data):
    xs = data.draw(words(G))
    ys = data.draw(words(G))
    got = product_lengths(xs, ys, G.kernel_data(), backend=_kernels_py)
    assert np.array_equal(got, oracle(G, xs, ys))


@needs_compiled
@pytest.mark.parametrize("G", [F2, MOD], ids=["F2", "Z2*Z3"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_backends_agree_on_products(G, data):
    xs = data.draw(words(G))
    ys = data.draw(words(G))
    a = product_lengths(xs, ys, G.kernel_data(), backend=compiled)
    b = product_lengths(xs, ys, G.kernel_data(), backend=_kernels_py)
    assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("G,r", [(F2, 3), (MOD, 6)], ids=["F2", "Z2*Z3"])
def test_backends_agree_on_triangles(G, r):
    ball = enumerate_ball(G, r)
    n = ball.sphere_start[r + 1]
    D = np.ascontiguousarray(distance_matrix(G, ball.words[:n]), dtype=np.int32)
    right = np.ascontiguousarray(ball.right[:n], dtype=np.int32)
    right = np.where(right < n, right, -1).astype(np.int32)
    a = compiled.slim_triangles(D, right, 0, 4)
    b = _kernels_py.slim_triangles(D, right, 0, 4)
    assert tuple(a) == tuple(b)


def test_pack_words():
    X, lengths = pack_words([(1, 2), (), (3,)])
    assert X.shape == (3, 2) and list(lengths) == [2, 0, 1]
    assert X[0].tolist() == [1, 2] and X[2].tolist() == [3, 0]


def test_backend_is_reported():
    assert BACKEND in ("compiled", "python")
    if compiled is not None:
        assert BACKEND == "compiled"


def test_fallback_can_be_forced():
    env = dict(os.environ, GROMOV_MARKOV_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "import gromov_markov as g; print(g.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
