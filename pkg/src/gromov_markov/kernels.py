"""Backend selection for the product-length kernel.

The compiled extension is used when it imports; otherwise the pure-Python
twin.  Setting ``GROMOV_MARKOV_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("GROMOV_MARKOV_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"


def pack_words(words: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Pad words into an int32 matrix plus a lengths vector."""
    lengths = np.fromiter((len(w) for w in words), dtype=np.int32, count=len(words))
    width = max(1, int(lengths.max()) if len(words) else 1)
    mat = np.zeros((len(words), width), dtype=np.int32)
    for i, w in enumerate(words):
        if w:
            mat[i, : len(w)] = w
    return mat, lengths


def product_lengths(
    xs: Sequence[Sequence[int]],
    ys: Sequence[Sequence[int]],
    kernel_data,
    backend=None,
) -> np.ndarray:
    """|x y| for all pairs, via the selected backend."""
    impl = backend if backend is not None else _impl
    gfac, gexp, order = (np.asarray(a, dtype=np.int32) for a in kernel_data)
    X, xl = pack_words(xs)
    Y, yl = pack_words(ys)
    return impl.product_lengths(X, xl, Y, yl, gfac, gexp, order)


def packed_product_lengths(X, xl, Y, yl, kernel_data, backend=None) -> np.ndarray:
    impl = backend if backend is not None else _impl
    gfac, gexp, order = (np.asarray(a, dtype=np.int32) for a in kernel_data)
    return impl.product_lengths(X, xl, Y, yl, gfac, gexp, order)
