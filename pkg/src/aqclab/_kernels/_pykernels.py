"""Pure numpy implementation of the gather kernels.

Same signatures and accumulation order as the compiled module.
"""
from __future__ import annotations

import numpy as np


def _signs(src: np.ndarray, mask: np.uint64) -> np.ndarray:
    parity = np.bitwise_count(src & mask) & 1
    return 1.0 - 2.0 * parity


def apply_terms(flip, mask, coef, shift, psi, out):
    dim = psi.shape[0]
    z = np.arange(dim, dtype=np.uint64)
    acc = shift * psi
    for f, m, c in zip(flip, mask, coef):
        src = z ^ f
        acc = acc + c * _signs(src, m) * psi[src.astype(np.intp)]
    out[:] = acc


def apply_terms_sector(indices, flip, mask, coef, shift, psi, out):
    dim = indices.shape[0]
    acc = shift * psi
    for f, m, c in zip(flip, mask, coef):
        if f == 0:
            acc = acc + c * _signs(indices, m) * psi
            continue
        src = indices ^ f
        pos = np.searchsorted(indices, src)
        pos[pos == dim] = 0
        hit = indices[pos] == src
        contrib = np.zeros(dim, dtype=np.complex128)
        contrib[hit] = c * _signs(src[hit], m) * psi[pos[hit]]
        acc = acc + contrib
    out[:] = acc
