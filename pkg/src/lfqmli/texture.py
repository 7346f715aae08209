"""Rotation-invariant uniform LBP (P=4, R=1) and micro-lens range.

The four neighbours sit on the pixel grid at unit distance, taken
circularly as right, up, left, down.  Each neighbour contributes the bit
``g_p >= g_c``.  Patterns with at most two circular 0/1 transitions are
uniform and map to their number of set bits (0..4); the remaining ones
(``0101`` and ``1010``) share class 5, giving ``P + 2 = 6`` bins.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import TooSmallMli

__all__ = [
    "N_BINS",
    "batch_mli_range",
    "batch_ulbp_histogram",
    "lbp_riu2_code",
    "mli_range",
    "ulbp_histogram",
]

P = 4
N_BINS = P + 2


def _riu2_class(bits: Sequence[int]) -> int:
    transitions = sum(bits[p] != bits[(p + 1) % P] for p in range(P))
    return sum(bits) if transitions <= 2 else P + 1


# code = sum(b_p << p) -> riu2 class
_RIU2_TABLE = np.array(
    [_riu2_class([(code >> p) & 1 for p in range(P)]) for code in range(1 << P)], dtype=np.intp
)


def lbp_riu2_code(center: int, neighbors: Sequence[int]) -> int:
    """Class index in [0, 5] for one centre pixel and its (right, up, left, down) neighbours."""
    if len(neighbors) != P:
        raise ValueError(f"expected {P} neighbours, got {len(neighbors)}")
    code = 0
    for p, g in enumerate(neighbors):
        code |= int(int(g) - int(center) >= 0) << p
    return int(_RIU2_TABLE[code])


def batch_ulbp_histogram(mlis) -> np.ndarray:
    """Normalised 6-bin riu2 histograms for a stack of images ``(..., U, V)``."""
    arr = np.asarray(mlis)
    if arr.ndim < 2:
        raise TooSmallMli(f"expected 2-D images, got shape {arr.shape}")
    U, V = arr.shape[-2:]
    if U < 3 or V < 3:
        raise TooSmallMli(f"need at least 3x3 angular samples for R=1, got {U}x{V}")
    g = arr.astype(np.int16)
    center = g[..., 1:-1, 1:-1]
    neighbours = (
        g[..., 1:-1, 2:],   # right
        g[..., :-2, 1:-1],  # up
        g[..., 1:-1, :-2],  # left
        g[..., 2:, 1:-1],   # down
    )
    code = np.zeros(center.shape, dtype=np.intp)
    for p, nb in enumerate(neighbours):
        code |= (nb >= center).astype(np.intp) << p
    classes = _RIU2_TABLE[code]

    lead = arr.shape[:-2]
    flat = classes.reshape(-1, classes.shape[-2] * classes.shape[-1])
    n, m = flat.shape
    offsets = (np.arange(n, dtype=np.intp) * N_BINS)[:, None]
    counts = np.bincount((flat + offsets).ravel(), minlength=n * N_BINS).reshape(n, N_BINS)
    return (counts / m).reshape(lead + (N_BINS,))


def ulbp_histogram(mli) -> np.ndarray:
    pixels = np.asarray(getattr(mli, "pixels", mli))
    if pixels.ndim != 2:
        raise TooSmallMli(f"expected a 2-D micro-lens image, got shape {pixels.shape}")
    return batch_ulbp_histogram(pixels[None])[0]


def batch_mli_range(mlis) -> np.ndarray:
    arr = np.asarray(mlis)
    return arr.max(axis=(-2, -1)).astype(np.int64) - arr.min(axis=(-2, -1)).astype(np.int64)


def mli_range(mli) -> int:
    """Max minus min gray value of one micro-lens image."""
    pixels = np.asarray(getattr(mli, "pixels", mli))
    return int(pixels.max()) - int(pixels.min())
