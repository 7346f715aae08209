"""Image-domain and DCT-domain entropy of small gray blocks.

Both entropies are defined on a single 2-D block but are computed here on
stacks of blocks (leading batch axes) so that every micro-lens image of a
light field can be processed in one vectorised pass.  The single-block
functions are thin wrappers over the batched ones, so both paths agree
bit for bit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.fft import dctn

from .errors import EmptyBlock

__all__ = [
    "EntropyPair",
    "batch_frequency_entropy",
    "batch_image_entropy",
    "dct2",
    "frequency_entropy",
    "image_entropy",
    "mli_global_entropy",
]

_GRAY_LEVELS = 256


class EntropyPair(NamedTuple):
    image_entropy: float
    frequency_entropy: float


def _entropy_bits(prob: np.ndarray) -> np.ndarray:
    """Shannon entropy along the last axis, with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(prob > 0, prob * np.log2(np.where(prob > 0, prob, 1.0)), 0.0)
    return np.maximum(-terms.sum(axis=-1), 0.0)


def _as_blocks(blocks) -> np.ndarray:
    arr = np.asarray(blocks)
    if arr.ndim < 2 or arr.shape[-1] == 0 or arr.shape[-2] == 0:
        raise EmptyBlock(f"expected nonempty 2-D blocks, got shape {arr.shape}")
    return arr


def batch_image_entropy(blocks) -> np.ndarray:
    """Gray-level histogram entropy of each trailing 2-D block, in bits."""
    arr = _as_blocks(blocks)
    lead = arr.shape[:-2]
    flat = arr.reshape(-1, arr.shape[-2] * arr.shape[-1]).astype(np.int64)
    n_blocks, n_pix = flat.shape
    if n_blocks == 0:
        return np.zeros(lead)
    offsets = (np.arange(n_blocks, dtype=np.int64) * _GRAY_LEVELS)[:, None]
    counts = np.bincount((flat + offsets).ravel(), minlength=n_blocks * _GRAY_LEVELS)
    prob = counts.reshape(n_blocks, _GRAY_LEVELS) / n_pix
    return _entropy_bits(prob).reshape(lead)


def dct2(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II over the last two axes."""
    arr = _as_blocks(block)
    return dctn(np.asarray(arr, dtype=np.float64), type=2, norm="ortho", axes=(-2, -1))


def batch_frequency_entropy(blocks) -> np.ndarray:
    """Spectral entropy of each block from its normalised AC energy map.

    The probability map is ``C[i, j]**2 / sum(C**2)`` over the non-DC
    coefficients.  Blocks with no AC energy get entropy 0.
    """
    arr = _as_blocks(blocks).astype(np.float64)
    if arr.shape[-1] * arr.shape[-2] < 2:
        raise EmptyBlock("frequency entropy needs at least 2 coefficients")
    lead = arr.shape[:-2]
    # removing the mean only touches DC and makes constant blocks exactly zero
    arr = arr - arr.mean(axis=(-2, -1), keepdims=True)
    coef = dct2(arr)
    energy = (coef * coef).reshape(lead + (-1,))[..., 1:]
    total = energy.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        prob = np.where(total > 0, energy / np.where(total > 0, total, 1.0), 0.0)
    return _entropy_bits(prob)


def image_entropy(block) -> float:
    arr = _as_blocks(block)
    if arr.ndim != 2:
        raise EmptyBlock(f"expected a 2-D block, got shape {arr.shape}")
    return float(batch_image_entropy(arr[None])[0])


def frequency_entropy(block) -> float:
    arr = _as_blocks(block)
    if arr.ndim != 2:
        raise EmptyBlock(f"expected a 2-D block, got shape {arr.shape}")
    return float(batch_frequency_entropy(arr[None])[0])


def mli_global_entropy(mli) -> EntropyPair:
    """Image and frequency entropy of one micro-lens image (array or MicroLensImage)."""
    pixels = getattr(mli, "pixels", mli)
    return EntropyPair(image_entropy(pixels), frequency_entropy(pixels))
