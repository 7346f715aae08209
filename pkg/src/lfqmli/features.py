"""Pooling of per-MLI and per-block statistics into a 14-value descriptor.

Layout of the descriptor::

    0..3    mean/skew of MLI image entropy, mean/skew of MLI frequency entropy
    4..9    averaged riu2 LBP histogram of high-range MLIs (bin k = class k)
    10..13  mean/skew of SAI block image entropy, mean/skew of block frequency entropy
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entropy import EntropyPair, batch_frequency_entropy, batch_image_entropy
from .errors import EmptySequence, TooFewValues, TooSmallImage
from .lightfield import LightField, SubApertureImage, extract_sai
from .texture import N_BINS, batch_mli_range, batch_ulbp_histogram

__all__ = [
    "FEATURE_GROUPS",
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureVector",
    "extract_feature_vector",
    "ged_features",
    "mean_skew",
    "parse_subset",
    "percentile_pool",
    "select_features",
    "spatial_quality_features",
    "ulbp_features",
]

FEATURE_NAMES = (
    "ged_mean_ie", "ged_skew_ie", "ged_mean_fe", "ged_skew_fe",
    "ulbp_0", "ulbp_1", "ulbp_2", "ulbp_3", "ulbp_4", "ulbp_5",
    "sq_mean_sie", "sq_skew_sie", "sq_mean_sfe", "sq_skew_sfe",
)  # fmt: skip

FEATURE_GROUPS = {
    "ged": slice(0, 4),
    "ulbp": slice(4, 10),
    "sq": slice(10, 14),
}

BLOCK_SIZE = 8
# MLIs processed per vectorised batch; bounds peak memory on large fields
_MLI_BATCH = 8192


@dataclass(frozen=True)
class FeatureConfig:
    keep: float = 0.6
    threshold: int = 20
    sai: str = "central"

    def __post_init__(self):
        if not 0 < self.keep <= 1:
            raise ValueError(f"keep must lie in (0, 1], got {self.keep}")
        if self.sai not in ("central", "all"):
            raise ValueError(f"sai must be 'central' or 'all', got {self.sai!r}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    ulbp_fallback: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"feature vector must have {len(FEATURE_NAMES)} values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def ged(self) -> np.ndarray:
        return self.values[FEATURE_GROUPS["ged"]]

    @property
    def ulbp(self) -> np.ndarray:
        return self.values[FEATURE_GROUPS["ulbp"]]

    @property
    def sq(self) -> np.ndarray:
        return self.values[FEATURE_GROUPS["sq"]]


def parse_subset(subset: str | Sequence[str] | None) -> tuple[str, ...]:
    """Normalise a group list like ``"ged,sq"``; None means all groups."""
    if subset is None:
        return tuple(FEATURE_GROUPS)
    names = subset.split(",") if isinstance(subset, str) else list(subset)
    names = [n.strip() for n in names if n.strip()]
    unknown = [n for n in names if n not in FEATURE_GROUPS]
    if unknown or not names:
        raise ValueError(f"feature groups must be drawn from {list(FEATURE_GROUPS)}, got {subset!r}")
    # canonical order so the same subset always selects the same columns
    return tuple(g for g in FEATURE_GROUPS if g in names)


def select_features(matrix, subset=None) -> np.ndarray:
    """Keep only the columns of the requested feature groups."""
    groups = parse_subset(subset)
    matrix = np.asarray(matrix, dtype=np.float64)
    cols = np.concatenate([np.arange(14)[FEATURE_GROUPS[g]] for g in groups])
    return matrix[..., cols]


def percentile_pool(values, keep: float = 0.6) -> np.ndarray:
    """Sort and trim ``floor(n * (1 - keep) / 2)`` values from each tail."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    n = arr.size
    if n == 0:
        raise EmptySequence("cannot pool an empty sequence")
    if not 0 < keep <= 1:
        raise ValueError(f"keep must lie in (0, 1], got {keep}")
    drop = int(np.floor(n * (1.0 - keep) / 2.0 + 1e-9))
    return np.sort(arr, kind="stable")[drop : n - drop]


def mean_skew(values) -> tuple[float, float]:
    """Arithmetic mean and population skewness ``m3 / m2**1.5`` (0 when m2 == 0)."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < 3:
        raise TooFewValues(f"skewness needs at least 3 values, got {arr.size}")
    mean = arr.mean()
    dev = arr - mean
    m2 = np.mean(dev * dev)
    m3 = np.mean(dev * dev * dev)
    # a spread this small relative to the mean is rounding noise, not variance
    if m2 <= (1e-14 * max(abs(mean), 1.0)) ** 2:
        return float(mean), 0.0
    return float(mean), float(m3 / m2**1.5)


def _pooled_moments(ie, fe, keep: float) -> np.ndarray:
    m_ie, s_ie = mean_skew(percentile_pool(ie, keep))
    m_fe, s_fe = mean_skew(percentile_pool(fe, keep))
    return np.array([m_ie, s_ie, m_fe, s_fe])


def ged_features(entropies: Sequence[EntropyPair] | np.ndarray, keep: float = 0.6) -> np.ndarray:
    """[mean(IE), skew(IE), mean(FE), skew(FE)] after percentile pooling."""
    arr = np.asarray(entropies, dtype=np.float64)
    if arr.size == 0:
        raise EmptySequence("no MLI entropies to pool")
    arr = arr.reshape(-1, 2)
    return _pooled_moments(arr[:, 0], arr[:, 1], keep)


def ulbp_features(histograms, ranges, threshold: int = 20) -> tuple[np.ndarray, bool]:
    """Average histogram over MLIs whose range exceeds ``threshold``.

    Returns ``(features, fallback)``; when no MLI passes the selector all
    MLIs are averaged and ``fallback`` is True.
    """
    hists = np.asarray(histograms, dtype=np.float64).reshape(-1, N_BINS)
    ranges = np.asarray(ranges).ravel()
    if hists.shape[0] == 0:
        raise EmptySequence("no MLI histograms to pool")
    if ranges.shape[0] != hists.shape[0]:
        raise ValueError(f"{hists.shape[0]} histograms but {ranges.shape[0]} ranges")
    mask = ranges > threshold
    if not mask.any():
        return hists.mean(axis=0), True
    return hists[mask].mean(axis=0), False


def _sai_blocks(pixels: np.ndarray) -> np.ndarray:
    S, T = pixels.shape
    if S < BLOCK_SIZE or T < BLOCK_SIZE:
        raise TooSmallImage(f"sub-aperture image {S}x{T} is smaller than one {BLOCK_SIZE}x{BLOCK_SIZE} block")
    nr, nc = S // BLOCK_SIZE, T // BLOCK_SIZE
    tiles = pixels[: nr * BLOCK_SIZE, : nc * BLOCK_SIZE].reshape(nr, BLOCK_SIZE, nc, BLOCK_SIZE)
    return tiles.swapaxes(1, 2).reshape(nr * nc, BLOCK_SIZE, BLOCK_SIZE)


def spatial_quality_features(sai, keep: float = 0.6) -> np.ndarray:
    """[mean(SIE), skew(SIE), mean(SFE), skew(SFE)] over non-overlapping 8x8 blocks."""
    pixels = np.asarray(getattr(sai, "pixels", sai))
    blocks = _sai_blocks(pixels)
    if blocks.shape[0] < 3:
        raise TooSmallImage(
            f"sub-aperture image {pixels.shape[0]}x{pixels.shape[1]} yields {blocks.shape[0]} "
            f"blocks; at least 3 are needed for skewness"
        )
    return _pooled_moments(batch_image_entropy(blocks), batch_frequency_entropy(blocks), keep)


def _mli_statistics(lf: LightField) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-MLI IE, FE, riu2 histogram and range, in row-major site order."""
    S, T = lf.spatial_shape
    U, V = lf.angular_shape
    stack = lf.mli_stack()
    ie = np.empty(S * T)
    fe = np.empty(S * T)
    hist = np.empty((S * T, N_BINS))
    rng = np.empty(S * T, dtype=np.int64)
    rows = max(1, _MLI_BATCH // T)
    for s0 in range(0, S, rows):
        s1 = min(S, s0 + rows)
        chunk = np.ascontiguousarray(stack[s0:s1]).reshape(-1, U, V)
        sl = slice(s0 * T, s1 * T)
        ie[sl] = batch_image_entropy(chunk)
        fe[sl] = batch_frequency_entropy(chunk)
        hist[sl] = batch_ulbp_histogram(chunk)
        rng[sl] = batch_mli_range(chunk)
    return ie, fe, hist, rng


def extract_feature_vector(lf: LightField, config: FeatureConfig | None = None) -> FeatureVector:
    """Full descriptor of one light field."""
    config = config or FeatureConfig()
    ie, fe, hist, rng = _mli_statistics(lf)
    ged = _pooled_moments(ie, fe, config.keep)
    ulbp, fallback = ulbp_features(hist, rng, config.threshold)

    U, V = lf.angular_shape
    if config.sai == "central":
        sq = spatial_quality_features(extract_sai(lf, U // 2, V // 2), config.keep)
    else:
        sq = np.mean(
            [spatial_quality_features(extract_sai(lf, u, v), config.keep) for u in range(U) for v in range(V)],
            axis=0,
        )
    return FeatureVector(np.concatenate([ged, ulbp, sq]), fallback)
