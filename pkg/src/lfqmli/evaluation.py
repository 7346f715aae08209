"""Correlation metrics and the randomised train/test trial protocol."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.stats import rankdata

from .errors import DegenerateInput, DimensionMismatch, TooFewSamples
from .svr import DEFAULT_GRID, DEFAULT_TOL, Hyperparams, grid_search_cv, svr_predict, svr_train

__all__ = [
    "TrialReport",
    "TrialResult",
    "lcc",
    "logistic_map",
    "lower_median",
    "rmse",
    "run_trials",
    "split_rows",
    "srocc",
    "trial_rng",
]

log = logging.getLogger(__name__)


def _pair(a, b, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionMismatch(f"sequences differ in length: {a.size} vs {b.size}")
    if a.size < min_len:
        raise DegenerateInput(f"need at least {min_len} values, got {a.size}")
    return a, b


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    saa = np.dot(da, da)
    sbb = np.dot(db, db)
    if saa <= 0 or sbb <= 0:
        raise DegenerateInput("correlation undefined for a constant sequence")
    r = np.dot(da, db) / np.sqrt(saa * sbb)
    return float(np.clip(r, -1.0, 1.0))


def srocc(a, b) -> float:
    """Spearman rank correlation with mid-ranks for ties."""
    a, b = _pair(a, b, 2)
    return _pearson(rankdata(a, method="average"), rankdata(b, method="average"))


def lcc(a, b) -> float:
    """Pearson linear correlation coefficient."""
    a, b = _pair(a, b, 2)
    return _pearson(a, b)


def rmse(a, b) -> float:
    a, b = _pair(a, b, 1)
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def _logistic4(x, b1, b2, b3, b4):
    return (b1 - b2) / (1.0 + np.exp(-(x - b3) / np.abs(b4))) + b2


def logistic_map(pred, mos) -> np.ndarray:
    """Fit a 4-parameter logistic from predictions to MOS and apply it.

    Falls back to the raw predictions if the fit does not converge.
    """
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    spread = pred.std()
    p0 = [mos.max(), mos.min(), pred.mean(), spread if spread > 0 else 1.0]
    try:
        with warnings.catch_warnings():
            # only the parameters are used, not their covariance
            warnings.simplefilter("ignore", OptimizeWarning)
            params, _ = curve_fit(_logistic4, pred, mos, p0=p0, maxfev=10000)
    except (RuntimeError, ValueError):
        return pred
    out = _logistic4(pred, *params)
    return out if np.all(np.isfinite(out)) else pred


def lower_median(values) -> float:
    """Median that picks the lower middle element for even counts."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise ValueError("median of an empty sequence")
    return float(arr[(arr.size - 1) // 2])


@dataclass(frozen=True)
class TrialResult:
    srocc: float
    lcc: float
    rmse: float
    hyperparams: Hyperparams | None = None


@dataclass(frozen=True)
class TrialReport:
    per_trial: tuple[TrialResult, ...]
    seed: int
    median_srocc: float = field(init=False)
    median_lcc: float = field(init=False)
    median_rmse: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "median_srocc", lower_median([t.srocc for t in self.per_trial]))
        object.__setattr__(self, "median_lcc", lower_median([t.lcc for t in self.per_trial]))
        object.__setattr__(self, "median_rmse", lower_median([t.rmse for t in self.per_trial]))

    @property
    def trial_count(self) -> int:
        return len(self.per_trial)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Philox stream for one trial; the 128-bit key is ``seed << 64 | trial``."""
    if not (0 <= seed < 2**64 and 0 <= trial < 2**64):
        raise ValueError("seed and trial index must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(trial)))


def split_rows(
    n: int,
    train_fraction: float,
    rng: np.random.Generator,
    groups: Sequence[str] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Random train/test index split.

    With ``groups`` (e.g. scene labels) whole groups go to one side so that
    no content is shared between train and test.
    """
    if groups is None:
        perm = rng.permutation(n)
        n_train = int(round(train_fraction * n))
        n_train = min(max(n_train, 2), n - 1)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    groups = np.asarray(groups)
    labels = np.unique(groups)
    if labels.size < 2:
        raise TooFewSamples("scene split needs at least 2 distinct scenes")
    perm = rng.permutation(labels.size)
    n_train = min(max(int(round(train_fraction * labels.size)), 1), labels.size - 1)
    train_labels = labels[perm[:n_train]]
    mask = np.isin(groups, train_labels)
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def _safe(metric, a, b) -> float:
    try:
        return metric(a, b)
    except DegenerateInput:
        # constant predictions carry no rank or linear information
        return 0.0


def _one_trial(X, y, t, seed, train_fraction, grid, groups, folds, logistic, tol) -> TrialResult:
    rng = trial_rng(seed, t)
    train, test = split_rows(y.size, train_fraction, rng, groups)
    cv_seed = int(rng.integers(0, 2**63))
    hp = grid_search_cv(X[train], y[train], grid, folds=folds, seed=cv_seed, tol=tol)
    model = svr_train(X[train], y[train], hp, tol=tol)
    pred = np.atleast_1d(svr_predict(model, X[test]))
    mapped = logistic_map(pred, y[test]) if logistic else pred
    return TrialResult(
        srocc=_safe(srocc, pred, y[test]),
        lcc=_safe(lcc, mapped, y[test]),
        rmse=rmse(mapped, y[test]),
        hyperparams=hp,
    )


def run_trials(
    features,
    mos,
    trials: int = 1000,
    train_fraction: float = 0.8,
    seed: int = 0,
    grid: Iterable[Hyperparams] = DEFAULT_GRID,
    groups: Sequence[str] | None = None,
    folds: int = 5,
    logistic: bool = False,
    jobs: int = 1,
    tol: float = DEFAULT_TOL,
) -> TrialReport:
    """Repeat random split, fit on train, score on test; report medians.

    Scaling, model selection and the final fit only ever see the training
    rows of a trial.  Results depend only on ``seed``, not on ``jobs``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} feature rows but {y.size} scores")
    if y.size < 5:
        raise TooFewSamples(f"need at least 5 rows, got {y.size}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    grid = list(grid)

    def work(t):
        res = _one_trial(X, y, t, seed, train_fraction, grid, groups, folds, logistic, tol)
        log.debug("trial %d: srocc=%.4f lcc=%.4f rmse=%.4f", t, res.srocc, res.lcc, res.rmse)
        return res

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, range(trials)))
    else:
        results = [work(t) for t in range(trials)]
    return TrialReport(tuple(results), seed)
