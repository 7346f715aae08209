"""Epsilon-SVR with an RBF kernel, trained by SMO.

The dual is written over ``2n`` variables ``beta = [alpha, alpha*]``::

    min  0.5 beta' Q beta + p' beta
    s.t. sum_t z_t beta_t = 0,   0 <= beta_t <= C

with ``z = [+1]*n + [-1]*n``, ``Q[s, t] = z_s z_t K(x_{s mod n}, x_{t mod n})``
and ``p = [eps - y, eps + y]``.  Each SMO step picks the maximal KKT
violating pair and solves the two-variable subproblem analytically.  The
regression function is ``sum_i (alpha_i - alpha*_i) K(x_i, x) + bias``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DidNotConverge,
    DimensionMismatch,
    EmptyTrainingSet,
    NonFiniteInput,
)

__all__ = [
    "DEFAULT_GRID",
    "DEFAULT_TOL",
    "Hyperparams",
    "ScalingParams",
    "SvrModel",
    "TrainInfo",
    "dual_objective",
    "grid_search_cv",
    "rbf_kernel",
    "scale_apply",
    "scale_fit",
    "svr_predict",
    "svr_train",
]

MAX_PAIR_UPDATES = 10_000_000
# KKT gap at which SMO stops; well below 1e-3 so that the dual objective is
# accurate to 1e-3 in absolute terms even at C = 2^15
DEFAULT_TOL = 1e-5
GRAM_CACHE_LIMIT = 4096
_TAU = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    C: float
    gamma: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")


def default_grid(epsilon: float = 0.1) -> list[Hyperparams]:
    """C in 2^-5..2^15, gamma in 2^-15..2^3 (odd powers), fixed epsilon."""
    Cs = [2.0**k for k in range(-5, 16, 2)]
    gammas = [2.0**k for k in range(-15, 4, 2)]
    return [Hyperparams(C, g, epsilon) for C, g in itertools.product(Cs, gammas)]


DEFAULT_GRID = tuple(default_grid())


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """Per-feature training min/max mapping each feature onto [-1, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("scaling bounds must be 1-D and of equal length")
        if np.any(hi < lo):
            raise ValueError("scaling max must not be below min")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_features(self) -> int:
        return self.lo.size


def scale_fit(train_features) -> ScalingParams:
    X = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyTrainingSet("cannot fit scaling on an empty training matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("training features contain NaN or infinity")
    return ScalingParams(X.min(axis=0), X.max(axis=0))


def scale_apply(params: ScalingParams, x) -> np.ndarray:
    """Affine map to [-1, 1] by training range; constant features map to 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.n_features:
        raise DimensionMismatch(f"expected {params.n_features} features, got {x.shape[-1]}")
    span = params.hi - params.lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, 2.0 * (x - params.lo) / safe - 1.0, 0.0)


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


@dataclass(frozen=True)
class TrainInfo:
    iterations: int
    objective: float
    kkt_gap: float


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    hyperparams: Hyperparams
    scaling: ScalingParams
    info: TrainInfo | None = field(default=None, compare=False)

    @property
    def gamma(self) -> float:
        return self.hyperparams.gamma

    @property
    def C(self) -> float:
        return self.hyperparams.C

    @property
    def epsilon(self) -> float:
        return self.hyperparams.epsilon

    @property
    def n_features(self) -> int:
        return self.scaling.n_features


# -- solver -----------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _kernel_row(K, X, gamma, r, out):
    n = out.shape[0]
    if K.shape[0] > 0:
        for k in range(n):
            out[k] = K[r, k]
    else:
        d = X.shape[1]
        for k in range(n):
            acc = 0.0
            for f in range(d):
                diff = X[r, f] - X[k, f]
                acc += diff * diff
            out[k] = np.exp(-gamma * acc)


@numba.njit(cache=True, nogil=True)
def _smo(K, X, gamma, y, C, eps, tol, max_iter):
    n = y.shape[0]
    l = 2 * n
    z = np.empty(l)
    p = np.empty(l)
    for i in range(n):
        z[i] = 1.0
        z[i + n] = -1.0
        p[i] = eps - y[i]
        p[i + n] = eps + y[i]
    beta = np.zeros(l)
    G = p.copy()
    Ki = np.empty(n)
    Kj = np.empty(n)

    it = 0
    gap = np.inf
    while True:
        # maximal violating pair
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(l):
            v = -z[t] * G[t]
            if (z[t] > 0 and beta[t] < C) or (z[t] < 0 and beta[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (z[t] > 0 and beta[t] > 0) or (z[t] < 0 and beta[t] < C):
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break
        if it >= max_iter:
            return beta, G, it, gap, False
        it += 1

        ri = i % n
        rj = j % n
        _kernel_row(K, X, gamma, ri, Ki)
        _kernel_row(K, X, gamma, rj, Kj)
        Qij = z[i] * z[j] * Ki[rj]
        Qii = Ki[ri]
        Qjj = Kj[rj]
        old_i = beta[i]
        old_j = beta[j]

        if z[i] != z[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = total - C
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = total - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = total
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = total

        di = beta[i] - old_i
        dj = beta[j] - old_j
        zi = z[i]
        zj = z[j]
        for k in range(n):
            a = zi * Ki[k] * di + zj * Kj[k] * dj
            G[k] += a
            G[k + n] -= a
    return beta, G, it, gap, True


def _bias(beta: np.ndarray, G: np.ndarray, C: float) -> float:
    n = beta.size // 2
    z = np.concatenate([np.ones(n), -np.ones(n)])
    yG = z * G
    at_upper = beta >= C
    at_lower = beta <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return -float(yG[free].mean())
    ub = np.concatenate([yG[at_upper & (z < 0)], yG[at_lower & (z > 0)]])
    lb = np.concatenate([yG[at_upper & (z > 0)], yG[at_lower & (z < 0)]])
    ub_v = ub.min() if ub.size else np.inf
    lb_v = lb.max() if lb.size else -np.inf
    return -float((ub_v + lb_v) / 2.0)


def dual_objective(beta, K, y, epsilon: float) -> float:
    """Value of the dual objective at ``beta = [alpha, alpha*]``."""
    beta = np.asarray(beta, dtype=np.float64)
    n = beta.size // 2
    coef = beta[:n] - beta[n:]
    y = np.asarray(y, dtype=np.float64)
    return float(0.5 * coef @ K @ coef + epsilon * beta.sum() - y @ coef)


def _solve(Xs: np.ndarray, y: np.ndarray, hp: Hyperparams, tol: float, max_iter: int):
    n = Xs.shape[0]
    if n <= GRAM_CACHE_LIMIT:
        K = rbf_kernel(Xs, Xs, hp.gamma)
    else:
        K = np.empty((0, 0))
    return _smo(K, Xs, hp.gamma, y, hp.C, hp.epsilon, tol, max_iter), K


def svr_train(
    features,
    targets,
    hp: Hyperparams,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    return_dual: bool = False,
):
    """Fit scaling and an RBF epsilon-SVR on raw features.

    With ``return_dual=True`` also returns the full ``2n`` dual vector.
    ``max_iter`` defaults to the module-level ``MAX_PAIR_UPDATES``.
    """
    if max_iter is None:
        max_iter = MAX_PAIR_UPDATES
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} feature rows but {y.size} targets")
    if y.size < 2:
        raise EmptyTrainingSet(f"need at least 2 training samples, got {y.size}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training data contain NaN or infinity")

    scaling = scale_fit(X)
    Xs = np.ascontiguousarray(scale_apply(scaling, X))
    (beta, G, it, gap, ok), K = _solve(Xs, y, hp, tol, max_iter)
    if not ok:
        raise DidNotConverge(f"SMO hit the cap of {max_iter} pair updates (KKT gap {gap:.3g})")

    n = y.size
    coef = beta[:n] - beta[n:]
    objective = float(0.5 * np.dot(beta, G + np.concatenate([hp.epsilon - y, hp.epsilon + y])))
    sv = coef != 0
    model = SvrModel(
        support_vectors=Xs[sv].copy(),
        dual_coefs=coef[sv].copy(),
        bias=_bias(beta, G, hp.C),
        hyperparams=hp,
        scaling=scaling,
        info=TrainInfo(int(it), objective, float(gap)),
    )
    if return_dual:
        return model, beta
    return model


def svr_predict(model: SvrModel, x) -> np.ndarray | float:
    """Predicted score for one feature vector or each row of a matrix."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    Xs = scale_apply(model.scaling, X)
    if model.dual_coefs.size:
        out = rbf_kernel(Xs, model.support_vectors, model.gamma) @ model.dual_coefs + model.bias
    else:
        out = np.full(X.shape[0], model.bias)
    return float(out[0]) if single else out


# -- model selection --------------------------------------------------------


def _fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=seed))
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=np.intp)
    ids[perm] = np.arange(n) % folds
    return ids


def cross_val_predict(features, targets, hp: Hyperparams, fold_ids: np.ndarray, tol: float = DEFAULT_TOL):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    pred = np.empty_like(y)
    for f in np.unique(fold_ids):
        test = fold_ids == f
        model = svr_train(X[~test], y[~test], hp, tol=tol)
        pred[test] = svr_predict(model, X[test])
    return pred


def grid_search_cv(
    features,
    targets,
    grid: Iterable[Hyperparams] = DEFAULT_GRID,
    folds: int = 5,
    seed: int = 0,
    return_scores: bool = False,
    tol: float = DEFAULT_TOL,
):
    """Pick the grid point with the highest k-fold cross-validated SROCC.

    Out-of-fold predictions are pooled and correlated once with the targets.
    A candidate whose predictions carry no rank information scores -inf.
    Ties go to the smaller C, then the smaller gamma.
    """
    from .evaluation import srocc
    from .errors import DegenerateInput

    grid = list(grid)
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if len(grid) == 1 and not return_scores:
        return grid[0]
    folds = min(folds, y.size)
    ids = _fold_ids(y.size, folds, seed)

    order = sorted(range(len(grid)), key=lambda k: (grid[k].C, grid[k].gamma, grid[k].epsilon))
    scores: dict[Hyperparams, float] = {}
    best = None
    best_score = -np.inf
    for k in order:
        hp = grid[k]
        pred = cross_val_predict(X, y, hp, ids, tol)
        try:
            score = srocc(pred, y)
        except DegenerateInput:
            score = -np.inf
        scores[hp] = score
        if best is None or score > best_score:
            best, best_score = hp, score
    if return_scores:
        return best, scores
    return best
