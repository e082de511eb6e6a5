"""Double/debiased estimation of a scalar effect with OGA+HDAIC nuisances.

Both orthogonal scores used here are affine in ``theta``::

    PLR: psi = (y - x'gamma - theta (d - x'beta)) (d - x'beta)
    IV:  psi = (y - x'gamma - theta (d - x'zeta)) (z - x'beta)

so every estimator reduces to residual vectors ``w`` (instrument residual;
the treatment residual in the PLR case), ``v`` (treatment residual) and
``e`` (outcome residual), with the root ``theta = sum(w e) / sum(w v)`` and
the sandwich variance ``mean(psi^2) / mean(w v)^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegenerateTreatmentVariation,
    EmptyList,
    GreedyDMLError,
    TooFewObservations,
    WeakIdentification,
)
from .oga import compute_m_star, fit_nuisance
from .types import Dataset, DmlConfig, EstimateResult, NuisanceFit, SelectionConfig

__all__ = [
    "FoldPlan",
    "ScoreKind",
    "make_folds",
    "score_plr",
    "score_iv",
    "plr_estimate",
    "iv_estimate",
    "plr_estimate_nocf",
    "median_adjust",
    "repetition_seed",
]

NuisanceFitter = Callable[[NDArray[np.float64], NDArray[np.float64], SelectionConfig], NuisanceFit]

MIN_FOLD_SIZE = 20
# relative threshold below which the score's slope counts as zero
DEGENERACY_RTOL = 1e-12


class ScoreKind(enum.Enum):
    PLR = "plr"
    IV = "iv"

    @property
    def requires_instrument(self) -> bool:
        return self is ScoreKind.IV


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of each observation to one of ``K`` cross-fitting folds."""

    assignments: NDArray[np.intp]
    K: int

    def test_mask(self, k: int) -> NDArray[np.bool_]:
        return self.assignments == k

    def sizes(self) -> NDArray[np.intp]:
        return np.bincount(self.assignments, minlength=self.K)


def make_folds(N: int, K: int, seed: int) -> FoldPlan:
    """Uniformly random balanced partition of ``range(N)`` into ``K`` folds.

    The permutation is a Fisher-Yates shuffle drawn from a PCG64 generator
    seeded with ``seed``; position ``i`` of the shuffled index list goes to
    fold ``i mod K``, so fold sizes differ by at most one.
    """
    if K < 2:
        raise TooFewObservations(f"need at least 2 folds, got {K}")
    if N < 2 * K:
        raise TooFewObservations(f"N={N} is too small for K={K} folds")
    perm = np.random.default_rng(seed).permutation(N)
    assignments = np.empty(N, dtype=np.intp)
    assignments[perm] = np.arange(N) % K
    return FoldPlan(assignments=assignments, K=K)


def score_plr(y, d, x_gamma, x_beta, theta):
    """Partially linear orthogonal score; works elementwise on arrays."""
    v = d - x_beta
    return (y - x_gamma - theta * v) * v


def score_iv(y, d, z, x_gamma, x_zeta, x_beta, theta):
    """IV orthogonal score; works elementwise on arrays."""
    return (y - x_gamma - theta * (d - x_zeta)) * (z - x_beta)


def repetition_seed(seed: int, s: int) -> int:
    """Seed of the ``s``-th repeated fold split derived from a base seed."""
    state = np.random.SeedSequence([seed, s]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _check_fold_sizes(N: int, p: int, K: int, selection: SelectionConfig) -> None:
    if N < 2 * K:
        raise TooFewObservations(f"N={N} is too small for K={K} folds")
    smallest = N // K
    if smallest < MIN_FOLD_SIZE:
        raise TooFewObservations(
            f"smallest fold has {smallest} observations; at least {MIN_FOLD_SIZE} are required"
        )
    n_c = N - math.ceil(N / K)
    m_star = compute_m_star(n_c, p, selection.delta_bar, selection.max_steps_override)
    if n_c < 2 * m_star:
        raise TooFewObservations(
            f"complement sample of size {n_c} is smaller than twice the path length {m_star}"
        )


def _solve(
    w: NDArray[np.float64],
    v: NDArray[np.float64],
    e: NDArray[np.float64],
    alpha_level: float,
    kind: ScoreKind,
    **extra,
) -> EstimateResult:
    N = w.shape[0]
    slope = float(w @ v)
    if kind is ScoreKind.PLR:
        if slope <= DEGENERACY_RTOL * N:
            raise DegenerateTreatmentVariation(
                f"sum of squared treatment residuals is {slope:.3g}; the score has no root"
            )
    elif abs(slope) <= DEGENERACY_RTOL * N:
        raise WeakIdentification(
            f"instrument and treatment residuals are orthogonal (sum of products {slope:.3g})"
        )
    theta = float(w @ e) / slope
    psi = (e - theta * v) * w
    M = -slope / N
    omega = float(psi @ psi) / N / (M * M)
    return EstimateResult.from_moments(theta, omega, N, alpha_level, **extra)


def _crossfit(
    data: Dataset,
    targets: dict[str, NDArray[np.float64]],
    folds: FoldPlan,
    selection: SelectionConfig,
    fitter: NuisanceFitter,
) -> tuple[dict[str, NDArray[np.float64]], list[dict[str, NuisanceFit]]]:
    resid = {name: np.empty(data.n) for name in targets}
    per_fold = []
    for k in range(folds.K):
        test = folds.test_mask(k)
        train = ~test
        X_train = np.asfortranarray(data.X[train])
        X_test = data.X[test]
        fits = {}
        for name, t in targets.items():
            fit = fitter(X_train, t[train], selection)
            resid[name][test] = t[test] - fit.predict(X_test)
            fits[name] = fit
        per_fold.append(fits)
    return resid, per_fold


def _m_hats(per_fold: list[dict[str, NuisanceFit]]) -> dict[str, list[int]]:
    return {name: [f[name].m_hat for f in per_fold] for name in per_fold[0]}


def _repeat(
    single: Callable[[int], EstimateResult], cfg: DmlConfig
) -> EstimateResult:
    if cfg.repetitions == 1:
        return single(cfg.seed)
    runs = [single(repetition_seed(cfg.seed, s)) for s in range(cfg.repetitions)]
    return median_adjust(runs)


def plr_estimate(
    data: Dataset,
    cfg: Optional[DmlConfig] = None,
    fitter: NuisanceFitter = fit_nuisance,
) -> EstimateResult:
    """Cross-fitted estimate of ``theta`` in the partially linear model.

    For each fold the treatment and outcome are regressed on ``X`` over the
    remaining folds with ``fitter`` (OGA+HDAIC by default); held-out
    residuals from all folds are pooled into a single score equation and a
    single sandwich variance.
    """
    cfg = cfg or DmlConfig()
    _check_fold_sizes(data.n, data.p, cfg.k_folds, cfg.selection)
    targets = {"treatment": data.d, "outcome": data.y}

    def single(seed: int) -> EstimateResult:
        folds = make_folds(data.n, cfg.k_folds, seed)
        resid, per_fold = _crossfit(data, targets, folds, cfg.selection, fitter)
        v = resid["treatment"]
        return _solve(
            v, v, resid["outcome"], cfg.alpha_level, ScoreKind.PLR,
            m_hats=_m_hats(per_fold),
            per_fold_nuisances=per_fold,
            fold_assignments=folds.assignments,
        )

    return _repeat(single, cfg)


def iv_estimate(
    data: Dataset,
    cfg: Optional[DmlConfig] = None,
    fitter: NuisanceFitter = fit_nuisance,
) -> EstimateResult:
    """Cross-fitted estimate of ``theta`` in the linear IV model.

    Three nuisances are fitted per fold: instrument on ``X`` (``beta``),
    treatment on ``X`` (``zeta``) and outcome on ``X`` (``gamma``).
    """
    if data.z is None:
        raise GreedyDMLError("the IV estimator needs an instrument column")
    cfg = cfg or DmlConfig()
    _check_fold_sizes(data.n, data.p, cfg.k_folds, cfg.selection)
    targets = {"instrument": data.z, "treatment": data.d, "outcome": data.y}

    def single(seed: int) -> EstimateResult:
        folds = make_folds(data.n, cfg.k_folds, seed)
        resid, per_fold = _crossfit(data, targets, folds, cfg.selection, fitter)
        return _solve(
            resid["instrument"], resid["treatment"], resid["outcome"],
            cfg.alpha_level, ScoreKind.IV,
            m_hats=_m_hats(per_fold),
            per_fold_nuisances=per_fold,
            fold_assignments=folds.assignments,
        )

    return _repeat(single, cfg)


def plr_estimate_nocf(
    data: Dataset,
    cfg: Optional[DmlConfig] = None,
    fitter: NuisanceFitter = fit_nuisance,
) -> EstimateResult:
    """Partially linear estimate with nuisances fitted on the full sample.

    The result is a deterministic function of the data; ``k_folds``, ``seed``
    and ``repetitions`` are ignored. The variance is the same plug-in
    sandwich as in the cross-fitted estimator, built from full-sample
    residuals.
    """
    cfg = cfg or DmlConfig()
    N, p = data.n, data.p
    if N < MIN_FOLD_SIZE:
        raise TooFewObservations(f"at least {MIN_FOLD_SIZE} observations are required, got {N}")
    m_star = compute_m_star(N, p, cfg.selection.delta_bar, cfg.selection.max_steps_override)
    if N < 2 * m_star:
        raise TooFewObservations(f"sample of size {N} is smaller than twice the path length {m_star}")
    X = data.X
    beta = fitter(X, data.d, cfg.selection)
    gamma = fitter(X, data.y, cfg.selection)
    v = data.d - beta.predict(X)
    e = data.y - gamma.predict(X)
    fits = {"treatment": beta, "outcome": gamma}
    return _solve(
        v, v, e, cfg.alpha_level, ScoreKind.PLR,
        m_hats=_m_hats([fits]),
        per_fold_nuisances=[fits],
    )


def median_adjust(results: Sequence[EstimateResult], n_used: Optional[int] = None) -> EstimateResult:
    """Combine repeated cross-fitted estimates by medians.

    ``theta_med = median(theta_s)`` and
    ``omega_med = median(omega_s + (theta_s - theta_med)^2)``; the interval
    is rebuilt from ``omega_med``. A single result is returned unchanged.
    """
    if not results:
        raise EmptyList("median adjustment needs at least one result")
    if n_used is None:
        n_used = results[0].n_used
    if any(r.n_used != n_used for r in results):
        raise GreedyDMLError("results were computed on different sample sizes")
    if len(results) == 1:
        return results[0]
    theta = np.array([r.theta_hat for r in results])
    omega = np.array([r.omega_hat for r in results])
    theta_med = float(np.median(theta))
    omega_med = float(np.median(omega + (theta - theta_med) ** 2))
    m_hats: dict[str, list[int]] = {}
    for r in results:
        for name, sizes in r.m_hats.items():
            m_hats.setdefault(name, []).extend(sizes)
    return EstimateResult.from_moments(
        theta_med, omega_med, n_used, results[0].alpha_level, m_hats=m_hats
    )
