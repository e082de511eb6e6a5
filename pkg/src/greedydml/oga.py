"""Orthogonal greedy algorithm with HDAIC model-size selection.

The greedy path is built by modified Gram-Schmidt: the selected columns are
orthonormalised one at a time, the residual is updated by a rank-one
projection, and the triangular factor of the selected columns (the Cholesky
factor of their Gram matrix) is kept alongside. One step costs ``O(n p)``,
dominated by the ``X' r`` scan; no ``n x n`` projection matrix is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import AllColumnsZero, DegenerateSize, NumericalBreakdown, SingularGram
from .types import NuisanceFit, SelectionConfig

__all__ = [
    "SelectionPath",
    "compute_m_star",
    "oga_order",
    "hdaic_values",
    "select_model",
    "ols_refit",
    "fit_nuisance",
]

# a selected column whose orthogonal complement is this small relative to
# its own norm is treated as collinear with the columns already chosen
COLLINEAR_RTOL = 1e-12


@dataclass(eq=False)
class SelectionPath:
    """Greedy ordering of the regressors with the residual variance after each step.

    Attributes
    ----------
    order : list of int
        Selected column indices, in selection order.
    sigma_sq : ndarray
        ``sigma_sq[m]`` is ``||r||^2 / n`` after ``m + 1`` columns are projected out.
    sigma_sq_0 : float
        ``||target||^2 / n`` before any selection.
    gram_chol : ndarray
        Upper triangular ``R`` with ``R' R = X_J' X_J`` for the selected columns ``J``.
    """

    order: list[int]
    sigma_sq: NDArray[np.float64]
    sigma_sq_0: float
    gram_chol: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.order)


def compute_m_star(n: int, p: int, delta_bar: float = 5.0, override: Optional[int] = None) -> int:
    """Maximal greedy path length ``floor(delta_bar * sqrt(n / log p))``.

    The result is clamped to ``[1, min(p, n - 1)]``. Only the ``delta_bar``
    branch of the bound is used; the other branch depends on the unknown
    coefficient decay rate. With ``p == 1`` the bound is infinite and the
    clamp applies.
    """
    if override is not None:
        if override < 1:
            raise DegenerateSize(f"override must be positive, got {override}")
        return int(override)
    upper = min(p, n - 1)
    if upper < 1:
        raise DegenerateSize(f"no admissible path length for n={n}, p={p}")
    if p == 1:
        return 1
    m = math.floor(delta_bar * math.sqrt(n / math.log(p)))
    return max(1, min(m, upper))


def oga_order(
    X: NDArray[np.float64],
    target: NDArray[np.float64],
    m_star: int,
    cfg: Optional[SelectionConfig] = None,
    column_norms: Optional[NDArray[np.float64]] = None,
) -> SelectionPath:
    """Run ``m_star`` steps of the orthogonal greedy algorithm.

    At each step the unselected column maximising
    ``|X_j' r| / (sqrt(n) ||X_j||)`` is chosen, ties going to the lowest
    index. Zero columns are never candidates. A chosen column that is
    collinear with the current selection (see ``COLLINEAR_RTOL``) is dropped
    from candidacy for the rest of the path and the step is retried, so the
    returned path may be shorter than ``m_star`` when the columns' span is
    exhausted.

    Raises
    ------
    AllColumnsZero
        If every column of ``X`` is identically zero.
    NumericalBreakdown
        If the orthogonalisation produces non-finite values.
    """
    X = np.asarray(X, dtype=np.float64)
    r = np.array(target, dtype=np.float64)
    n, p = X.shape
    norms = np.sqrt(np.einsum("ij,ij->j", X, X)) if column_norms is None else column_norms
    candidate = norms > 0
    if not candidate.any():
        raise AllColumnsZero("every column of X is identically zero")
    inv_norms = np.zeros(p)
    np.divide(1.0, norms, out=inv_norms, where=candidate)

    m_star = int(min(m_star, p))
    Q = np.empty((n, m_star), order="F")
    R = np.zeros((m_star, m_star))
    order: list[int] = []
    sigma_sq: list[float] = []
    sigma_sq_0 = float(r @ r) / n
    XT = X.T

    while len(order) < m_star:
        m = len(order)
        score = np.abs(XT @ r) * inv_norms
        score[~candidate] = -np.inf
        accepted = None
        while accepted is None:
            j = int(np.argmax(score))
            if score[j] == -np.inf:
                break
            candidate[j] = False
            score[j] = -np.inf
            q = X[:, j].copy()
            coef = np.zeros(m)
            if m:
                Qm = Q[:, :m]
                # two passes keep Q orthonormal to working precision
                for _ in range(2):
                    c = Qm.T @ q
                    q -= Qm @ c
                    coef += c
            qnorm = math.sqrt(q @ q)
            if not math.isfinite(qnorm):
                raise NumericalBreakdown(f"non-finite norm orthogonalising column {j}")
            if qnorm > COLLINEAR_RTOL * norms[j]:
                accepted = j
        if accepted is None:
            break
        j = accepted
        q /= qnorm
        Q[:, m] = q
        R[:m, m] = coef
        R[m, m] = qnorm
        r -= (q @ r) * q
        order.append(j)
        sigma_sq.append(float(r @ r) / n)

    k = len(order)
    return SelectionPath(
        order=order,
        sigma_sq=np.array(sigma_sq),
        sigma_sq_0=sigma_sq_0,
        gram_chol=R[:k, :k].copy(),
    )


def hdaic_values(path: SelectionPath | Sequence[float], p: int, n: int, c_star: float) -> NDArray[np.float64]:
    """HDAIC along the path: ``(1 + c_star * m * log(p) / n) * sigma_sq[m - 1]``.

    ``n`` is the size of the sample the path was fitted on.
    """
    sigma_sq = np.asarray(path.sigma_sq if isinstance(path, SelectionPath) else path, dtype=np.float64)
    if sigma_sq.size == 0:
        raise DegenerateSize("empty selection path")
    m = np.arange(1, sigma_sq.size + 1)
    return (1.0 + c_star * m * math.log(p) / n) * sigma_sq


def select_model(values: Sequence[float] | NDArray[np.float64]) -> int:
    """1-based position of the smallest criterion value (first one on ties)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DegenerateSize("no criterion values to minimise")
    return int(np.argmin(values)) + 1


def ols_refit(
    X: NDArray[np.float64],
    target: NDArray[np.float64],
    support: Sequence[int],
    ridge_eps: float = 0.0,
) -> NDArray[np.float64]:
    """Least-squares coefficients on ``support``, embedded in a length-``p`` vector.

    Solves the normal equations ``(X_S' X_S + ridge_eps I) b = X_S' target``
    by Cholesky factorisation.
    """
    p = X.shape[1]
    beta = np.zeros(p)
    support = list(support)
    if not support:
        return beta
    Xs = X[:, support]
    gram = Xs.T @ Xs
    if ridge_eps:
        gram[np.diag_indices_from(gram)] += ridge_eps
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularGram(f"Gram matrix of {len(support)} selected columns is singular") from None
    b = scipy.linalg.cho_solve(factor, Xs.T @ target, check_finite=False)
    if not np.all(np.isfinite(b)):
        raise SingularGram("non-finite coefficients from the normal equations")
    beta[support] = b
    return beta


def fit_nuisance(
    X: NDArray[np.float64],
    target: NDArray[np.float64],
    cfg: Optional[SelectionConfig] = None,
    column_norms: Optional[NDArray[np.float64]] = None,
) -> NuisanceFit:
    """Fit ``target`` on ``X`` with OGA ordering, HDAIC selection and an OLS refit."""
    cfg = cfg or SelectionConfig()
    n, p = X.shape
    m_star = compute_m_star(n, p, cfg.delta_bar, cfg.max_steps_override)
    path = oga_order(X, target, m_star, cfg, column_norms=column_norms)
    values = hdaic_values(path, p, n, cfg.c_star)
    m_hat = select_model(values)
    support = path.order[:m_hat]
    coefficients = ols_refit(X, target, support, cfg.ridge_eps)
    return NuisanceFit(
        support=support,
        coefficients=coefficients,
        m_hat=m_hat,
        hdaic_values=values,
        sigma_sq_path=path.sigma_sq,
    )
