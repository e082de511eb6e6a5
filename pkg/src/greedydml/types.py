"""Shared data model: validated datasets, configuration and result containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtri

from .errors import EmptyData, GreedyDMLError, LengthMismatch, NonFiniteValue

__all__ = [
    "Dataset",
    "SelectionConfig",
    "DmlConfig",
    "NuisanceFit",
    "EstimateResult",
    "validate_dataset",
    "critical_value",
    "confidence_interval",
]


def _frozen(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Regressors, outcome, treatment and optional instrument for one sample.

    Instances should be built with :func:`validate_dataset`. ``X`` is stored
    column-major (Fortran order) because the greedy selection scans whole
    columns at every step. All arrays are read-only.
    """

    X: NDArray[np.float64]
    y: NDArray[np.float64]
    d: NDArray[np.float64]
    z: Optional[NDArray[np.float64]] = None
    column_names: Optional[tuple[str, ...]] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def has_instrument(self) -> bool:
        return self.z is not None

    @cached_property
    def column_norms(self) -> NDArray[np.float64]:
        return np.sqrt(np.einsum("ij,ij->j", self.X, self.X))

    def subset(self, rows: NDArray[np.intp]) -> "Dataset":
        """Return the sample restricted to ``rows`` (no revalidation needed)."""
        z = None if self.z is None else _frozen(self.z[rows])
        return Dataset(
            X=_frozen(np.asfortranarray(self.X[rows])),
            y=_frozen(self.y[rows]),
            d=_frozen(self.d[rows]),
            z=z,
            column_names=self.column_names,
        )


def _as_vector(name: str, values: ArrayLike) -> NDArray[np.float64]:
    try:
        v = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise NonFiniteValue(f"{name}: values are not numeric ({exc})") from None
    if v.ndim != 1:
        raise LengthMismatch(f"{name}: expected a 1-D vector, got shape {v.shape}")
    return v


def validate_dataset(
    X: ArrayLike,
    y: ArrayLike,
    d: ArrayLike,
    z: Optional[ArrayLike] = None,
    column_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """Build a :class:`Dataset`, enforcing shape and finiteness invariants.

    Parameters
    ----------
    X : array_like, shape (n, p)
        Regressors. A 1-D input is treated as a single column.
    y, d : array_like, shape (n,)
        Outcome and treatment.
    z : array_like, shape (n,), optional
        Instrument, required only for the IV estimator.
    column_names : sequence of str, optional
        Names of the columns of ``X``.

    Raises
    ------
    EmptyData
        If there are fewer than two observations or no regressors.
    LengthMismatch
        If the vectors and ``X`` disagree on ``n``.
    NonFiniteValue
        If any entry is NaN or infinite.
    """
    try:
        Xa = np.array(X, dtype=np.float64, order="F")
    except (TypeError, ValueError) as exc:
        raise NonFiniteValue(f"X: values are not numeric ({exc})") from None
    if Xa.ndim == 1:
        Xa = Xa.reshape(-1, 1, order="F")
    if Xa.ndim != 2:
        raise LengthMismatch(f"X: expected a 2-D matrix, got shape {Xa.shape}")
    ya = _as_vector("y", y)
    da = _as_vector("d", d)
    za = None if z is None else _as_vector("z", z)

    n, p = Xa.shape
    if n == 0 or p == 0 or ya.size == 0:
        raise EmptyData(f"empty data: X has shape {Xa.shape}, y has length {ya.size}")
    for name, v in (("y", ya), ("d", da), ("z", za)):
        if v is not None and v.shape[0] != n:
            raise LengthMismatch(f"{name} has length {v.shape[0]} but X has {n} rows")
    if n < 2:
        raise EmptyData("at least two observations are required")
    for name, v in (("X", Xa), ("y", ya), ("d", da), ("z", za)):
        if v is not None and not np.all(np.isfinite(v)):
            raise NonFiniteValue(f"{name} contains NaN or infinite values")

    names = None
    if column_names is not None:
        names = tuple(str(c) for c in column_names)
        if len(names) != p:
            raise LengthMismatch(f"{len(names)} column names for {p} columns")

    return Dataset(
        X=_frozen(Xa),
        y=_frozen(ya),
        d=_frozen(da),
        z=None if za is None else _frozen(za),
        column_names=names,
    )


@dataclass(frozen=True)
class SelectionConfig:
    """Tuning of the OGA+HDAIC nuisance estimator.

    ``c_star`` is the HDAIC penalty constant and ``delta_bar`` scales the
    maximal path length ``floor(delta_bar * sqrt(n / log p))``. The defaults
    (2 and 5) are the values used for all reported simulations.
    """

    c_star: float = 2.0
    delta_bar: float = 5.0
    max_steps_override: Optional[int] = None
    tie_break: Literal["lowest-index"] = "lowest-index"
    ridge_eps: float = 0.0

    def __post_init__(self) -> None:
        if not (self.c_star > 0 and math.isfinite(self.c_star)):
            raise GreedyDMLError(f"c_star must be positive, got {self.c_star}")
        if not (self.delta_bar > 0 and math.isfinite(self.delta_bar)):
            raise GreedyDMLError(f"delta_bar must be positive, got {self.delta_bar}")
        if self.max_steps_override is not None and self.max_steps_override < 1:
            raise GreedyDMLError("max_steps_override must be a positive integer")
        if self.tie_break != "lowest-index":
            raise GreedyDMLError("only the 'lowest-index' tie-break rule is supported")
        if not self.ridge_eps >= 0:
            raise GreedyDMLError("ridge_eps must be nonnegative")


@dataclass(frozen=True)
class DmlConfig:
    """Cross-fitting configuration.

    ``repetitions`` > 1 repeats the estimator over independent fold splits
    and combines the runs with :func:`greedydml.dml.median_adjust`.
    """

    k_folds: int = 5
    seed: int = 0
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    repetitions: int = 1
    alpha_level: float = 0.05

    def __post_init__(self) -> None:
        if self.k_folds < 2:
            raise GreedyDMLError(f"k_folds must be at least 2, got {self.k_folds}")
        if not 0 <= self.seed < 2**64:
            raise GreedyDMLError("seed must be a 64-bit unsigned integer")
        if self.repetitions < 1:
            raise GreedyDMLError("repetitions must be at least 1")
        if not 0 < self.alpha_level < 1:
            raise GreedyDMLError("alpha_level must lie in (0, 1)")


@dataclass(eq=False)
class NuisanceFit:
    """Result of one OGA+HDAIC fit of a target on the regressors."""

    support: list[int]
    coefficients: NDArray[np.float64]
    m_hat: int
    hdaic_values: NDArray[np.float64]
    sigma_sq_path: NDArray[np.float64]

    def predict(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        if not self.support:
            return np.zeros(X.shape[0])
        return X[:, self.support] @ self.coefficients[self.support]


def critical_value(alpha_level: float) -> float:
    """Two-sided standard normal quantile ``Phi^{-1}(1 - alpha/2)``."""
    return float(ndtri(1.0 - alpha_level / 2.0))


def confidence_interval(
    theta: float, omega: float, n: int, alpha_level: float
) -> tuple[float, float, float]:
    """Return ``(std_err, ci_low, ci_high)`` for a root-N normal interval."""
    se = math.sqrt(omega / n)
    half = critical_value(alpha_level) * se
    return se, theta - half, theta + half


@dataclass
class EstimateResult:
    """Point estimate, sandwich variance and normal confidence interval.

    ``omega_hat`` is the asymptotic variance of ``sqrt(N) * (theta - theta0)``;
    ``std_err`` is therefore ``sqrt(omega_hat / n_used)``. The diagnostic
    fields at the end do not take part in equality comparisons.
    """

    theta_hat: float
    omega_hat: float
    std_err: float
    ci_low: float
    ci_high: float
    n_used: int
    alpha_level: float = 0.05
    m_hats: dict[str, list[int]] = field(default_factory=dict)
    per_fold_nuisances: Optional[list[dict[str, NuisanceFit]]] = field(
        default=None, compare=False, repr=False
    )
    fold_assignments: Optional[NDArray[np.intp]] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_moments(
        cls,
        theta_hat: float,
        omega_hat: float,
        n_used: int,
        alpha_level: float = 0.05,
        **extra,
    ) -> "EstimateResult":
        se, lo, hi = confidence_interval(theta_hat, omega_hat, n_used, alpha_level)
        return cls(
            theta_hat=float(theta_hat),
            omega_hat=float(omega_hat),
            std_err=se,
            ci_low=lo,
            ci_high=hi,
            n_used=int(n_used),
            alpha_level=alpha_level,
            **extra,
        )

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high
