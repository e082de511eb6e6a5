"""Polynomial and Hermite-function basis expansions for control variables.

Hermite polynomials follow the probabilists' convention
(``H_0 = 1``, ``H_1 = x``, ``H_{k+1} = x H_k - k H_{k-1}``) and the
Hermite functions are ``psi_k(x) = exp(-x^2 / 2) H_k(x)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegreeTooLarge, GreedyDMLError, LengthMismatch

__all__ = [
    "BasisKind",
    "BasisSpec",
    "hermite_poly",
    "hermite_fn",
    "hermite_functions",
    "power_basis",
    "expand",
]

MAX_HERMITE_DEGREE = 30


class BasisKind(enum.Enum):
    POLYNOMIAL_POWER = "power"
    HERMITE_FUNCTION = "hermite"


@dataclass(frozen=True)
class BasisSpec:
    """How to expand each column.

    ``degree`` is the largest index: ``POLYNOMIAL_POWER`` emits
    ``x, x^2, ..., x^degree`` (``degree`` columns) and ``HERMITE_FUNCTION``
    emits ``psi_0, ..., psi_degree`` (``degree + 1`` columns). Inputs are
    standardised before a Hermite expansion unless ``standardize`` is set
    to False; power expansions use raw values unless it is set to True.
    """

    kind: BasisKind = BasisKind.HERMITE_FUNCTION
    degree: int = 9
    include_interactions: bool = True
    standardize: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise GreedyDMLError(f"degree must be at least 1, got {self.degree}")
        if self.kind is BasisKind.HERMITE_FUNCTION and self.degree > MAX_HERMITE_DEGREE:
            raise DegreeTooLarge(f"Hermite degree {self.degree} exceeds {MAX_HERMITE_DEGREE}")

    @property
    def columns_per_variable(self) -> int:
        return self.degree + 1 if self.kind is BasisKind.HERMITE_FUNCTION else self.degree

    @property
    def standardizes(self) -> bool:
        if self.standardize is None:
            return self.kind is BasisKind.HERMITE_FUNCTION
        return self.standardize


def _check_degree(k: int) -> None:
    if k < 0:
        raise GreedyDMLError(f"degree must be nonnegative, got {k}")
    if k > MAX_HERMITE_DEGREE:
        raise DegreeTooLarge(f"Hermite degree {k} exceeds {MAX_HERMITE_DEGREE}")


def _hermite_table(x: NDArray[np.float64], degree: int) -> NDArray[np.float64]:
    # column k holds H_k(x)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x
    for k in range(1, degree):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    return out


def hermite_poly(k: int, x: ArrayLike):
    """Probabilists' Hermite polynomial ``H_k`` evaluated by the three-term recurrence."""
    _check_degree(k)
    xa = np.asarray(x, dtype=np.float64)
    val = _hermite_table(xa, k)[..., k]
    return float(val) if val.ndim == 0 else val


def hermite_fn(k: int, x: ArrayLike):
    """Hermite function ``psi_k(x) = exp(-x^2/2) H_k(x)``."""
    xa = np.asarray(x, dtype=np.float64)
    val = np.exp(-0.5 * xa * xa) * hermite_poly(k, xa)
    return float(val) if np.ndim(val) == 0 else val


def hermite_functions(x: ArrayLike, degree: int) -> NDArray[np.float64]:
    """Matrix with columns ``psi_0(x), ..., psi_degree(x)``."""
    _check_degree(degree)
    xa = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * xa * xa)[..., None] * _hermite_table(xa, degree)


def power_basis(x: ArrayLike, degree: int) -> NDArray[np.float64]:
    """Matrix with columns ``x, x^2, ..., x^degree``."""
    xa = np.asarray(x, dtype=np.float64)
    return xa[..., None] ** np.arange(1, degree + 1)


def _standardize(x: NDArray[np.float64]) -> NDArray[np.float64]:
    centered = x - x.mean()
    sd = centered.std()
    return centered / sd if sd > 0 else centered


def _family(name: str, x: NDArray[np.float64], spec: BasisSpec) -> tuple[NDArray[np.float64], list[str]]:
    if spec.standardizes:
        x = _standardize(x)
    if spec.kind is BasisKind.HERMITE_FUNCTION:
        return hermite_functions(x, spec.degree), [f"psi{k}({name})" for k in range(spec.degree + 1)]
    return power_basis(x, spec.degree), [f"{name}^{k}" for k in range(1, spec.degree + 1)]


def expand(
    columns: Mapping[str, ArrayLike],
    spec: BasisSpec,
    linear_passthrough: Optional[Mapping[str, ArrayLike]] = None,
    dummies: Optional[Mapping[str, ArrayLike]] = None,
) -> tuple[NDArray[np.float64], list[str]]:
    """Build a control matrix from basis expansions of ``columns``.

    Output column order is: passthrough columns, dummies, one block per
    expanded variable (in mapping order), then, if interactions are on, the
    products between every pair of blocks with the first block varying
    slowest.

    Returns
    -------
    matrix : ndarray, shape (n, n_columns), Fortran order
    names : list of str
    """
    if not columns:
        raise GreedyDMLError("at least one column to expand is required")
    linear_passthrough = linear_passthrough or {}
    dummies = dummies or {}

    raw = {}
    for group in (linear_passthrough, dummies, columns):
        for name, values in group.items():
            v = np.asarray(values, dtype=np.float64)
            if v.ndim != 1:
                raise LengthMismatch(f"column {name!r} is not one-dimensional")
            raw[name] = v
    lengths = {v.shape[0] for v in raw.values()}
    if len(lengths) != 1:
        raise LengthMismatch(f"columns have differing lengths {sorted(lengths)}")

    blocks: list[NDArray[np.float64]] = []
    names: list[str] = []
    for name in list(linear_passthrough) + list(dummies):
        blocks.append(raw[name][:, None])
        names.append(name)
    families = [_family(name, raw[name], spec) for name in columns]
    for mat, fam_names in families:
        blocks.append(mat)
        names.extend(fam_names)
    if spec.include_interactions:
        for (a, a_names), (b, b_names) in combinations(families, 2):
            blocks.append((a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1))
            names.extend(f"{an}*{bn}" for an in a_names for bn in b_names)
    return np.asfortranarray(np.hstack(blocks)), names
