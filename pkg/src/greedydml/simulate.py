"""Data generating processes and the Monte Carlo harness.

Designs: ``X ~ N(0, Sigma)`` with ``Sigma_jk = rho^|j-k|``, ``p = 500`` and
``theta0 = 0.5`` by default, with sparse, exponentially or polynomially
decaying nuisance coefficients.

Partially linear::

    D = X'beta + V,  Y = theta0 (D - X'beta) + X'gamma + U,  U, V ~ N(0, 1)

IV::

    Z = X'beta + N(0, 1),  D = mu Z + X'zeta + E,
    Y = theta0 (D - X'zeta) + X'gamma + U,  corr(U, E) = 0.5

Every replication draws from its own generator seeded by
``SeedSequence([base_seed, rep_index])``, so results do not depend on the
order or the process in which replications run.
"""

from __future__ import annotations

import enum
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.signal
from numpy.typing import NDArray
from threadpoolctl import threadpool_limits

from .dml import iv_estimate, plr_estimate, plr_estimate_nocf
from .errors import GreedyDMLError, ReplicationFailureRate
from .types import Dataset, DmlConfig, EstimateResult, SelectionConfig, validate_dataset

__all__ = [
    "DesignKind",
    "CoefficientDesign",
    "Model",
    "SimSpec",
    "SimStats",
    "gen_coefficients",
    "gen_ar1_gaussian",
    "gen_plr_sample",
    "gen_iv_sample",
    "run_monte_carlo",
    "summarize",
    "scenario",
    "DESIGNS",
]

Estimator = Callable[[Dataset, DmlConfig], EstimateResult]

# replications may fail (degenerate residuals) up to this fraction of R
MAX_FAILURE_RATE = 0.01


class DesignKind(enum.Enum):
    SPARSE = "sparse"
    EXP_DECAY = "exp"
    POLY_DECAY = "poly"


@dataclass(frozen=True)
class CoefficientDesign:
    kind: DesignKind
    p: int
    active: int = 10
    value: float = 1.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise GreedyDMLError("p must be positive")
        if self.kind is DesignKind.SPARSE and not 0 <= self.active <= self.p:
            raise GreedyDMLError(f"active={self.active} must lie in [0, p={self.p}]")
        if self.kind is DesignKind.POLY_DECAY and not self.alpha > 0:
            raise GreedyDMLError("decay exponent must be positive")

    @classmethod
    def sparse(cls, p: int, active: int = 10, value: float = 1.0) -> "CoefficientDesign":
        return cls(DesignKind.SPARSE, p, active=active, value=value)

    @classmethod
    def exp_decay(cls, p: int) -> "CoefficientDesign":
        return cls(DesignKind.EXP_DECAY, p)

    @classmethod
    def poly_decay(cls, p: int, alpha: float) -> "CoefficientDesign":
        return cls(DesignKind.POLY_DECAY, p, alpha=alpha)

    @classmethod
    def zero(cls, p: int) -> "CoefficientDesign":
        return cls(DesignKind.SPARSE, p, active=0)


def gen_coefficients(design: CoefficientDesign) -> NDArray[np.float64]:
    """Coefficient vector of length ``p``; coordinate ``j`` is 1-based in the formulas."""
    j = np.arange(1, design.p + 1, dtype=np.float64)
    if design.kind is DesignKind.SPARSE:
        beta = np.zeros(design.p)
        beta[: design.active] = design.value
        return beta
    if design.kind is DesignKind.EXP_DECAY:
        return np.exp(-j)
    return j ** (-design.alpha)


def gen_ar1_gaussian(n: int, p: int, rho: float, rng: np.random.Generator) -> NDArray[np.float64]:
    """Rows i.i.d. ``N(0, Sigma)`` with ``Sigma_jk = rho^|j-k|``, column-major.

    Generated by the stationary AR(1) recursion across columns,
    ``x_1 = e_1``, ``x_j = rho x_{j-1} + sqrt(1 - rho^2) e_j``.
    """
    if not -1 < rho < 1:
        raise GreedyDMLError(f"rho must lie in (-1, 1), got {rho}")
    scale = math.sqrt(1.0 - rho * rho)
    eps = rng.standard_normal((p, n))
    eps[0] /= scale
    out = scipy.signal.lfilter([scale], [1.0, -rho], eps, axis=0)
    return out.T


class Model(enum.Enum):
    PLR = "plr"
    IV = "iv"
    PLR_NOCF = "plr-nocf"


@dataclass(frozen=True)
class SimSpec:
    """One Monte Carlo experiment.

    For the IV model ``beta_design`` describes the instrument's projection
    on ``X`` (zero in the built-in scenarios, i.e. ``Z ~ N(0, 1)``
    independent of ``X``) and ``zeta_design`` the treatment's.
    """

    model: Model
    N: int
    p: int
    beta_design: CoefficientDesign
    gamma_design: CoefficientDesign
    zeta_design: Optional[CoefficientDesign] = None
    theta0: float = 0.5
    rho: float = 0.5
    mu_iv: float = 1.0
    replications: int = 1000
    dml: DmlConfig = field(default_factory=DmlConfig)
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise GreedyDMLError("replications must be at least 1")
        if self.model is Model.IV and self.zeta_design is None:
            raise GreedyDMLError("the IV model needs a zeta_design")
        for design in (self.beta_design, self.gamma_design, self.zeta_design):
            if design is not None and design.p != self.p:
                raise GreedyDMLError("coefficient design length differs from p")


def _rep_rngs(spec: SimSpec, rep_index: int) -> tuple[np.random.Generator, int]:
    data_ss, fold_ss = np.random.SeedSequence([spec.base_seed, rep_index]).spawn(2)
    fold_seed = int(fold_ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(data_ss), fold_seed


def gen_plr_sample(spec: SimSpec, rep_index: int, *, zero_noise: bool = False) -> Dataset:
    """Draw the partially linear sample of replication ``rep_index``.

    ``zero_noise`` sets ``U = V = 0`` (the draws still happen, so ``X`` is
    the same as in the noisy sample).
    """
    rng, _ = _rep_rngs(spec, rep_index)
    X = gen_ar1_gaussian(spec.N, spec.p, spec.rho, rng)
    V = rng.standard_normal(spec.N)
    U = rng.standard_normal(spec.N)
    if zero_noise:
        U[:] = 0.0
        V[:] = 0.0
    x_beta = X @ gen_coefficients(spec.beta_design)
    x_gamma = X @ gen_coefficients(spec.gamma_design)
    d = x_beta + V
    y = spec.theta0 * (d - x_beta) + x_gamma + U
    return validate_dataset(X, y, d)


def gen_iv_sample(spec: SimSpec, rep_index: int) -> Dataset:
    """Draw the IV sample of replication ``rep_index``."""
    if spec.zeta_design is None:
        raise GreedyDMLError("the IV model needs a zeta_design")
    rng, _ = _rep_rngs(spec, rep_index)
    X = gen_ar1_gaussian(spec.N, spec.p, spec.rho, rng)
    z = X @ gen_coefficients(spec.beta_design) + rng.standard_normal(spec.N)
    U = rng.standard_normal(spec.N)
    E = 0.5 * U + math.sqrt(0.75) * rng.standard_normal(spec.N)
    x_zeta = X @ gen_coefficients(spec.zeta_design)
    x_gamma = X @ gen_coefficients(spec.gamma_design)
    d = spec.mu_iv * z + x_zeta + E
    y = spec.theta0 * (d - x_zeta) + x_gamma + U
    return validate_dataset(X, y, d, z)


@dataclass
class SimStats:
    """Monte Carlo summary over the successful replications.

    ``sd`` uses divisor ``R - 1``; with a single replication it is reported
    as 0 and ``sd_defined`` is False. ``rmse`` is ``sqrt(mean((theta - theta0)^2))``.
    """

    bias: float
    sd: float
    rmse: float
    coverage: float
    replications: int
    failures: int = 0
    sd_defined: bool = True
    per_rep: Optional[list[tuple[float, bool]]] = None


def summarize(thetas: NDArray[np.float64], covered: NDArray[np.bool_], theta0: float, failures: int = 0) -> SimStats:
    thetas = np.asarray(thetas, dtype=np.float64)
    covered = np.asarray(covered, dtype=bool)
    R = thetas.size
    if R == 0:
        raise ReplicationFailureRate("no successful replications")
    err = thetas - theta0
    bias = float(np.mean(thetas)) - theta0
    sd = float(np.std(thetas, ddof=1)) if R > 1 else 0.0
    return SimStats(
        bias=bias,
        sd=sd,
        rmse=float(np.sqrt(np.mean(err * err))),
        coverage=float(np.count_nonzero(covered)) / R,
        replications=R,
        failures=failures,
        sd_defined=R > 1,
        per_rep=[(float(t), bool(c)) for t, c in zip(thetas, covered)],
    )


_ESTIMATORS: dict[Model, Estimator] = {
    Model.PLR: plr_estimate,
    Model.IV: iv_estimate,
    Model.PLR_NOCF: plr_estimate_nocf,
}


def _one_replication(spec: SimSpec, rep_index: int, estimator: Optional[Estimator]) -> Optional[tuple[float, bool]]:
    data = gen_iv_sample(spec, rep_index) if spec.model is Model.IV else gen_plr_sample(spec, rep_index)
    _, fold_seed = _rep_rngs(spec, rep_index)
    cfg = replace(spec.dml, seed=fold_seed)
    est = estimator or _ESTIMATORS[spec.model]
    try:
        res = est(data, cfg)
    except GreedyDMLError:
        return None
    return res.theta_hat, res.covers(spec.theta0)


def _worker_init() -> None:
    threadpool_limits(limits=1)


def _replication_task(args: tuple[SimSpec, int, Optional[Estimator]]):
    return _one_replication(*args)


def run_monte_carlo(
    spec: SimSpec,
    jobs: int = 1,
    estimator: Optional[Estimator] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SimStats:
    """Run ``spec.replications`` independent replications and summarise them.

    Parameters
    ----------
    spec : SimSpec
    jobs : int
        Worker processes. Output does not depend on this value.
    estimator : callable, optional
        Replacement for the model's estimator, called as ``estimator(data, cfg)``.
        Must be picklable when ``jobs > 1``.
    progress : callable, optional
        Called as ``progress(done, total)`` after each replication.

    Raises
    ------
    ReplicationFailureRate
        If 1% or more of the replications raise an estimation error.
    """
    R = spec.replications
    tasks = [(spec, r, estimator) for r in range(R)]
    records: list[Optional[tuple[float, bool]]] = []
    if jobs <= 1:
        with threadpool_limits(limits=1):
            for task in tasks:
                records.append(_replication_task(task))
                if progress:
                    progress(len(records), R)
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init) as pool:
            for rec in pool.map(_replication_task, tasks, chunksize=max(1, R // (8 * jobs))):
                records.append(rec)
                if progress:
                    progress(len(records), R)

    ok = [rec for rec in records if rec is not None]
    failures = R - len(ok)
    if failures and failures >= MAX_FAILURE_RATE * R:
        raise ReplicationFailureRate(f"{failures} of {R} replications failed")
    thetas = np.array([t for t, _ in ok])
    covered = np.array([c for _, c in ok], dtype=bool)
    return summarize(thetas, covered, spec.theta0, failures)


DESIGNS = ("sparse", "exp", "poly2", "poly1.75", "poly1.5", "poly1.25", "poly1")

_TABLE_MODELS = {"table1": Model.PLR, "tableD1": Model.PLR, "tableD2": Model.PLR_NOCF, "tableD3": Model.IV}

_SCENARIO_RE = re.compile(
    r"^(?P<table>table1|tableD1|tableD2|tableD3)"
    r"(?:-c(?P<c>\d+(?:\.\d+)?))?"
    r"(?:-(?P<design>sparse|exp|poly\d+(?:\.\d+)?))?"
    r"(?:-n(?P<n>\d+))?$"
)


def _design(token: str, p: int) -> CoefficientDesign:
    if token == "sparse":
        return CoefficientDesign.sparse(p)
    if token == "exp":
        return CoefficientDesign.exp_decay(p)
    return CoefficientDesign.poly_decay(p, float(token[len("poly"):]))


def scenario(
    name: str,
    n: Optional[int] = None,
    replications: int = 1000,
    seed: int = 0,
    p: int = 500,
    c_star: Optional[float] = None,
    k_folds: int = 5,
    mu_iv: float = 1.0,
    delta_bar: float = 5.0,
) -> SimSpec:
    """Build a :class:`SimSpec` from a scenario name.

    Names look like ``table1-sparse-n1000``, ``tableD2-poly1.5-n500``,
    ``tableD3-exp-n1000`` or ``tableD1-c1.8-n1000``. ``table1`` is the
    cross-fitted partially linear model, ``tableD2`` the variant without
    cross fitting, ``tableD3`` the IV model and ``tableD1`` the tuning
    sensitivity runs on the ``poly1.5`` design with the ``C*`` given after
    ``-c``. Decay designs are ``exp`` (``e^-j``) and ``poly<a>`` (``j^-a``).
    The ``-n<N>`` suffix may be replaced by the ``n`` argument.
    """
    m = _SCENARIO_RE.match(name)
    if not m:
        raise GreedyDMLError(f"unknown scenario {name!r}")
    table = m["table"]
    design = m["design"]
    if table == "tableD1":
        design = design or "poly1.5"
        if m["c"] is None and c_star is None:
            raise GreedyDMLError("tableD1 scenarios need a C* value, e.g. tableD1-c1.8-n1000")
        if m["c"] is not None:
            c_star = float(m["c"])
    elif m["c"] is not None:
        raise GreedyDMLError(f"only tableD1 scenarios take a -c<C*> part: {name!r}")
    if design is None:
        raise GreedyDMLError(f"scenario {name!r} does not name a design")
    N = int(m["n"]) if m["n"] else n
    if N is None:
        raise GreedyDMLError(f"scenario {name!r} has no sample size; pass n")
    if m["n"] and n is not None and n != N:
        raise GreedyDMLError(f"sample size {n} conflicts with scenario name {name!r}")

    model = _TABLE_MODELS[table]
    coef = _design(design, p)
    selection = SelectionConfig(c_star=2.0 if c_star is None else c_star, delta_bar=delta_bar)
    dml = DmlConfig(k_folds=k_folds, selection=selection)
    if model is Model.IV:
        return SimSpec(
            model=model, N=N, p=p,
            beta_design=CoefficientDesign.zero(p), gamma_design=coef, zeta_design=coef,
            mu_iv=mu_iv, replications=replications, dml=dml, base_seed=seed,
        )
    return SimSpec(
        model=model, N=N, p=p, beta_design=coef, gamma_design=coef,
        replications=replications, dml=dml, base_seed=seed,
    )
